//! Instance-weighted ridge regression on clause frequencies (K-Lasso).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::{gamma, DesignMatrix, SurrogateMethod, SurrogateReport};

/// Minimises `sum_i alpha_i (y_i - x_i.w)^2 + beta |w|^2` in closed form.
///
/// Solves the `d x d` normal equations when there are no more features than
/// rows and the equivalent `n x n` dual system otherwise.
pub fn ridge_solve(matrix: &DesignMatrix, beta: f64) -> Result<Vec<f64>> {
    if !(beta >= 0.0) {
        return Err(Error::Config(format!(
            "ridge strength must be >= 0, got {beta}"
        )));
    }
    let (n, d) = (matrix.rows, matrix.cols);
    if d == 0 {
        return Ok(Vec::new());
    }
    let sqrt_a: Vec<f64> = matrix.alpha.iter().map(|a| a.sqrt()).collect();
    // X~ = A^{1/2} X, y~ = A^{1/2} y
    let xt = DMatrix::from_fn(n, d, |i, j| sqrt_a[i] * matrix.get(i, j));
    let yt = DVector::from_fn(n, |i, _| sqrt_a[i] * matrix.y[i]);
    let singular = || Error::SingularSystem;
    // Cholesky happily factors matrices that are singular up to rounding.
    let factor = |gram: DMatrix<f64>| {
        let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
        let chol = gram.cholesky().ok_or_else(singular)?;
        let l = chol.l_dirty();
        if (0..l.nrows()).any(|k| l[(k, k)] * l[(k, k)] <= 1e-12 * scale) {
            return Err(singular());
        }
        Ok(chol)
    };
    if d <= n {
        let mut gram = xt.transpose() * &xt;
        for k in 0..d {
            gram[(k, k)] += beta;
        }
        let rhs = xt.transpose() * &yt;
        let chol = factor(gram)?;
        Ok(chol.solve(&rhs).iter().copied().collect())
    } else {
        if beta == 0.0 {
            return Err(singular());
        }
        let mut gram = &xt * xt.transpose();
        for k in 0..n {
            gram[(k, k)] += beta;
        }
        let chol = factor(gram)?;
        let u = chol.solve(&yt);
        Ok((xt.transpose() * u).iter().copied().collect())
    }
}

pub fn fit_klasso(matrix: &DesignMatrix, beta: f64) -> Result<SurrogateReport> {
    matrix.check_labels()?;
    let w = ridge_solve(matrix, beta)?;
    let gammas: Vec<f64> = (0..matrix.cols).map(|c| gamma(matrix, c)).collect();
    let mut report = SurrogateReport::from_scores(SurrogateMethod::KLasso, matrix, &w, &gammas);
    let mut by_magnitude: Vec<usize> = (0..w.len()).collect();
    by_magnitude.sort_by(|&a, &b| {
        w[b].abs()
            .total_cmp(&w[a].abs())
            .then(matrix.keys[a].cmp(&matrix.keys[b]))
    });
    report.magnitude_ranking = Some(by_magnitude);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::fixtures;
    use proptest::prelude::*;

    fn normal_equation_residual(m: &DesignMatrix, w: &[f64], beta: f64) -> f64 {
        // X^T A (y - X w) - beta w
        let mut worst: f64 = 0.0;
        for j in 0..m.cols {
            let mut g = -beta * w[j];
            for i in 0..m.rows {
                let pred: f64 = (0..m.cols).map(|k| m.get(i, k) * w[k]).sum();
                g += m.alpha[i] * m.get(i, j) * (m.y[i] - pred);
            }
            worst = worst.max(g.abs());
        }
        worst
    }

    #[test]
    fn huge_ridge_shrinks_everything() {
        let w = ridge_solve(&fixtures::separable(), 1e12).unwrap();
        assert!(w.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn scalar_ridge_closed_form() {
        let y = vec![1.0, -1.0, 1.0, -1.0, 1.0];
        let m = DesignMatrix::new(y.clone(), y.clone(), vec![1.0; 5], vec!["c".into()]).unwrap();
        let w = ridge_solve(&m, 0.01).unwrap();
        let expect = 5.0 / (5.0 + 0.01);
        assert!((w[0] - expect).abs() < 1e-12);
        assert!((w[0] - 1.0).abs() < 0.02);
    }

    #[test]
    fn duplicate_columns_share_weight() {
        let m = DesignMatrix::new(
            vec![0.5, 0.5, 0.1, 0.2, 0.2, 0.7, 0.0, 0.0, 0.4],
            vec![1.0, -1.0, 1.0],
            vec![1.0, 0.5, 0.8],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let w = ridge_solve(&m, 0.1).unwrap();
        assert!((w[0] - w[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_ridge_singular_is_reported() {
        let m = DesignMatrix::new(
            vec![0.5, 0.5, 0.2, 0.2],
            vec![1.0, -1.0],
            vec![1.0; 2],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(matches!(ridge_solve(&m, 0.0), Err(Error::SingularSystem)));
        let wide = DesignMatrix::new(
            vec![0.5, 0.1, 0.2],
            vec![1.0],
            vec![1.0],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        assert!(matches!(
            ridge_solve(&wide, 0.0),
            Err(Error::SingularSystem)
        ));
    }

    #[test]
    fn signed_weights_are_the_scores() {
        let r = fit_klasso(&fixtures::separable(), 0.01).unwrap();
        assert_eq!(r.ranking[0].key, "a");
        assert!(r.ranking[0].score > 0.0);
        assert!(r.magnitude_ranking.is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn satisfies_normal_equations(
            rows in 2usize..9,
            cols in 1usize..12,
            seed_vals in prop::collection::vec(0.0f64..1.0, 120),
            beta in 1e-3f64..10.0,
        ) {
            let x: Vec<f64> = seed_vals.iter().cycle().take(rows * cols).copied().collect();
            let y: Vec<f64> = (0..rows).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let alpha: Vec<f64> = (0..rows).map(|i| 0.1 + seed_vals[i] * 0.9).collect();
            let keys = (0..cols).map(|c| c.to_string()).collect();
            let m = DesignMatrix::new(x, y, alpha, keys).unwrap();
            let w = ridge_solve(&m, beta).unwrap();
            prop_assert!(normal_equation_residual(&m, &w, beta) <= 1e-8);
        }
    }
}
