//! HSIC-Lasso: nonnegative lasso regression of the centred label Gram matrix
//! on per-feature centred Gram matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{gamma, DesignMatrix, SurrogateMethod, SurrogateReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsicConfig {
    pub lambda: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for HsicConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            tolerance: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

/// Upper triangle of `H K H / |H K H|_F` with off-diagonal entries scaled by
/// `sqrt(2)`, so that dot products of two such vectors equal the Frobenius
/// inner product of the full matrices. Returns zeros for a zero matrix.
fn centred_normalised(k: &[f64], n: usize) -> Vec<f64> {
    let mut row_mean = vec![0.0; n];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            row_mean[i] += k[i * n + j];
        }
        total += row_mean[i];
        row_mean[i] /= n as f64;
    }
    let grand = total / (n * n) as f64;
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let c = k[i * n + j] - row_mean[i] - row_mean[j] + grand;
            out.push(if i == j {
                c
            } else {
                c * std::f64::consts::SQRT_2
            });
        }
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 {
        out.iter_mut().for_each(|v| *v /= norm);
    } else {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    out
}

/// Gaussian Gram matrix with the median heuristic bandwidth.
fn feature_gram(col: &[f64]) -> Vec<f64> {
    let n = col.len();
    let mut dists: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = (col[i] - col[j]).abs();
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return vec![0.0; n * n];
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let s = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = col[i] - col[j];
            k[i * n + j] = (-(d * d) / (2.0 * s * s)).exp();
        }
    }
    k
}

/// Delta kernel on labels, normalised by class size.
fn label_gram(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let pos = y.iter().filter(|&&v| v > 0.0).count() as f64;
    let neg = n as f64 - pos;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if (y[i] > 0.0) == (y[j] > 0.0) {
                l[i * n + j] = 1.0 / if y[i] > 0.0 { pos } else { neg };
            }
        }
    }
    l
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) struct HsicSolution {
    pub weights: Vec<f64>,
    pub converged: bool,
    #[cfg_attr(not(test), allow(dead_code))]
    pub objectives: Vec<f64>,
}

/// `min 1/2 |l - sum_k w_k g_k|^2 + lambda sum_k w_k` subject to `w >= 0`,
/// by cyclic coordinate descent.
pub(crate) fn nonnegative_lasso(
    grams: &[Vec<f64>],
    l: &[f64],
    config: &HsicConfig,
) -> HsicSolution {
    let d = grams.len();
    let norms: Vec<f64> = grams.iter().map(|g| dot(g, g)).collect();
    let mut w = vec![0.0; d];
    let mut residual = l.to_vec();
    let objective = |r: &[f64], w: &[f64]| 0.5 * dot(r, r) + config.lambda * w.iter().sum::<f64>();
    let mut objectives = vec![objective(&residual, &w)];
    let mut converged = false;
    for _ in 0..config.max_sweeps {
        let mut max_change: f64 = 0.0;
        for k in 0..d {
            if norms[k] <= 0.0 {
                continue;
            }
            let g = &grams[k];
            let rho = dot(g, &residual) + w[k] * norms[k];
            let new = ((rho - config.lambda) / norms[k]).max(0.0);
            let delta = new - w[k];
            if delta != 0.0 {
                residual
                    .iter_mut()
                    .zip(g)
                    .for_each(|(r, gv)| *r -= delta * gv);
                w[k] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let obj = objective(&residual, &w);
        debug_assert!(
            obj <= objectives.last().unwrap() + 1e-10,
            "objective increased: {obj} > {}",
            objectives.last().unwrap()
        );
        objectives.push(obj);
        if max_change < config.tolerance {
            converged = true;
            break;
        }
    }
    HsicSolution {
        weights: w,
        converged,
        objectives,
    }
}

/// Per-feature HSIC-Lasso weights (nonnegative) and a convergence flag.
pub(crate) fn hsic_weights(matrix: &DesignMatrix, config: &HsicConfig) -> Result<(Vec<f64>, bool)> {
    if !(config.lambda > 0.0) {
        return Err(Error::Config(format!(
            "HSIC-Lasso strength must be positive, got {}",
            config.lambda
        )));
    }
    let n = matrix.rows;
    let d = matrix.cols;
    // Identical columns share one Gram matrix and split its weight evenly.
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for j in 0..d {
        let col = matrix.column(j);
        match groups.iter_mut().find(|(c, _)| *c == col) {
            Some((_, members)) => members.push(j),
            None => groups.push((col, vec![j])),
        }
    }
    let grams: Vec<Vec<f64>> = groups
        .iter()
        .map(|(col, _)| centred_normalised(&feature_gram(col), n))
        .collect();
    let l = centred_normalised(&label_gram(&matrix.y), n);
    let sol = nonnegative_lasso(&grams, &l, config);
    if !sol.converged {
        log::warn!(
            "HSIC-Lasso stopped at the sweep cap of {}",
            config.max_sweeps
        );
    }
    let mut w = vec![0.0; d];
    for ((_, members), wk) in groups.iter().zip(&sol.weights) {
        for &j in members {
            w[j] = wk / members.len() as f64;
        }
    }
    Ok((w, sol.converged))
}

pub fn fit_hsic_lasso(matrix: &DesignMatrix, config: &HsicConfig) -> Result<SurrogateReport> {
    matrix.check_labels()?;
    let (w, converged) = hsic_weights(matrix, config)?;
    let gammas: Vec<f64> = (0..matrix.cols).map(|c| gamma(matrix, c)).collect();
    let scores: Vec<f64> = w.iter().zip(&gammas).map(|(w, g)| w * g).collect();
    let mut report =
        SurrogateReport::from_scores(SurrogateMethod::HsicLasso, matrix, &scores, &gammas);
    report.converged = converged;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::fixtures;
    use proptest::prelude::*;

    fn matrix(cols: Vec<Vec<f64>>, y: Vec<f64>) -> DesignMatrix {
        let n = y.len();
        let d = cols.len();
        let x = (0..n)
            .flat_map(|i| cols.iter().map(move |c| c[i]))
            .collect();
        DesignMatrix::new(
            x,
            y,
            vec![1.0; n],
            (0..d).map(|j| format!("k{j}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn huge_lambda_zeroes_everything() {
        let cfg = HsicConfig {
            lambda: 1e6,
            ..HsicConfig::default()
        };
        let (w, converged) = hsic_weights(&fixtures::separable(), &cfg).unwrap();
        assert!(converged);
        assert!(w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn label_feature_beats_noise_and_matches_grid_search() {
        let y = vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
        let label_col: Vec<f64> = y.iter().map(|v| if *v > 0.0 { 0.5 } else { 0.0 }).collect();
        let noise = vec![0.3, 0.1, 0.9, 0.2, 0.8, 0.4];
        let m = matrix(vec![noise.clone(), label_col.clone()], y.clone());
        let cfg = HsicConfig::default();
        let (w, _) = hsic_weights(&m, &cfg).unwrap();
        assert!(w[1] > w[0]);

        // Exhaustive grid over (w0, w1) on the same objective.
        let g0 = centred_normalised(&feature_gram(&noise), 6);
        let g1 = centred_normalised(&feature_gram(&label_col), 6);
        let l = centred_normalised(&label_gram(&y), 6);
        let obj = |a: f64, b: f64| {
            let r: Vec<f64> = (0..l.len()).map(|i| l[i] - a * g0[i] - b * g1[i]).collect();
            0.5 * dot(&r, &r) + cfg.lambda * (a + b)
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            for j in 0..=400 {
                let (a, b) = (i as f64 / 200.0, j as f64 / 200.0);
                let v = obj(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        assert!(obj(w[0], w[1]) <= best.0 + 1e-9);
        assert!(
            (w[0] - best.1).abs() <= 0.01 && (w[1] - best.2).abs() <= 0.01,
            "{w:?} {best:?}"
        );
    }

    #[test]
    fn duplicate_and_constant_columns() {
        let y = vec![1.0, 1.0, -1.0, -1.0];
        let c = vec![0.5, 0.4, 0.0, 0.1];
        let m = matrix(vec![c.clone(), vec![0.2; 4], c], y);
        let (w, _) = hsic_weights(&m, &HsicConfig::default()).unwrap();
        assert_eq!(w[0], w[2]);
        assert!(w[0] > 0.0);
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn objective_never_increases() {
        let y = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
        let cols: Vec<Vec<f64>> = (0..5)
            .map(|k| (0..7).map(|i| ((i * (k + 3)) % 5) as f64 / 5.0).collect())
            .collect();
        let m = matrix(cols, y.clone());
        let grams: Vec<Vec<f64>> = (0..m.cols)
            .map(|j| centred_normalised(&feature_gram(&m.column(j)), 7))
            .collect();
        let l = centred_normalised(&label_gram(&y), 7);
        let sol = nonnegative_lasso(&grams, &l, &HsicConfig::default());
        assert!(sol.objectives.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let cfg = HsicConfig {
            lambda: 0.0,
            ..HsicConfig::default()
        };
        assert!(hsic_weights(&fixtures::separable(), &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn weights_are_nonnegative(vals in prop::collection::vec(0u8..5, 18), lambda in 1e-4f64..0.5) {
            let y = vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
            let cols: Vec<Vec<f64>> = vals.chunks(6).map(|c| c.iter().map(|&v| v as f64 / 5.0).collect()).collect();
            let m = matrix(cols, y);
            let cfg = HsicConfig { lambda, ..HsicConfig::default() };
            let (w, _) = hsic_weights(&m, &cfg).unwrap();
            prop_assert!(w.iter().all(|&v| v >= 0.0));
        }
    }
}
