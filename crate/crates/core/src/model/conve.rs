use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, RelationId};

use super::{EmbeddingStore, ModelKind};

/// Convolution filters and projection of a ConvE interaction function.
///
/// `[head; relation]` is laid out row-major as a `rows x cols` matrix, every
/// filter is slid over it without padding (stride 1), the feature maps are
/// flattened filter-major and projected by `projection`
/// (`feature_len x dim`, row-major). No activation is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvEParams {
    pub rows: usize,
    pub cols: usize,
    pub filter_rows: usize,
    pub filter_cols: usize,
    pub num_filters: usize,
    /// `num_filters * filter_rows * filter_cols` weights, filter-major.
    pub filters: Vec<f64>,
    pub projection: Vec<f64>,
}

/// Default reshape for a `d`-dimensional ConvE: `cols` is the largest divisor
/// of `d` not exceeding `sqrt(d)`, `rows = 2d / cols`.
pub fn default_reshape(dim: usize) -> (usize, usize) {
    let mut cols = 1;
    let mut c = 1;
    while c * c <= dim {
        if dim.is_multiple_of(c) {
            cols = c;
        }
        c += 1;
    }
    (2 * dim / cols, cols)
}

impl ConvEParams {
    pub fn map_rows(&self) -> usize {
        self.rows + 1 - self.filter_rows
    }

    pub fn map_cols(&self) -> usize {
        self.cols + 1 - self.filter_cols
    }

    pub fn feature_len(&self) -> usize {
        self.num_filters * self.map_rows() * self.map_cols()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.rows * self.cols != 2 * dim {
            return Err(Error::Config(format!(
                "ConvE reshape {}x{} does not hold 2*{dim} values",
                self.rows, self.cols
            )));
        }
        if self.filter_rows == 0
            || self.filter_cols == 0
            || self.filter_rows > self.rows
            || self.filter_cols > self.cols
            || self.num_filters == 0
        {
            return Err(Error::Config(format!(
                "ConvE filter {}x{} (x{}) does not fit a {}x{} input",
                self.filter_rows, self.filter_cols, self.num_filters, self.rows, self.cols
            )));
        }
        let expected = self.num_filters * self.filter_rows * self.filter_cols;
        if self.filters.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.filters.len(),
                context: "ConvE filter weights".into(),
            });
        }
        let expected = self.feature_len() * dim;
        if self.projection.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.projection.len(),
                context: "ConvE projection matrix".into(),
            });
        }
        if self
            .filters
            .iter()
            .chain(&self.projection)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Config("non-finite ConvE parameter".into()));
        }
        Ok(())
    }

    /// Feature maps of all filters over the stacked `[head; relation]` matrix.
    pub fn features(&self, head: &[f64], relation: &[f64]) -> Vec<f64> {
        let stacked: Vec<f64> = head.iter().chain(relation).copied().collect();
        let (mr, mc) = (self.map_rows(), self.map_cols());
        let per_filter = self.filter_rows * self.filter_cols;
        let mut out = Vec::with_capacity(self.feature_len());
        for f in 0..self.num_filters {
            let w = &self.filters[f * per_filter..(f + 1) * per_filter];
            for i in 0..mr {
                for j in 0..mc {
                    let mut acc = 0.0;
                    for a in 0..self.filter_rows {
                        let row = &stacked[(i + a) * self.cols + j..];
                        let wrow = &w[a * self.filter_cols..(a + 1) * self.filter_cols];
                        acc += wrow.iter().zip(row).map(|(x, y)| x * y).sum::<f64>();
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    /// `features(head, relation)^T * projection`.
    pub fn combine(&self, head: &[f64], relation: &[f64]) -> Vec<f64> {
        let dim = head.len();
        let features = self.features(head, relation);
        let mut out = vec![0.0; dim];
        for (j, &v) in features.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let row = &self.projection[j * dim..(j + 1) * dim];
            for (o, w) in out.iter_mut().zip(row) {
                *o += v * w;
            }
        }
        out
    }
}

/// The ConvE representation of `(head, relation)` before the tail product.
pub fn conve_combine(
    store: &EmbeddingStore,
    head: EntityId,
    relation: RelationId,
) -> Result<Vec<f64>> {
    let params = match (store.kind(), store.conve_params()) {
        (ModelKind::ConvE, Some(p)) => p,
        _ => {
            return Err(Error::Config(format!(
                "conve_combine called on a {} store",
                store.kind()
            )))
        }
    };
    Ok(params.combine(store.entity(head)?, store.relation(relation)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Triple;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straightforward 2D cross-correlation over explicit nested arrays.
    fn naive_conve(
        head: &[f64],
        rel: &[f64],
        m: usize,
        n: usize,
        filters: &[Vec<Vec<f64>>],
        w: &[Vec<f64>],
    ) -> Vec<f64> {
        let flat: Vec<f64> = head.iter().chain(rel.iter()).copied().collect();
        let mut b = vec![vec![0.0; n]; m];
        for (idx, v) in flat.iter().enumerate() {
            b[idx / n][idx % n] = *v;
        }
        let mut feats = Vec::new();
        for f in filters {
            let (fr, fc) = (f.len(), f[0].len());
            for i in 0..=(m - fr) {
                for j in 0..=(n - fc) {
                    let mut s = 0.0;
                    for a in 0..fr {
                        for c in 0..fc {
                            s += b[i + a][j + c] * f[a][c];
                        }
                    }
                    feats.push(s);
                }
            }
        }
        let d = head.len();
        (0..d)
            .map(|k| feats.iter().enumerate().map(|(j, v)| v * w[j][k]).sum())
            .collect()
    }

    #[test]
    fn default_reshape_examples() {
        assert_eq!(default_reshape(4), (4, 2));
        assert_eq!(default_reshape(200), (40, 10));
        assert_eq!(default_reshape(7), (14, 1));
    }

    #[test]
    fn zero_filters_give_zero_vector_and_zero_score() {
        let dim = 4;
        let params = ConvEParams {
            rows: 4,
            cols: 2,
            filter_rows: 1,
            filter_cols: 1,
            num_filters: 1,
            filters: vec![0.0],
            projection: (0..8 * dim)
                .map(|i| if i % 5 == 0 { 1.0 } else { 0.0 })
                .collect(),
        };
        let ents: Vec<f64> = (0..3 * dim).map(|i| i as f64 * 0.3 - 1.0).collect();
        let rels: Vec<f64> = vec![0.5, -0.2, 0.1, 0.9];
        let store = EmbeddingStore::new(ModelKind::ConvE, dim, ents, rels, Some(params)).unwrap();
        let v = conve_combine(&store, EntityId(0), RelationId(0)).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
        for tail in 0..3 {
            let t = Triple::new(EntityId(0), RelationId(0), EntityId(tail));
            assert_eq!(store.score(&t).unwrap(), 0.0);
        }
        assert_eq!(
            store
                .triple_embedding(&Triple::new(EntityId(1), RelationId(0), EntityId(2)))
                .unwrap()
                .len(),
            8
        );
    }

    #[test]
    fn identity_filter_recovers_permuted_inputs() {
        // 2-dim embeddings: stacked input is [h0, h1, r0, r1] in a 2x2 grid.
        // With a 1x1 unit filter the features equal that vector, and a
        // permutation-structured projection picks (r1, h0).
        let dim = 2;
        let mut projection = vec![0.0; 4 * dim];
        projection[3 * dim] = 1.0; // feature 3 (r1) -> out 0
        projection[1] = 1.0; // feature 0 (h0) -> out 1
        let params = ConvEParams {
            rows: 2,
            cols: 2,
            filter_rows: 1,
            filter_cols: 1,
            num_filters: 1,
            filters: vec![1.0],
            projection,
        };
        let h = [0.7, -1.3];
        let r = [2.5, 4.0];
        assert_eq!(params.combine(&h, &r), vec![4.0, 0.7]);
    }

    #[test]
    fn matches_naive_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(dim, fr, fc, nf) in &[(4usize, 2usize, 2usize, 3usize), (6, 3, 2, 2), (9, 2, 3, 4)] {
            let (m, n) = default_reshape(dim);
            let filters: Vec<Vec<Vec<f64>>> = (0..nf)
                .map(|_| {
                    (0..fr)
                        .map(|_| (0..fc).map(|_| rng.random_range(-1.0..1.0)).collect())
                        .collect()
                })
                .collect();
            let feat_len = nf * (m - fr + 1) * (n - fc + 1);
            let w: Vec<Vec<f64>> = (0..feat_len)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let params = ConvEParams {
                rows: m,
                cols: n,
                filter_rows: fr,
                filter_cols: fc,
                num_filters: nf,
                filters: filters.iter().flatten().flatten().copied().collect(),
                projection: w.iter().flatten().copied().collect(),
            };
            params.validate(dim).unwrap();
            let h: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = params.combine(&h, &r);
            let slow = naive_conve(&h, &r, m, n, &filters, &w);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn bad_reshape_is_config_error() {
        let params = ConvEParams {
            rows: 3,
            cols: 2,
            filter_rows: 1,
            filter_cols: 1,
            num_filters: 1,
            filters: vec![1.0],
            projection: vec![0.0; 6 * 4],
        };
        assert!(matches!(params.validate(4), Err(Error::Config(_))));
    }
}
