//! Surrogate models that rank mined clauses by how well they separate the
//! positive from the negative pairs of a latent neighbourhood.

mod forest;
mod hsic;
mod ridge;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clauses::{ClauseTable, PairLabel};
use crate::error::{Error, Result};
use crate::graph::Triple;
use crate::model::EmbeddingStore;
use crate::neighbors::{euclidean, PairSets};

pub use forest::{fit_mdi, ForestConfig};
pub use hsic::{fit_hsic_lasso, HsicConfig};
pub use ridge::{fit_klasso, ridge_solve};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurrogateMethod {
    #[serde(rename = "mdi")]
    Mdi,
    #[serde(rename = "klasso")]
    KLasso,
    #[serde(rename = "hsic")]
    HsicLasso,
}

impl SurrogateMethod {
    pub const ALL: [SurrogateMethod; 3] = [Self::Mdi, Self::KLasso, Self::HsicLasso];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Mdi => "mdi",
            Self::KLasso => "klasso",
            Self::HsicLasso => "hsic",
        }
    }
}

impl fmt::Display for SurrogateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurrogateMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mdi" => Ok(Self::Mdi),
            "klasso" | "k-lasso" => Ok(Self::KLasso),
            "hsic" | "hsic-lasso" => Ok(Self::HsicLasso),
            _ => Err(Error::UnknownMethod(s.to_owned())),
        }
    }
}

/// How negative rows get an instance weight.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeWeighting {
    /// Reuse the weight of the positive pair the negative was corrupted from.
    Inherit,
    /// Embed the corrupted triple through the model and weight it directly.
    Embed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub method: SurrogateMethod,
    /// Kernel width; `None` uses the median pairwise row-embedding distance.
    pub sigma: Option<f64>,
    pub ridge_beta: f64,
    pub hsic: HsicConfig,
    pub forest: ForestConfig,
    pub negative_weighting: NegativeWeighting,
}

impl SurrogateParams {
    pub fn new(method: SurrogateMethod) -> Self {
        Self {
            method,
            sigma: None,
            ridge_beta: 0.01,
            hsic: HsicConfig::default(),
            forest: ForestConfig::default(),
            negative_weighting: NegativeWeighting::Inherit,
        }
    }
}

/// `exp(-|v_p - v_i|^2 / sigma^2)`.
pub fn kernel_weight(v_p: &[f64], v_i: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!(
            "kernel width must be positive, got {sigma}"
        )));
    }
    let d = euclidean(v_p, v_i);
    Ok((-(d * d) / (sigma * sigma)).exp().max(f64::MIN_POSITIVE))
}

/// Median of all pairwise distances; 1 when there are fewer than two
/// distinct points.
pub fn median_pairwise_distance(points: &[&[f64]]) -> f64 {
    let mut d = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(euclidean(points[i], points[j]));
        }
    }
    d.retain(|&x| x > 0.0);
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    }
}

/// Weighted tabular view of a clause table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols` clause frequencies.
    pub x: Vec<f64>,
    /// +1 for positive pairs, -1 for negative pairs.
    pub y: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sigma: f64,
    /// Column keys, ascending.
    pub keys: Vec<String>,
}

impl DesignMatrix {
    pub fn new(x: Vec<f64>, y: Vec<f64>, alpha: Vec<f64>, keys: Vec<String>) -> Result<Self> {
        let rows = y.len();
        let cols = keys.len();
        if x.len() != rows * cols || alpha.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: x.len(),
                context: "design matrix".into(),
            });
        }
        Ok(Self {
            rows,
            cols,
            x,
            y,
            alpha,
            sigma: 1.0,
            keys,
        })
    }

    /// Builds the matrix for `table`, weighting each row by its distance to
    /// `query` (the embedding of the predicted triple).
    pub fn assemble(
        table: &ClauseTable,
        pairs: &PairSets,
        query: &[f64],
        store: Option<&EmbeddingStore>,
        params: &SurrogateParams,
    ) -> Result<Self> {
        let embeddings: Vec<Vec<f64>> = table
            .rows
            .iter()
            .map(|row| match (row.label, params.negative_weighting, store) {
                (PairLabel::Negative, NegativeWeighting::Embed, Some(store)) => {
                    store.triple_embedding(&Triple::new(row.head, table.relation, row.tail))
                }
                (PairLabel::Negative, NegativeWeighting::Embed, None) => Err(Error::Config(
                    "negative weighting `embed` needs the embedding store".into(),
                )),
                _ => Ok(pairs.positives[row.origin].embedding.clone()),
            })
            .collect::<Result<_>>()?;
        let sigma = match params.sigma {
            Some(s) => s,
            None => {
                let refs: Vec<&[f64]> = embeddings.iter().map(Vec::as_slice).collect();
                median_pairwise_distance(&refs)
            }
        };
        let alpha = embeddings
            .iter()
            .map(|v| kernel_weight(query, v, sigma))
            .collect::<Result<Vec<_>>>()?;
        let mut m = Self::new(table.dense(), table.labels(), alpha, table.keys.clone())?;
        m.sigma = sigma;
        Ok(m)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    fn check_labels(&self) -> Result<()> {
        let pos = self.y.iter().filter(|&&y| y > 0.0).count();
        if pos == 0 || pos == self.rows {
            return Err(Error::DegenerateLabels);
        }
        Ok(())
    }

    /// Row indices sorted by content, so that downstream randomness does not
    /// depend on the order rows were supplied in.
    pub(crate) fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.rows).collect();
        idx.sort_by(|&a, &b| {
            self.y[a]
                .total_cmp(&self.y[b])
                .then(self.alpha[a].total_cmp(&self.alpha[b]))
                .then_with(|| {
                    self.row(a)
                        .iter()
                        .zip(self.row(b))
                        .map(|(p, q)| p.total_cmp(q))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        });
        idx
    }
}

/// +1 when the clause is at least as frequent among positive rows as among
/// negative rows, else -1.
pub fn gamma(matrix: &DesignMatrix, clause: usize) -> f64 {
    let (mut pos, mut neg) = (0.0, 0.0);
    for i in 0..matrix.rows {
        if matrix.y[i] > 0.0 {
            pos += matrix.get(i, clause);
        } else {
            neg += matrix.get(i, clause);
        }
    }
    if pos >= neg {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClauseScore {
    /// Column index into the clause vocabulary.
    pub clause: usize,
    pub key: String,
    pub score: f64,
    pub gamma: f64,
    /// 1-based position in the ranking.
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    pub method: SurrogateMethod,
    /// Every vocabulary clause once, best first.
    pub ranking: Vec<ClauseScore>,
    pub sigma: f64,
    /// False when an iterative fit hit its iteration cap.
    pub converged: bool,
    /// K-Lasso only: clause indices by descending `|w|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnitude_ranking: Option<Vec<usize>>,
}

impl SurrogateReport {
    pub(crate) fn from_scores(
        method: SurrogateMethod,
        matrix: &DesignMatrix,
        scores: &[f64],
        gammas: &[f64],
    ) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then(matrix.keys[a].cmp(&matrix.keys[b]))
        });
        let ranking = order
            .into_iter()
            .enumerate()
            .map(|(pos, c)| ClauseScore {
                clause: c,
                key: matrix.keys[c].clone(),
                score: scores[c],
                gamma: gammas[c],
                rank: pos + 1,
            })
            .collect();
        Self {
            method,
            ranking,
            sigma: matrix.sigma,
            converged: true,
            magnitude_ranking: None,
        }
    }

    pub fn score_of(&self, key: &str) -> Option<f64> {
        self.ranking.iter().find(|s| s.key == key).map(|s| s.score)
    }
}

pub fn fit(matrix: &DesignMatrix, params: &SurrogateParams) -> Result<SurrogateReport> {
    match params.method {
        SurrogateMethod::Mdi => fit_mdi(matrix, &params.forest),
        SurrogateMethod::KLasso => fit_klasso(matrix, params.ridge_beta),
        SurrogateMethod::HsicLasso => fit_hsic_lasso(matrix, &params.hsic),
    }
}

/// Assembles the design matrix for `table` and fits the chosen surrogate.
pub fn rank_clauses(
    table: &ClauseTable,
    pairs: &PairSets,
    query: &[f64],
    store: Option<&EmbeddingStore>,
    params: &SurrogateParams,
) -> Result<SurrogateReport> {
    let matrix = DesignMatrix::assemble(table, pairs, query, store, params)?;
    matrix.check_labels()?;
    fit(&matrix, params)
}
