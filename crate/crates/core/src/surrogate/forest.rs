//! Random forest with instance-weighted Gini impurity and mean decrease in
//! impurity (MDI) feature importance.
//!
//! The importance of a clause is the mean over trees of
//! `sum over nodes split on it of dGini * N_node / N_root`, with `N` the
//! weighted sample mass, multiplied by the clause's gamma. Some write-ups
//! state the score as `1 - (...)`; ranking by the accumulated term with the
//! gamma sign gives the same order without the arbitrary constant.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::seed::mix;

use super::{gamma, DesignMatrix, SurrogateMethod, SurrogateReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub bootstrap: bool,
    /// Features examined per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 50,
            bootstrap: true,
            max_features: None,
            max_depth: None,
            seed: 0,
        }
    }
}

/// Gini impurity of a node holding `pos` and `neg` weighted mass.
pub fn weighted_gini(pos: f64, neg: f64) -> f64 {
    let total = pos + neg;
    if total <= 0.0 {
        return 0.0;
    }
    let (p, q) = (pos / total, neg / total);
    1.0 - p * p - q * q
}

struct Tree<'a> {
    m: &'a DesignMatrix,
    weights: Vec<f64>,
    max_features: usize,
    max_depth: usize,
    root_mass: f64,
    importance: Vec<f64>,
    rng: ChaCha8Rng,
}

struct Split {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl Tree<'_> {
    fn mass(&self, samples: &[usize]) -> (f64, f64) {
        let mut pos = 0.0;
        let mut neg = 0.0;
        for &i in samples {
            if self.m.y[i] > 0.0 {
                pos += self.weights[i];
            } else {
                neg += self.weights[i];
            }
        }
        (pos, neg)
    }

    fn best_split_on(
        &self,
        samples: &[usize],
        feature: usize,
        parent: f64,
        total: f64,
    ) -> Option<Split> {
        let mut sorted: Vec<(f64, usize)> = samples
            .iter()
            .map(|&i| (self.m.get(i, feature), i))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted.first()?.0 == sorted.last()?.0 {
            return None;
        }
        let (all_pos, all_neg) = self.mass(samples);
        let (mut lp, mut ln) = (0.0, 0.0);
        let mut best: Option<Split> = None;
        for k in 0..sorted.len() - 1 {
            let (v, i) = sorted[k];
            if self.m.y[i] > 0.0 {
                lp += self.weights[i];
            } else {
                ln += self.weights[i];
            }
            let next = sorted[k + 1].0;
            if next == v {
                continue;
            }
            let (rp, rn) = (all_pos - lp, all_neg - ln);
            let (wl, wr) = (lp + ln, rp + rn);
            let decrease = parent
                - (wl / total) * weighted_gini(lp, ln)
                - (wr / total) * weighted_gini(rp, rn);
            if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                best = Some(Split {
                    feature,
                    threshold: 0.5 * (v + next),
                    decrease,
                });
            }
        }
        best
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize) {
        let (pos, neg) = self.mass(&samples);
        let total = pos + neg;
        let parent = weighted_gini(pos, neg);
        if parent <= 0.0 || samples.len() < 2 || depth >= self.max_depth {
            return;
        }
        let mut features: Vec<usize> = (0..self.m.cols).collect();
        features.shuffle(&mut self.rng);
        let mut examined = 0;
        let mut best: Option<Split> = None;
        for f in features {
            if examined >= self.max_features {
                break;
            }
            let Some(s) = self.best_split_on(&samples, f, parent, total) else {
                continue;
            };
            examined += 1;
            let better = match &best {
                None => true,
                Some(b) => {
                    s.decrease > b.decrease || (s.decrease == b.decrease && s.feature < b.feature)
                }
            };
            if better {
                best = Some(s);
            }
        }
        let Some(split) = best else { return };
        self.importance[split.feature] += split.decrease.max(0.0) * total / self.root_mass;
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| self.m.get(i, split.feature) <= split.threshold);
        self.grow(left, depth + 1);
        self.grow(right, depth + 1);
    }
}

/// Unsigned per-feature MDI, averaged over trees.
pub fn mdi_importance(matrix: &DesignMatrix, config: &ForestConfig) -> Vec<f64> {
    let d = matrix.cols;
    if d == 0 || matrix.rows == 0 || config.trees == 0 {
        return vec![0.0; d];
    }
    let order = matrix.canonical_order();
    let max_features = config
        .max_features
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let per_tree: Vec<Vec<f64>> = (0..config.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, t as u64));
            let mut weights = vec![0.0; matrix.rows];
            if config.bootstrap {
                for _ in 0..matrix.rows {
                    let i = order[rng.random_range(0..matrix.rows)];
                    weights[i] += matrix.alpha[i];
                }
            } else {
                weights.copy_from_slice(&matrix.alpha);
            }
            let samples: Vec<usize> = order
                .iter()
                .copied()
                .filter(|&i| weights[i] > 0.0)
                .collect();
            let root_mass: f64 = samples.iter().map(|&i| weights[i]).sum();
            let mut tree = Tree {
                m: matrix,
                weights,
                max_features,
                max_depth: config.max_depth.unwrap_or(usize::MAX),
                root_mass,
                importance: vec![0.0; d],
                rng,
            };
            tree.grow(samples, 0);
            tree.importance
        })
        .collect();
    let mut mean = vec![0.0; d];
    for imp in &per_tree {
        for (m, v) in mean.iter_mut().zip(imp) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= config.trees as f64);
    mean
}

pub fn fit_mdi(matrix: &DesignMatrix, config: &ForestConfig) -> Result<SurrogateReport> {
    matrix.check_labels()?;
    let importance = mdi_importance(matrix, config);
    let gammas: Vec<f64> = (0..matrix.cols).map(|c| gamma(matrix, c)).collect();
    let scores: Vec<f64> = importance.iter().zip(&gammas).map(|(i, g)| i * g).collect();
    Ok(SurrogateReport::from_scores(
        SurrogateMethod::Mdi,
        matrix,
        &scores,
        &gammas,
    ))
}
