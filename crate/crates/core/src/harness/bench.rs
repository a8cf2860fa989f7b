//! Wall-clock benchmark of explanation methods (no retraining involved).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{KnowledgeGraph, SchemaMap, Triple};
use crate::model::EmbeddingStore;

use super::{ExplanationMethod, MethodContext};

/// Mean and sample standard deviation; the deviation is 0 for fewer than two values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: String,
    pub seconds: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dataset: String,
    pub model: String,
    pub explanations: usize,
    pub runs: usize,
    pub methods: Vec<MethodTiming>,
}

/// Times `runs` batches of explanations for `triples` under every method.
#[allow(clippy::too_many_arguments)]
pub fn runtime_bench(
    dataset: &str,
    graph: &KnowledgeGraph,
    store: &EmbeddingStore,
    schema: &SchemaMap,
    methods: &[&dyn ExplanationMethod],
    triples: &[Triple],
    runs: usize,
    seed: u64,
) -> Result<BenchReport> {
    let ctx = MethodContext {
        graph,
        store,
        schema,
        seed,
    };
    let mut timings = Vec::with_capacity(methods.len());
    for method in methods {
        let mut seconds = Vec::with_capacity(runs);
        let mut failures = 0;
        for _ in 0..runs {
            let clock = Instant::now();
            let sets = method.removal_sets(&ctx, triples)?;
            seconds.push(clock.elapsed().as_secs_f64());
            failures = sets.iter().filter(|s| s.is_err()).count();
        }
        let (mean, std) = mean_std(&seconds);
        log::info!(
            "{}: {mean:.3} s +- {std:.3} per batch of {}",
            method.tag(),
            triples.len()
        );
        timings.push(MethodTiming {
            method: method.tag(),
            seconds,
            mean,
            std,
            failures,
        });
    }
    Ok(BenchReport {
        dataset: dataset.to_owned(),
        model: store.kind().to_string(),
        explanations: triples.len(),
        runs,
        methods: timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_statistics() {
        assert_eq!(mean_std(&[2.5]), (2.5, 0.0));
        assert_eq!(mean_std(&[1.0, 1.0, 1.0]), (1.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
