//! Faithfulness evaluation: remove what an explanation points at, retrain,
//! and measure how much worse the model gets at the explained predictions.

mod baselines;
mod bench;
mod protocol;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{ExplainConfig, Explainer};
use crate::graph::{KnowledgeGraph, SchemaMap, Triple};
use crate::model::{EmbeddingStore, FilterIndex};
use crate::surrogate::SurrogateMethod;

pub use baselines::{baseline_global_random, baseline_local_random, incident_edges};
pub use bench::{mean_std, runtime_bench, BenchReport, MethodTiming};
pub use protocol::{
    run_protocol, run_protocol_multi, Ablation, Aggregate, MetricSummary, PhaseSeconds,
    ProtocolConfig, ProtocolReport, ProtocolRun, TripleFailure,
};

/// What a removal method sees: the training graph and the model trained on it.
pub struct MethodContext<'a> {
    pub graph: &'a KnowledgeGraph,
    pub store: &'a EmbeddingStore,
    pub schema: &'a SchemaMap,
    pub seed: u64,
}

/// Anything that proposes, per predicted triple, a set of train triples to
/// remove. New explanation methods plug into the protocol through this.
///
/// The outer error aborts the method; inner errors are recorded per triple.
pub trait ExplanationMethod: Sync {
    fn tag(&self) -> String;

    fn removal_sets(
        &self,
        ctx: &MethodContext<'_>,
        predicted: &[Triple],
    ) -> Result<Vec<Result<BTreeSet<Triple>>>>;
}

/// Built-in methods, selectable by tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MethodKind {
    Surrogate(SurrogateMethod),
    GlobalRandom,
    LocalRandom,
    /// Empty removal set: measures retraining noise alone.
    Retraining,
    /// All edges incident to the predicted head and tail (diagnostic bound).
    IncidentEdges,
}

impl MethodKind {
    pub fn tag(&self) -> String {
        match self {
            MethodKind::Surrogate(m) => m.as_str().to_owned(),
            MethodKind::GlobalRandom => "global-random".into(),
            MethodKind::LocalRandom => "local-random".into(),
            MethodKind::Retraining => "retraining".into(),
            MethodKind::IncidentEdges => "incident-edges".into(),
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global-random" => Ok(Self::GlobalRandom),
            "local-random" => Ok(Self::LocalRandom),
            "retraining" => Ok(Self::Retraining),
            "incident-edges" => Ok(Self::IncidentEdges),
            other => other.parse().map(Self::Surrogate),
        }
    }
}

/// A built-in method with its parameters.
#[derive(Clone, Debug)]
pub struct BuiltinMethod {
    pub kind: MethodKind,
    /// Used by the surrogate methods.
    pub explain: ExplainConfig,
    /// Path length of the random baselines.
    pub path_length: usize,
}

impl BuiltinMethod {
    pub fn new(kind: MethodKind, explain: ExplainConfig) -> Self {
        let path_length = explain.max_walk_len;
        Self {
            kind,
            explain,
            path_length,
        }
    }
}

impl ExplanationMethod for BuiltinMethod {
    fn tag(&self) -> String {
        self.kind.tag()
    }

    fn removal_sets(
        &self,
        ctx: &MethodContext<'_>,
        predicted: &[Triple],
    ) -> Result<Vec<Result<BTreeSet<Triple>>>> {
        Ok(match &self.kind {
            MethodKind::Surrogate(method) => {
                let mut config = self.explain.clone();
                config.surrogate.method = *method;
                config.seed = ctx.seed;
                Explainer::new(ctx.graph, ctx.store, ctx.schema, config)?
                    .explain_all(predicted)
                    .into_iter()
                    .map(|r| r.map(|e| e.removal_set()))
                    .collect()
            }
            MethodKind::GlobalRandom => predicted
                .iter()
                .map(|t| {
                    Ok(baseline_global_random(
                        ctx.graph,
                        t,
                        self.path_length,
                        ctx.seed,
                    ))
                })
                .collect(),
            MethodKind::LocalRandom => predicted
                .iter()
                .map(|t| {
                    Ok(baseline_local_random(
                        ctx.graph,
                        t,
                        self.path_length,
                        ctx.seed,
                    ))
                })
                .collect(),
            MethodKind::Retraining => predicted.iter().map(|_| Ok(BTreeSet::new())).collect(),
            MethodKind::IncidentEdges => predicted
                .iter()
                .map(|t| Ok(incident_edges(ctx.graph, t)))
                .collect(),
        })
    }
}

/// `n` validation triples ranked first on both sides, largest score margin
/// over the best unfiltered competitor first.
pub fn select_test_points(
    store: &EmbeddingStore,
    graph: &KnowledgeGraph,
    n: usize,
) -> Result<Vec<Triple>> {
    let filter = FilterIndex::from_graph(graph);
    let margins: Vec<Option<(f64, Triple)>> = graph
        .valid()
        .par_iter()
        .map(|t| -> Result<Option<(f64, Triple)>> {
            let tails = store.score_tails(t.head, t.relation)?;
            let heads = store.score_heads(t.relation, t.tail)?;
            let best_other = |scores: &[f64], target: usize, known: &[crate::graph::EntityId]| {
                scores
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != target && !known.iter().any(|e| e.index() == i))
                    .map(|(_, &v)| v)
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            // Margins use the same score vectors the ranking does.
            let m_tail = tails[t.tail.index()]
                - best_other(
                    &tails,
                    t.tail.index(),
                    filter.known_tails(t.head, t.relation),
                );
            let m_head = heads[t.head.index()]
                - best_other(
                    &heads,
                    t.head.index(),
                    filter.known_heads(t.relation, t.tail),
                );
            let margin = m_tail.min(m_head);
            // A strictly positive margin on both sides is exactly rank 1
            // under pessimistic tie handling.
            Ok((margin > 0.0).then_some((margin, *t)))
        })
        .collect::<Result<_>>()?;
    let mut qualifying: Vec<(f64, Triple)> = margins.into_iter().flatten().collect();
    if qualifying.len() < n {
        return Err(Error::NotEnoughTestPoints {
            requested: n,
            available: qualifying.len(),
        });
    }
    qualifying.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(qualifying.into_iter().take(n).map(|(_, t)| t).collect())
}
