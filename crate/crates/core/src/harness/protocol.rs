//! Remove-and-retrain protocol.
//!
//! Per repetition: train on D, select the test points P, let each method
//! propose removal sets, retrain on D minus the removed triples and evaluate
//! P again with the filter of the unaltered graph.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, SchemaMap, Split, Triple};
use crate::model::{
    evaluate_ranking, train, FilterIndex, ModelKind, RankMetrics, TrainConfig, TripleRanks,
};
use crate::seed::mix;

use super::{bench::mean_std, select_test_points, ExplanationMethod, MethodContext};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// One retrain per method and repetition on D minus the union of all sets.
    Pooled,
    /// One retrain per distinct removal set; each triple is evaluated on its own.
    PerTriple,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub dataset: String,
    pub model: ModelKind,
    /// Shared by the original training and every retrain; only the seed varies.
    pub train: TrainConfig,
    pub test_points: usize,
    pub repetitions: usize,
    pub ablation: Ablation,
    pub seed: u64,
    /// Wall-clock timings make reports differ between otherwise identical runs.
    pub record_timings: bool,
}

impl ProtocolConfig {
    pub fn new(dataset: impl Into<String>, model: ModelKind) -> Self {
        Self {
            dataset: dataset.into(),
            model,
            train: TrainConfig::for_model(model),
            test_points: 30,
            repetitions: 5,
            ablation: Ablation::Pooled,
            seed: 0,
            record_timings: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.test_points == 0 || self.repetitions == 0 {
            return Err(Error::Config(
                "test_points and repetitions must be positive".into(),
            ));
        }
        self.train.validate()
    }

    /// Seeds of repetition `r`: original training, every retrain, explanations.
    pub fn seeds(&self, r: usize) -> RunSeeds {
        let base = mix(self.seed, r as u64);
        RunSeeds {
            train: mix(base, 1),
            retrain: mix(base, 2),
            explain: mix(base, 3),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub train: u64,
    pub retrain: u64,
    pub explain: u64,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeconds {
    pub train: f64,
    pub explain: f64,
    pub retrain: f64,
    pub eval: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleFailure {
    pub triple: Triple,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub repetition: usize,
    pub seeds: RunSeeds,
    pub selected: Vec<Triple>,
    /// Removal set per selected triple; empty for failed triples.
    pub removal_sets: Vec<BTreeSet<Triple>>,
    pub pre: RankMetrics,
    pub post: RankMetrics,
    /// Size of the union of all removal sets.
    pub removed: usize,
    pub failures: Vec<TripleFailure>,
    pub filter_fingerprint_pre: String,
    pub filter_fingerprint_post: String,
    pub seconds: Option<PhaseSeconds>,
}

impl ProtocolRun {
    pub fn removal_union(&self) -> BTreeSet<Triple> {
        self.removal_sets.iter().flatten().copied().collect()
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mrr_pre: f64,
    pub hits1_pre: f64,
    pub mrr_post: f64,
    pub hits1_post: f64,
    pub removed: f64,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricSummary,
    /// Sample standard deviation (0 for a single run).
    pub std: MetricSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub dataset: String,
    pub model: ModelKind,
    pub method: String,
    pub ablation: Ablation,
    pub runs: Vec<ProtocolRun>,
    pub aggregate: Aggregate,
}

impl ProtocolReport {
    fn new(config: &ProtocolConfig, method: String, runs: Vec<ProtocolRun>) -> Self {
        let column = |f: fn(&ProtocolRun) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
        let cols = [
            column(|r| r.pre.mrr),
            column(|r| r.pre.hits_at_1),
            column(|r| r.post.mrr),
            column(|r| r.post.hits_at_1),
            column(|r| r.removed as f64),
        ];
        let pick = |i: usize| MetricSummary {
            mrr_pre: if i == 0 { cols[0].0 } else { cols[0].1 },
            hits1_pre: if i == 0 { cols[1].0 } else { cols[1].1 },
            mrr_post: if i == 0 { cols[2].0 } else { cols[2].1 },
            hits1_post: if i == 0 { cols[3].0 } else { cols[3].1 },
            removed: if i == 0 { cols[4].0 } else { cols[4].1 },
        };
        Self {
            dataset: config.dataset.clone(),
            model: config.model,
            method,
            ablation: config.ablation,
            aggregate: Aggregate {
                mean: pick(0),
                std: pick(1),
            },
            runs,
        }
    }

    /// True if some method call failed on some triple.
    pub fn partial(&self) -> bool {
        self.runs.iter().any(|r| !r.failures.is_empty())
    }

    /// Report with entity and relation labels in place of interned ids.
    pub fn to_json(&self, graph: &KnowledgeGraph) -> serde_json::Value {
        let label = |t: &Triple| json!(graph.labels_of(t));
        let runs: Vec<_> = self
            .runs
            .iter()
            .map(|r| {
                let mut run = json!({
                    "repetition": r.repetition,
                    "seeds": r.seeds,
                    "mrr_pre": r.pre.mrr,
                    "hits1_pre": r.pre.hits_at_1,
                    "mrr_post": r.post.mrr,
                    "hits1_post": r.post.hits_at_1,
                    "removed": r.removed,
                    "filter_fingerprint_pre": r.filter_fingerprint_pre,
                    "filter_fingerprint_post": r.filter_fingerprint_post,
                    "triples": r.selected.iter().enumerate().map(|(i, t)| {
                        let ranks = |m: &RankMetrics| m.per_triple().get(i).copied();
                        json!({
                            "triple": label(t),
                            "removal_set": r.removal_sets[i].iter().map(label).collect::<Vec<_>>(),
                            "ranks_pre": ranks(&r.pre),
                            "ranks_post": ranks(&r.post),
                        })
                    }).collect::<Vec<_>>(),
                    "failures": r.failures.iter().map(|f| json!({
                        "triple": label(&f.triple),
                        "error": f.error,
                    })).collect::<Vec<_>>(),
                });
                if let Some(s) = r.seconds {
                    run["seconds"] = json!(s);
                }
                run
            })
            .collect();
        json!({
            "dataset": self.dataset,
            "model": self.model,
            "method": self.method,
            "ablation": self.ablation,
            "partial": self.partial(),
            "runs": runs,
            "aggregate": self.aggregate,
        })
    }

    pub fn csv_header() -> &'static str {
        "dataset,model,method,runs,mrr_post_mean,mrr_post_std,hits1_post_mean,hits1_post_std,removed_mean,partial"
    }

    pub fn csv_row(&self) -> String {
        let a = &self.aggregate;
        format!(
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.1},{}",
            self.dataset,
            self.model,
            self.method,
            self.runs.len(),
            a.mean.mrr_post,
            a.std.mrr_post,
            a.mean.hits1_post,
            a.std.hits1_post,
            a.mean.removed,
            self.partial()
        )
    }
}

/// Runs the protocol for one method.
pub fn run_protocol(
    graph: &KnowledgeGraph,
    schema: &SchemaMap,
    method: &dyn ExplanationMethod,
    config: &ProtocolConfig,
) -> Result<ProtocolReport> {
    Ok(run_protocol_multi(graph, schema, &[method], config)?
        .pop()
        .expect("one report per method"))
}

/// Runs the protocol for several methods that share, per repetition, the
/// original model, the test points and the retrain seed.
pub fn run_protocol_multi(
    graph: &KnowledgeGraph,
    schema: &SchemaMap,
    methods: &[&dyn ExplanationMethod],
    config: &ProtocolConfig,
) -> Result<Vec<ProtocolReport>> {
    config.validate()?;
    let filter = FilterIndex::from_graph(graph);
    let per_rep: Vec<Vec<ProtocolRun>> = (0..config.repetitions)
        .into_par_iter()
        .map(|r| run_repetition(graph, schema, methods, config, &filter, r))
        .collect::<Result<_>>()?;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let runs = per_rep.iter().map(|runs| runs[m].clone()).collect();
            ProtocolReport::new(config, method.tag(), runs)
        })
        .collect())
}

fn run_repetition(
    graph: &KnowledgeGraph,
    schema: &SchemaMap,
    methods: &[&dyn ExplanationMethod],
    config: &ProtocolConfig,
    filter: &FilterIndex,
    repetition: usize,
) -> Result<Vec<ProtocolRun>> {
    let seeds = config.seeds(repetition);
    let clock = Instant::now();
    let store = train(
        graph,
        config.model,
        &TrainConfig {
            seed: seeds.train,
            ..config.train.clone()
        },
    )?;
    let train_secs = clock.elapsed().as_secs_f64();

    let selected = select_test_points(&store, graph, config.test_points)?;
    let pre = evaluate_ranking(&store, &selected, filter)?;
    log::info!(
        "repetition {repetition}: original model MRR {:.3} on {} test points",
        pre.mrr,
        selected.len()
    );
    let retrain_config = TrainConfig {
        seed: seeds.retrain,
        ..config.train.clone()
    };
    let ctx = MethodContext {
        graph,
        store: &store,
        schema,
        seed: seeds.explain,
    };

    methods
        .iter()
        .map(|method| {
            let clock = Instant::now();
            let proposed = method.removal_sets(&ctx, &selected)?;
            let explain_secs = clock.elapsed().as_secs_f64();

            let mut failures = Vec::new();
            let removal_sets: Vec<BTreeSet<Triple>> = selected
                .iter()
                .zip(proposed)
                .map(|(t, set)| match set {
                    Ok(set) => match set.iter().find(|e| !graph.contains_in(e, Split::Train)) {
                        None => set,
                        Some(bad) => {
                            failures.push(TripleFailure {
                                triple: *t,
                                error: Error::NotInTrain(graph.display(bad).to_string())
                                    .to_string(),
                            });
                            BTreeSet::new()
                        }
                    },
                    Err(e) => {
                        log::warn!("{} failed on ({}): {e}", method.tag(), graph.display(t));
                        failures.push(TripleFailure {
                            triple: *t,
                            error: e.to_string(),
                        });
                        BTreeSet::new()
                    }
                })
                .collect();

            let (post, retrain_secs, eval_secs) = match config.ablation {
                Ablation::Pooled => {
                    let union: BTreeSet<Triple> = removal_sets.iter().flatten().copied().collect();
                    let clock = Instant::now();
                    let ablated = graph.remove_triples(&union)?;
                    let model = train(&ablated, config.model, &retrain_config)?;
                    let retrain_secs = clock.elapsed().as_secs_f64();
                    let clock = Instant::now();
                    let post = evaluate_ranking(&model, &selected, filter)?;
                    (post, retrain_secs, clock.elapsed().as_secs_f64())
                }
                Ablation::PerTriple => {
                    let mut groups: BTreeMap<&BTreeSet<Triple>, Vec<usize>> = BTreeMap::new();
                    for (i, set) in removal_sets.iter().enumerate() {
                        groups.entry(set).or_default().push(i);
                    }
                    let mut ranks = vec![TripleRanks { head: 0, tail: 0 }; selected.len()];
                    let (mut retrain_secs, mut eval_secs) = (0.0, 0.0);
                    for (set, idx) in groups {
                        let clock = Instant::now();
                        let model =
                            train(&graph.remove_triples(set)?, config.model, &retrain_config)?;
                        retrain_secs += clock.elapsed().as_secs_f64();
                        let clock = Instant::now();
                        let eval: Vec<Triple> = idx.iter().map(|&i| selected[i]).collect();
                        let m = evaluate_ranking(&model, &eval, filter)?;
                        for (&i, r) in idx.iter().zip(m.per_triple()) {
                            ranks[i] = r;
                        }
                        eval_secs += clock.elapsed().as_secs_f64();
                    }
                    let flat = ranks.iter().flat_map(|r| [r.head, r.tail]).collect();
                    (RankMetrics::from_ranks(flat), retrain_secs, eval_secs)
                }
            };
            // The filter must come from the unaltered graph.
            let post_fingerprint = FilterIndex::from_graph(graph).fingerprint().to_owned();
            let removed = removal_sets.iter().flatten().collect::<BTreeSet<_>>().len();
            log::info!(
                "repetition {repetition}: {} removed {removed} triples, post MRR {:.3}",
                method.tag(),
                post.mrr
            );
            Ok(ProtocolRun {
                repetition,
                seeds,
                selected: selected.clone(),
                removal_sets,
                pre: pre.clone(),
                post,
                removed,
                failures,
                filter_fingerprint_pre: filter.fingerprint().to_owned(),
                filter_fingerprint_post: post_fingerprint,
                seconds: config.record_timings.then_some(PhaseSeconds {
                    train: train_secs,
                    explain: explain_secs,
                    retrain: retrain_secs,
                    eval: eval_secs,
                }),
            })
        })
        .collect()
}
