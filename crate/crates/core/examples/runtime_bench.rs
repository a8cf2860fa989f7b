//! Time batches of explanations per surrogate without any retraining.
//!
//!     cargo run --release --example runtime_bench -- [transe|distmult] [runs] [explanations] [dataset-dir]

use anyhow::Result;
use kgx::config::DEFAULT_CLASS;
use kgx::explain::ExplainConfig;
use kgx::graph::{KnowledgeGraph, SchemaMap};
use kgx::harness::{runtime_bench, BuiltinMethod, ExplanationMethod, MethodKind};
use kgx::model::{train, ModelKind, TrainConfig};
use kgx::surrogate::SurrogateMethod;

fn main() -> Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let model: ModelKind = args.next().unwrap_or_else(|| "transe".into()).parse()?;
    let runs: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(40);
    let dir = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kinship").into());

    let graph = KnowledgeGraph::load_dir(&dir)?;
    let schema = SchemaMap::uniform(&graph, DEFAULT_CLASS)?;
    let store = train(&graph, model, &TrainConfig::for_model(model))?;
    let methods: Vec<BuiltinMethod> = SurrogateMethod::ALL
        .iter()
        .map(|&m| BuiltinMethod::new(MethodKind::Surrogate(m), ExplainConfig::new(m)))
        .collect();
    let refs: Vec<&dyn ExplanationMethod> = methods.iter().map(|m| m as _).collect();
    let triples: Vec<_> = graph.valid().iter().take(n).copied().collect();

    let report = runtime_bench("kinship", &graph, &store, &schema, &refs, &triples, runs, 0)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
