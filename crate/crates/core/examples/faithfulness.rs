//! Remove-and-retrain faithfulness comparison on Kinship.
//!
//!     cargo run --release --example faithfulness -- [distmult|transe] [repetitions] [dataset-dir]
//!
//! Prints one summary row per method; lower post-ablation MRR means the
//! removed evidence mattered more to the model.

use anyhow::Result;
use kgx::explain::ExplainConfig;
use kgx::graph::{KnowledgeGraph, SchemaMap};
use kgx::harness::{
    run_protocol_multi, BuiltinMethod, ExplanationMethod, MethodKind, ProtocolConfig,
    ProtocolReport,
};
use kgx::model::ModelKind;
use kgx::surrogate::SurrogateMethod;

fn main() -> Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let model: ModelKind = args.next().unwrap_or_else(|| "distmult".into()).parse()?;
    let repetitions: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let dir = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kinship").into());

    let graph = KnowledgeGraph::load_dir(&dir)?;
    let schema = SchemaMap::uniform(&graph, kgx::config::DEFAULT_CLASS)?;
    let mut config = ProtocolConfig::new("kinship", model);
    config.repetitions = repetitions;

    let explain = ExplainConfig::new(SurrogateMethod::HsicLasso);
    let methods: Vec<BuiltinMethod> = [
        "mdi",
        "klasso",
        "hsic",
        "global-random",
        "local-random",
        "retraining",
        "incident-edges",
    ]
    .iter()
    .map(|tag| {
        Ok(BuiltinMethod::new(
            tag.parse::<MethodKind>()?,
            explain.clone(),
        ))
    })
    .collect::<Result<_>>()?;
    let refs: Vec<&dyn ExplanationMethod> = methods.iter().map(|m| m as _).collect();

    let reports = run_protocol_multi(&graph, &schema, &refs, &config)?;
    println!("{}", ProtocolReport::csv_header());
    for r in &reports {
        println!("{}", r.csv_row());
    }
    Ok(())
}
