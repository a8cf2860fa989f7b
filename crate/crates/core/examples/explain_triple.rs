//! Train a model on a dataset and explain one of its predictions.
//!
//!     cargo run --release --example explain_triple -- [dataset-dir] [head relation tail] [method]
//!
//! Without a triple, the best-scoring validation triple is explained.

use anyhow::Result;
use kgx::explain::{ExplainConfig, Explainer};
use kgx::graph::{KnowledgeGraph, SchemaMap};
use kgx::harness::select_test_points;
use kgx::model::{train, ModelKind, TrainConfig};
use kgx::surrogate::SurrogateMethod;

fn main() -> Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = args
        .first()
        .cloned()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kinship").into());
    let graph = KnowledgeGraph::load_dir(&dir)?;
    let schema = SchemaMap::uniform(&graph, kgx::config::DEFAULT_CLASS)?;
    let store = train(
        &graph,
        ModelKind::DistMult,
        &TrainConfig::for_model(ModelKind::DistMult),
    )?;

    let predicted = match args.get(1..4) {
        Some([h, r, t]) => graph.triple(h, r, t)?,
        _ => select_test_points(&store, &graph, 1)?[0],
    };
    let method: SurrogateMethod = args.get(4).map_or("hsic", String::as_str).parse()?;

    let explainer = Explainer::new(&graph, &store, &schema, ExplainConfig::new(method))?;
    let explanation = explainer.explain(&predicted)?;
    print!("{}", explanation.to_text(&graph, &schema));
    println!("removal set: {} triples", explanation.removal_set().len());
    Ok(())
}
