//! Train TransE and DistMult on Kinship and report filtered validation metrics.
//!
//!     cargo run --release --example train_kinship -- [dataset-dir]

use std::time::Instant;

use anyhow::Result;
use kgx::graph::KnowledgeGraph;
use kgx::model::{evaluate_ranking, train, FilterIndex, ModelKind, TrainConfig};

fn main() -> Result<()> {
    env_logger::init();
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kinship").into());
    let graph = KnowledgeGraph::load_dir(&dir)?;
    let stats = graph.stats();
    println!(
        "{dir}: {} entities, {} relations, {}/{}/{} train/valid/test triples",
        stats.entities, stats.relations, stats.train, stats.valid, stats.test
    );
    let filter = FilterIndex::from_graph(&graph);
    for kind in [ModelKind::TransE, ModelKind::DistMult] {
        let config = TrainConfig::for_model(kind);
        let start = Instant::now();
        let store = train(&graph, kind, &config)?;
        let elapsed = start.elapsed().as_secs_f64();
        let m = evaluate_ranking(&store, graph.valid(), &filter)?;
        println!(
            "{kind:>8}: valid MRR {:.3}  Hits@1 {:.3}  ({elapsed:.1}s, {} epochs, d={})",
            m.mrr, m.hits_at_1, config.epochs, config.dimension
        );
    }
    Ok(())
}
