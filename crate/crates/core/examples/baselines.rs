//! The random-path baselines and the incident-edge removal set for one
//! Kinship triple.
//!
//!     cargo run --example baselines -- [dataset-dir] [path-length]

use anyhow::Result;
use kgx::graph::KnowledgeGraph;
use kgx::harness::{baseline_global_random, baseline_local_random, incident_edges};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kinship").into());
    let length: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2);
    let graph = KnowledgeGraph::load_dir(&dir)?;
    let predicted = graph.valid()[0];
    println!("prediction: {}", graph.display(&predicted));

    for seed in 0..3 {
        let global = baseline_global_random(&graph, &predicted, length, seed);
        let local = baseline_local_random(&graph, &predicted, length, seed);
        println!("\nseed {seed}");
        println!("  global random path:");
        for t in &global {
            println!("    {}", graph.display(t));
        }
        println!("  local random path (touches the predicted head or tail):");
        for t in &local {
            println!("    {}", graph.display(t));
        }
    }
    println!(
        "\n{} training triples touch the predicted head or tail",
        incident_edges(&graph, &predicted).len()
    );
    Ok(())
}
