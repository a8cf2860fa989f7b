//! The explanation pipeline one stage at a time on Kinship: nearest
//! training triples, positive and negative pairs, the clause table and the
//! clause rankings of all three surrogates.
//!
//!     cargo run --release --example pipeline_steps -- [dataset-dir]

use anyhow::Result;
use kgx::clauses::{mine, MineConfig};
use kgx::config::DEFAULT_CLASS;
use kgx::graph::{KnowledgeGraph, SchemaMap};
use kgx::harness::select_test_points;
use kgx::model::{train, ModelKind, TrainConfig};
use kgx::neighbors::{build_pairs, knn, DEFAULT_K};
use kgx::surrogate::{rank_clauses, SurrogateMethod, SurrogateParams};

fn main() -> Result<()> {
    env_logger::init();
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kinship").into());
    let graph = KnowledgeGraph::load_dir(&dir)?;
    let schema = SchemaMap::uniform(&graph, DEFAULT_CLASS)?;
    let store = train(
        &graph,
        ModelKind::DistMult,
        &TrainConfig::for_model(ModelKind::DistMult),
    )?;
    let predicted = select_test_points(&store, &graph, 1)?[0];
    println!("prediction: {}", graph.display(&predicted));

    let neighbors = knn(&store, &graph, &predicted, DEFAULT_K)?;
    println!(
        "\n{} nearest training triples, closest five:",
        neighbors.entries.len()
    );
    for n in neighbors.entries.iter().take(5) {
        println!("  {:.3}  {}", n.distance, graph.display(&n.triple));
    }

    let pairs = build_pairs(&neighbors, predicted.relation, &graph, 0)?;
    println!(
        "\n{} positive and {} negative pairs for relation {}",
        pairs.positives.len(),
        pairs.negatives.len(),
        graph.relation_label(predicted.relation)
    );

    let table = mine(&pairs, &graph, &schema, &MineConfig::new(1));
    println!(
        "{} distinct clauses over {} rows",
        table.num_clauses(),
        table.rows.len()
    );

    for method in SurrogateMethod::ALL {
        let report = rank_clauses(
            &table,
            &pairs,
            &neighbors.query_embedding,
            Some(&store),
            &SurrogateParams::new(method),
        )?;
        println!("\n{} (sigma {:.3}):", method.as_str(), report.sigma);
        for s in report.ranking.iter().take(3) {
            println!(
                "  {:+.4}  {}",
                s.score,
                table.clauses[s.clause].display(&graph, &schema)
            );
        }
    }
    Ok(())
}
