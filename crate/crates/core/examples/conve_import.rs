//! ConvE models are not trained here; their weights are imported. This
//! writes a randomly initialised ConvE in the embedding file format,
//! reads it back and explains one prediction with it.
//!
//!     cargo run --release --example conve_import -- [dataset-dir]

use anyhow::Result;
use kgx::config::DEFAULT_CLASS;
use kgx::explain::{ExplainConfig, Explainer};
use kgx::graph::{KnowledgeGraph, SchemaMap};
use kgx::model::{
    default_reshape, evaluate_ranking, export_embeddings, import_embeddings, ConvEParams,
    EmbeddingStore, FilterIndex, ModelKind,
};
use kgx::surrogate::SurrogateMethod;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kinship").into());
    let graph = KnowledgeGraph::load_dir(&dir)?;
    let schema = SchemaMap::uniform(&graph, DEFAULT_CLASS)?;

    let dim = 16;
    let (rows, cols) = default_reshape(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.3..0.3)).collect() };
    let mut params = ConvEParams {
        rows,
        cols,
        filter_rows: 3,
        filter_cols: 3,
        num_filters: 4,
        filters: draw(4 * 9),
        projection: Vec::new(),
    };
    params.projection = draw(params.feature_len() * dim);
    let store = EmbeddingStore::new(
        ModelKind::ConvE,
        dim,
        draw(graph.num_entities() * dim),
        draw(graph.num_relations() * dim),
        Some(params),
    )?;

    let file = tempfile::NamedTempFile::new()?;
    export_embeddings(&store, &graph, file.path())?;
    let imported = import_embeddings(file.path(), &graph)?;
    assert_eq!(imported, store);
    println!(
        "round-tripped a {dim}-d ConvE ({rows}x{cols} reshape) through {}",
        file.path().display()
    );

    let m = evaluate_ranking(&imported, graph.valid(), &FilterIndex::from_graph(&graph))?;
    println!("untrained valid MRR {:.3} (chance level)", m.mrr);

    let explainer = Explainer::new(
        &graph,
        &imported,
        &schema,
        ExplainConfig::new(SurrogateMethod::KLasso),
    )?;
    let e = explainer.explain(&graph.valid()[0])?;
    print!("{}", e.to_text(&graph, &schema));
    Ok(())
}
