//! Generate the synthetic WordNet-like taxonomy, explain the
//! `_hypernym(family_Treponemataceae, bacteria_family)` prediction with
//! three-edge clauses and run a one-repetition protocol on a few triples.
//!
//!     cargo run --release --example wordnet_smoke -- [test-points]

use anyhow::Result;
use kgx::explain::{ExplainConfig, Explainer};
use kgx::fixtures::{synthetic_wordnet, WordNetConfig};
use kgx::harness::{
    run_protocol_multi, BuiltinMethod, ExplanationMethod, MethodKind, ProtocolConfig,
    ProtocolReport,
};
use kgx::model::{train, ModelKind, TrainConfig};
use kgx::surrogate::SurrogateMethod;

fn main() -> Result<()> {
    env_logger::init();
    let n: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(10);
    let wn = synthetic_wordnet(&WordNetConfig::default());
    let s = wn.graph.stats();
    println!(
        "{} entities, {} relations, {}/{}/{} triples",
        s.entities, s.relations, s.train, s.valid, s.test
    );

    let store = train(
        &wn.graph,
        ModelKind::DistMult,
        &TrainConfig::for_model(ModelKind::DistMult),
    )?;
    let mut explain = ExplainConfig::new(SurrogateMethod::HsicLasso);
    explain.max_walk_len = 3;
    let target = wn
        .graph
        .triple("family_Treponemataceae", "_hypernym", "bacteria_family")?;
    let e = Explainer::new(&wn.graph, &store, &wn.schema, explain.clone())?.explain(&target)?;
    print!("{}", e.to_text(&wn.graph, &wn.schema));

    let mut config = ProtocolConfig::new("wn18rr-synthetic", ModelKind::DistMult);
    config.repetitions = 1;
    config.test_points = n;
    let methods: Vec<BuiltinMethod> = ["hsic", "local-random"]
        .iter()
        .map(|t| {
            Ok(BuiltinMethod::new(
                t.parse::<MethodKind>()?,
                explain.clone(),
            ))
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&dyn ExplanationMethod> = methods.iter().map(|m| m as _).collect();
    println!("\n{}", ProtocolReport::csv_header());
    for r in run_protocol_multi(&wn.graph, &wn.schema, &refs, &config)? {
        println!("{}", r.csv_row());
    }
    Ok(())
}
