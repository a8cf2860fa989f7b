//! Command-line entry point: train, explain, evaluate, bench.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error. Errors are
//! printed to stderr as a single `error kind=<config|data> message="..."` line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kgx::config::RunConfig;
use kgx::explain::Explainer;
use kgx::graph::{KnowledgeGraph, SchemaMap, Triple};
use kgx::harness::{
    run_protocol_multi, runtime_bench, ExplanationMethod, MethodKind, ProtocolReport,
};
use kgx::model::{
    evaluate_ranking, export_embeddings, import_embeddings, train, EmbeddingStore, FilterIndex,
};

#[derive(Parser)]
#[command(
    name = "kgx",
    version,
    about = "Explain knowledge graph embedding predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write its embeddings.
    Train(Common),
    /// Explain one triple or every triple of a file.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Triple as `head relation tail` (whitespace or tab separated).
        #[arg(long, conflicts_with = "triples")]
        triple: Option<String>,
        /// File with one tab-separated triple per line.
        #[arg(long)]
        triples: Option<PathBuf>,
    },
    /// Run the remove-and-retrain protocol.
    Evaluate(Common),
    /// Time explanation batches.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// One method, or a comma-separated list for evaluate and bench.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_walk_len: Option<usize>,
    #[arg(long)]
    top_clauses: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Config(String),
    Data(String),
}

impl Common {
    /// Resolves the configuration; a list-valued `--method` is returned apart.
    fn resolve(&self) -> Result<(RunConfig, Vec<String>), Failure> {
        let mut flags = BTreeMap::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            flags.insert(k.trim().to_owned(), v.trim().to_owned());
        }
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.insert(k.to_owned(), v);
            }
        };
        put(
            "dataset_dir",
            self.dataset_dir.as_ref().map(|p| p.display().to_string()),
        );
        put("model", self.model.clone());
        put("k", self.k.map(|v| v.to_string()));
        put("max_walk_len", self.max_walk_len.map(|v| v.to_string()));
        put("top_clauses", self.top_clauses.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("jobs", self.jobs.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        let methods: Vec<String> = self
            .method
            .as_deref()
            .map(|m| m.split(',').map(|s| s.trim().to_owned()).collect())
            .unwrap_or_default();
        if let Some(first) = methods.first() {
            flags.insert("method".into(), first.clone());
        }
        for m in &methods {
            m.parse::<MethodKind>()
                .map_err(|e| Failure::Config(e.to_string()))?;
        }
        let config = RunConfig::resolve(self.config.as_deref(), &flags).map_err(classify)?;
        Ok((config, methods))
    }
}

fn classify(e: kgx::Error) -> Failure {
    classify_ref(&e)
}

fn classify_ref(e: &kgx::Error) -> Failure {
    if e.is_config() {
        Failure::Config(e.to_string())
    } else {
        Failure::Data(e.to_string())
    }
}

fn data(e: anyhow::Error) -> Failure {
    match e.downcast_ref::<kgx::Error>() {
        Some(inner) => classify_ref(inner),
        None => Failure::Data(format!("{e:#}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return report(Failure::Config(
                first.trim_start_matches("error: ").to_owned(),
            ));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    let (kind, msg, code) = match f {
        Failure::Config(m) => ("config", m, 1),
        Failure::Data(m) => ("data", m, 2),
    };
    eprintln!(
        "error kind={kind} message={}",
        serde_json::to_string(&msg).unwrap_or_default()
    );
    ExitCode::from(code)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, which) = match &cli.command {
        Command::Train(c) => (c, "train"),
        Command::Explain { common, .. } => (common, "explain"),
        Command::Evaluate(c) => (c, "evaluate"),
        Command::Bench(c) => (c, "bench"),
    };
    let (config, methods) = common.resolve()?;
    if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    config
        .write_snapshot(&format!("{which}.config"))
        .map_err(classify)?;
    let result = match cli.command {
        Command::Train(_) => cmd_train(&config),
        Command::Explain {
            triple, triples, ..
        } => cmd_explain(&config, triple, triples),
        Command::Evaluate(_) => cmd_evaluate(&config, &methods),
        Command::Bench(_) => cmd_bench(&config, &methods),
    };
    result.map_err(data)
}

fn load(config: &RunConfig) -> Result<(KnowledgeGraph, SchemaMap)> {
    let graph = KnowledgeGraph::load_dir(&config.dataset_dir)?;
    let schema = SchemaMap::load(config.schema.as_deref(), &graph, &config.default_class)?;
    let s = graph.stats();
    log::info!(
        "{}: {} entities, {} relations, {}/{}/{} triples",
        config.dataset,
        s.entities,
        s.relations,
        s.train,
        s.valid,
        s.test
    );
    Ok((graph, schema))
}

/// Imports configured embeddings, or trains from scratch.
fn model(config: &RunConfig, graph: &KnowledgeGraph) -> Result<EmbeddingStore> {
    let default = config.out.join("embeddings.tsv");
    let path = config
        .embeddings
        .clone()
        .or_else(|| default.exists().then_some(default));
    match path {
        Some(p) => {
            log::info!("importing embeddings from {}", p.display());
            let store = import_embeddings(&p, graph)?;
            if store.kind() != config.model {
                anyhow::bail!(kgx::Error::Config(format!(
                    "{} holds {} embeddings but model = {}",
                    p.display(),
                    store.kind(),
                    config.model
                )));
            }
            Ok(store)
        }
        None => {
            log::info!("training {}", config.model);
            Ok(train(graph, config.model, &config.train_config())?)
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_train(config: &RunConfig) -> Result<()> {
    let (graph, _) = load(config)?;
    let store = train(&graph, config.model, &config.train_config())?;
    let path = config.out.join("embeddings.tsv");
    export_embeddings(&store, &graph, &path)?;
    let filter = FilterIndex::from_graph(&graph);
    let valid = evaluate_ranking(&store, graph.valid(), &filter)?;
    let metrics = serde_json::json!({
        "model": config.model,
        "valid": {"mrr": valid.mrr, "hits1": valid.hits_at_1, "triples": graph.valid().len()},
    });
    write_json(&config.out.join("train_metrics.json"), &metrics)?;
    log::info!(
        "valid MRR {:.4}, Hits@1 {:.4}; wrote {}",
        valid.mrr,
        valid.hits_at_1,
        path.display()
    );
    Ok(())
}

fn read_triples(
    graph: &KnowledgeGraph,
    one: Option<String>,
    file: Option<PathBuf>,
) -> Result<Vec<Triple>> {
    if let Some(t) = one {
        return Ok(vec![graph.parse_triple(&t)?]);
    }
    let path =
        file.ok_or_else(|| kgx::Error::Config("explain needs --triple or --triples".into()))?;
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(graph.parse_triple(l)?))
        .collect()
}

fn cmd_explain(config: &RunConfig, one: Option<String>, file: Option<PathBuf>) -> Result<()> {
    let (graph, schema) = load(config)?;
    let predicted = read_triples(&graph, one, file)?;
    let store = model(config, &graph)?;
    let explainer = Explainer::new(&graph, &store, &schema, config.explain_config(None))?;
    let mut json = Vec::new();
    let mut text = String::new();
    for (i, result) in explainer.explain_all(&predicted).into_iter().enumerate() {
        let e = result?;
        json.push(e.to_json(&graph, &schema));
        text.push_str(&e.to_text(&graph, &schema));
        text.push('\n');
        let dot = config.out.join(format!("explanation_{i}.dot"));
        fs::write(&dot, e.to_dot(&graph)).with_context(|| format!("writing {}", dot.display()))?;
    }
    write_json(&config.out.join("explanations.json"), &json)?;
    fs::write(config.out.join("explanations.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn method_list(
    config: &RunConfig,
    methods: &[String],
    fallback: &[&str],
) -> Result<Vec<MethodKind>> {
    if methods.is_empty() {
        if fallback.is_empty() {
            return Ok(vec![config.method.clone()]);
        }
        return fallback.iter().map(|m| Ok(m.parse()?)).collect();
    }
    methods.iter().map(|m| Ok(m.parse()?)).collect()
}

fn cmd_evaluate(config: &RunConfig, methods: &[String]) -> Result<()> {
    let (graph, schema) = load(config)?;
    let kinds = method_list(config, methods, &[])?;
    let built: Vec<_> = kinds.iter().map(|k| config.builtin_method(k)).collect();
    let refs: Vec<&dyn ExplanationMethod> = built.iter().map(|m| m as _).collect();
    let reports = run_protocol_multi(&graph, &schema, &refs, &config.protocol_config())?;
    let mut csv = String::from(ProtocolReport::csv_header());
    csv.push('\n');
    for r in &reports {
        write_json(
            &config.out.join(format!("protocol_{}.json", r.method)),
            &r.to_json(&graph),
        )?;
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    fs::write(config.out.join("summary.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_bench(config: &RunConfig, methods: &[String]) -> Result<()> {
    let (graph, schema) = load(config)?;
    let store = model(config, &graph)?;
    let kinds = method_list(config, methods, &["mdi", "klasso", "hsic"])?;
    let built: Vec<_> = kinds.iter().map(|k| config.builtin_method(k)).collect();
    let refs: Vec<&dyn ExplanationMethod> = built.iter().map(|m| m as _).collect();
    let triples: Vec<Triple> = graph
        .valid()
        .iter()
        .take(config.bench_explanations)
        .copied()
        .collect();
    let report = runtime_bench(
        &config.dataset,
        &graph,
        &store,
        &schema,
        &refs,
        &triples,
        config.bench_runs,
        config.seed,
    )?;
    write_json(&config.out.join("bench.json"), &report)?;
    for m in &report.methods {
        println!("{}\t{:.3}\t{:.3}", m.method, m.mean, m.std);
    }
    Ok(())
}
