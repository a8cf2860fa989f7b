//! Run configuration: a flat `key = value` text format with `#` comments.
//!
//! Values are resolved as command-line flag > config file > default, where
//! defaults depend on the dataset name and the model kind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::explain::ExplainConfig;
use crate::harness::{Ablation, BuiltinMethod, MethodKind, ProtocolConfig};
use crate::model::{ModelKind, Optimizer, TrainConfig};
use crate::neighbors::DEFAULT_K;
use crate::surrogate::{NegativeWeighting, SurrogateMethod};

pub const DEFAULT_CLASS: &str = "Entity";

/// Default maximum walk length (and random baseline path length) per dataset.
pub fn default_walk_len(dataset: &str) -> usize {
    match dataset.to_ascii_lowercase().as_str() {
        "wn18rr" => 3,
        "fb15k-237" | "fb15k237" => 2,
        _ => 1,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub dataset: String,
    pub schema: Option<PathBuf>,
    pub default_class: String,
    pub model: ModelKind,
    pub train: TrainConfig,
    /// Pre-trained embeddings to use instead of training.
    pub embeddings: Option<PathBuf>,
    pub method: MethodKind,
    pub k: usize,
    pub max_walk_len: usize,
    pub walk_budget: usize,
    pub sigma: Option<f64>,
    pub beta: f64,
    pub lambda: f64,
    pub trees: usize,
    pub negative_weighting: NegativeWeighting,
    pub top_clauses: usize,
    pub grounding_limit: usize,
    pub test_points: usize,
    pub repetitions: usize,
    pub ablation: Ablation,
    pub record_timings: bool,
    pub bench_runs: usize,
    pub bench_explanations: usize,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn defaults(dataset_dir: impl Into<PathBuf>, model: ModelKind) -> Self {
        let dataset_dir = dataset_dir.into();
        let dataset = dataset_dir
            .file_name()
            .map(|n| n.to_string_lossy().to_ascii_lowercase())
            .unwrap_or_else(|| "dataset".into());
        let x = default_walk_len(&dataset);
        let explain = ExplainConfig::new(SurrogateMethod::HsicLasso);
        Self {
            dataset_dir,
            schema: None,
            default_class: DEFAULT_CLASS.into(),
            model,
            train: TrainConfig::for_model(model),
            embeddings: None,
            method: MethodKind::Surrogate(SurrogateMethod::HsicLasso),
            k: DEFAULT_K,
            max_walk_len: x,
            walk_budget: explain.walk_budget,
            sigma: None,
            beta: explain.surrogate.ridge_beta,
            lambda: explain.surrogate.hsic.lambda,
            trees: explain.surrogate.forest.trees,
            negative_weighting: explain.surrogate.negative_weighting,
            top_clauses: explain.top_clauses,
            grounding_limit: explain.grounding_limit,
            test_points: 30,
            repetitions: 5,
            ablation: Ablation::Pooled,
            record_timings: true,
            bench_runs: 10,
            bench_explanations: 40,
            seed: 1,
            jobs: 0,
            out: PathBuf::from("out").join(&dataset),
            dataset,
        }
    }

    /// Merges `file` (if any) and then `overrides` over the defaults.
    pub fn resolve(file: Option<&Path>, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let mut entries = match file {
            Some(path) => parse_file(path)?,
            None => BTreeMap::new(),
        };
        entries.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
        Self::from_entries(&entries)
    }

    pub fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self> {
        let dir = entries
            .get("dataset_dir")
            .ok_or_else(|| Error::Config("dataset_dir is required".into()))?;
        let model = match entries.get("model") {
            Some(m) => m.parse()?,
            None => ModelKind::DistMult,
        };
        let mut c = Self::defaults(dir, model);
        // The dataset name decides defaults, so it goes first.
        if let Some(name) = entries.get("dataset") {
            c.dataset = name.to_ascii_lowercase();
            c.max_walk_len = default_walk_len(&c.dataset);
            c.out = PathBuf::from("out").join(&c.dataset);
        }
        for (key, value) in entries {
            c.set(key, value)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
        }
        let t = &mut self.train;
        match key {
            "dataset_dir" | "model" | "dataset" => {}
            "schema" => self.schema = (!value.is_empty()).then(|| value.into()),
            "default_class" => self.default_class = value.into(),
            "embeddings" => self.embeddings = (!value.is_empty()).then(|| value.into()),
            "dimension" => t.dimension = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "learning_rate" => t.learning_rate = num(key, value)?,
            "margin" => t.margin = num(key, value)?,
            "negatives" => t.negatives = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "regularization" => t.regularization = num(key, value)?,
            "optimizer" => {
                t.optimizer = match value {
                    "sgd" => Optimizer::Sgd,
                    "adagrad" => Optimizer::Adagrad,
                    _ => return Err(Error::Config(format!("optimizer: unknown `{value}`"))),
                }
            }
            "method" => self.method = value.parse()?,
            "k" => self.k = num(key, value)?,
            "max_walk_len" => self.max_walk_len = num(key, value)?,
            "walk_budget" => self.walk_budget = num(key, value)?,
            "sigma" => {
                self.sigma = match value {
                    "median" => None,
                    v => Some(num(key, v)?),
                }
            }
            "beta" => self.beta = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "trees" => self.trees = num(key, value)?,
            "negative_weighting" => {
                self.negative_weighting = match value {
                    "inherit" => NegativeWeighting::Inherit,
                    "embed" => NegativeWeighting::Embed,
                    _ => {
                        return Err(Error::Config(format!(
                            "negative_weighting: unknown `{value}`"
                        )))
                    }
                }
            }
            "top_clauses" => self.top_clauses = num(key, value)?,
            "grounding_limit" => self.grounding_limit = num(key, value)?,
            "test_points" => self.test_points = num(key, value)?,
            "repetitions" => self.repetitions = num(key, value)?,
            "ablation" => {
                self.ablation = match value {
                    "pooled" => Ablation::Pooled,
                    "per-triple" => Ablation::PerTriple,
                    _ => return Err(Error::Config(format!("ablation: unknown `{value}`"))),
                }
            }
            "record_timings" => self.record_timings = num(key, value)?,
            "bench_runs" => self.bench_runs = num(key, value)?,
            "bench_explanations" => self.bench_explanations = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "jobs" => self.jobs = num(key, value)?,
            "out" => self.out = value.into(),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.max_walk_len == 0 {
            return Err(Error::Config("k and max_walk_len must be positive".into()));
        }
        if !(self.beta >= 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::Config("beta and lambda must be >= 0".into()));
        }
        if matches!(self.sigma, Some(s) if !(s > 0.0)) {
            return Err(Error::Config("sigma must be positive or `median`".into()));
        }
        self.train.validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Explanation settings; `method` overrides the surrogate if given.
    pub fn explain_config(&self, method: Option<SurrogateMethod>) -> ExplainConfig {
        let method = method.unwrap_or(match self.method {
            MethodKind::Surrogate(m) => m,
            _ => SurrogateMethod::HsicLasso,
        });
        let mut c = ExplainConfig::new(method);
        c.k = self.k;
        c.max_walk_len = self.max_walk_len;
        c.walk_budget = self.walk_budget;
        c.top_clauses = self.top_clauses;
        c.grounding_limit = self.grounding_limit;
        c.seed = self.seed;
        c.surrogate.sigma = self.sigma;
        c.surrogate.ridge_beta = self.beta;
        c.surrogate.hsic.lambda = self.lambda;
        c.surrogate.forest.trees = self.trees;
        c.surrogate.negative_weighting = self.negative_weighting;
        c
    }

    pub fn builtin_method(&self, kind: &MethodKind) -> BuiltinMethod {
        let mut m = BuiltinMethod::new(kind.clone(), self.explain_config(None));
        m.path_length = self.max_walk_len;
        m
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        let mut p = ProtocolConfig::new(&self.dataset, self.model);
        p.train = self.train.clone();
        p.test_points = self.test_points;
        p.repetitions = self.repetitions;
        p.ablation = self.ablation;
        p.seed = self.seed;
        p.record_timings = self.record_timings;
        p
    }

    /// Every key with its resolved value, in a fixed order; parses back to `self`.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let opt = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let entries: Vec<(&str, String)> = vec![
            ("dataset_dir", self.dataset_dir.display().to_string()),
            ("dataset", self.dataset.clone()),
            ("schema", opt(&self.schema)),
            ("default_class", self.default_class.clone()),
            ("model", self.model.to_string()),
            ("embeddings", opt(&self.embeddings)),
            ("dimension", t.dimension.to_string()),
            ("epochs", t.epochs.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("margin", t.margin.to_string()),
            ("negatives", t.negatives.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("regularization", t.regularization.to_string()),
            (
                "optimizer",
                match t.optimizer {
                    Optimizer::Sgd => "sgd".into(),
                    Optimizer::Adagrad => "adagrad".into(),
                },
            ),
            ("method", self.method.tag()),
            ("k", self.k.to_string()),
            ("max_walk_len", self.max_walk_len.to_string()),
            ("walk_budget", self.walk_budget.to_string()),
            (
                "sigma",
                self.sigma.map_or("median".into(), |s| s.to_string()),
            ),
            ("beta", self.beta.to_string()),
            ("lambda", self.lambda.to_string()),
            ("trees", self.trees.to_string()),
            (
                "negative_weighting",
                match self.negative_weighting {
                    NegativeWeighting::Inherit => "inherit".into(),
                    NegativeWeighting::Embed => "embed".into(),
                },
            ),
            ("top_clauses", self.top_clauses.to_string()),
            ("grounding_limit", self.grounding_limit.to_string()),
            ("test_points", self.test_points.to_string()),
            ("repetitions", self.repetitions.to_string()),
            (
                "ablation",
                match self.ablation {
                    Ablation::Pooled => "pooled".into(),
                    Ablation::PerTriple => "per-triple".into(),
                },
            ),
            ("record_timings", self.record_timings.to_string()),
            ("bench_runs", self.bench_runs.to_string()),
            ("bench_explanations", self.bench_explanations.to_string()),
            ("seed", self.seed.to_string()),
            ("jobs", self.jobs.to_string()),
            ("out", self.out.display().to_string()),
        ];
        let mut s = String::from("# resolved configuration\n");
        for (k, v) in entries {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    /// Writes the resolved configuration to `<out>/<name>`.
    pub fn write_snapshot(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        let path = self.out.join(name);
        std::fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_config(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        out.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(out)
}

pub fn parse_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}
