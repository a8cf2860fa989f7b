use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("class `{0}` is reserved for anchor roles and cannot be assigned")]
    ReservedClass(String),

    #[error("triple ({0}) is not in the training split")]
    NotInTrain(String),

    #[error("missing embedding for {0}")]
    MissingEmbedding(String),

    #[error("embedding dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("unknown model kind `{0}`")]
    UnknownModelKind(String),

    #[error("training is not supported for {0}; import trained parameters with import_embeddings")]
    UnsupportedTrainer(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty training split")]
    EmptyTrainSplit,

    #[error("no neighbour pair is connected by relation `{relation}` (k = {k}); increase k")]
    EmptyPositiveSet { relation: String, k: usize },

    #[error("could not sample a corruption for ({0}) within the retry cap")]
    CorruptionExhausted(String),

    #[error("surrogate needs both positive and negative rows")]
    DegenerateLabels,

    #[error("ridge system is singular; use a ridge strength beta > 0")]
    SingularSystem,

    #[error("only {available} validation triples reach rank 1 in both directions, {requested} requested")]
    NotEnoughTestPoints { requested: usize, available: usize },

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Configuration problems map to CLI exit code 1, everything else to 2.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::UnknownModelKind(_)
                | Error::UnknownMethod(_)
                | Error::UnsupportedTrainer(_)
                | Error::SingularSystem
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
