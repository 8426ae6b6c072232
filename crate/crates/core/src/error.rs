use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("duplicate article id {0}")]
    DuplicateId(u64),

    #[error("duplicate normalized title {title:?} (ids {first} and {second})")]
    DuplicateTitle {
        title: String,
        first: u64,
        second: u64,
    },

    #[error("article id {0} not found")]
    UnknownArticle(u64),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty vocabulary after frequency filtering (min_freq = {0})")]
    EmptyVocabulary(usize),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("backward called before forward")]
    NoForwardPass,

    #[error("feature {name} = {value} is out of range; apply the fitted scaler first")]
    UnscaledFeature { name: &'static str, value: f64 },

    #[error("not enough negative candidates: {deficit} missing across {mains} main articles")]
    NegativeDeficit { deficit: usize, mains: usize },

    #[error("need at least {needed} positives for {needed}-fold splitting, found {found}")]
    TooFewPositives { needed: usize, found: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
