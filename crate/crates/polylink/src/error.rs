use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("entity key '{key}' already interned as {existing:?}, requested {requested:?}")]
    KindConflict {
        key: String,
        existing: crate::kg::EntityKind,
        requested: crate::kg::EntityKind,
    },

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: u64, msg: String },

    #[error("negative pool exhausted for relation '{relation}': need {needed}, only {available} available")]
    Exhausted {
        relation: String,
        needed: usize,
        available: usize,
    },

    #[error("no embedding for entity {0}")]
    MissingEmbedding(String),

    #[error("no weights for relation {0}")]
    MissingRelation(String),

    #[error("feature index {index} out of range (dimension {dim})")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value during {0}; training diverged")]
    NonFinite(String),

    #[error("degenerate metric input: {0}")]
    Degenerate(String),

    #[error("pair ({0}, {1}) is not in the candidate set")]
    UnknownPair(String, String),

    #[error("unknown entity key '{0}'")]
    UnknownEntity(String),

    #[error("unknown relation key '{0}'")]
    UnknownRelation(String),

    #[error("missing prerequisite artifact {}; run `{produced_by}` first", artifact.display())]
    MissingArtifact { artifact: PathBuf, produced_by: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code class for the CLI: 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFinite(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
