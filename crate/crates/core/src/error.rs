use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension `{name}`: {reason}")]
    InvalidDimension { name: String, reason: String },

    #[error("level {level} out of range for dimension `{dim}` ({levels} levels)")]
    InvalidState {
        dim: String,
        level: usize,
        levels: usize,
    },

    #[error("state index {index} out of range (state count {count})")]
    InvalidStateIndex { index: usize, count: usize },

    #[error("action index {index} out of range (action count {count})")]
    InvalidActionIndex { index: usize, count: usize },

    #[error("delta {delta} in dimension {dim} must be -1, 0 or +1")]
    InvalidActionDelta { dim: usize, delta: i64 },

    #[error("dimension count mismatch: grid has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("reference surrogate requires a 4-dimensional (C, T, pH, t) grid, got {got} dimensions")]
    SurrogateArity { got: usize },

    #[error("prediction table missing {missing} of {total} grid states (first missing: {first})")]
    IncompleteTable {
        missing: usize,
        total: usize,
        first: String,
    },

    #[error("prediction table has no row for state {state}")]
    TableMiss { state: String },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("grid fingerprint mismatch: expected {expected}, file has {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("hyperparameter {name}={value} out of range {range}")]
    InvalidHyperparameter {
        name: &'static str,
        value: String,
        range: &'static str,
    },

    #[error("non-finite Q-value detected after episode {episode}")]
    NonFiniteQ { episode: usize },

    #[error("predictor failed at episode {episode}, step {step}: {source}")]
    TrainingAborted {
        episode: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
