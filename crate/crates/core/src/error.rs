use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mode index {mode} is out of range for a space with {count} modes")]
    InvalidMode { mode: usize, count: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("projection has zero probability (herald impossible)")]
    ZeroProbability,

    #[error("truncation leakage {leakage:.3e} exceeds {tolerance:.1e} of the trace; raise the Fock cutoff")]
    TruncationLeakage { leakage: f64, tolerance: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("normal matrix is singular")]
    SingularMatrix,

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("integration unstable: {0}")]
    Unstable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(name, reason))
    }
}
