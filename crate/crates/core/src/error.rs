use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("action {action} is infeasible at stage {stage} in endogenous state {state}")]
    Infeasible { stage: usize, state: usize, action: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch { context: String, expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("enumeration of {what} needs {needed} entries, above the cap of {cap}")]
    SizeCap { what: String, needed: u128, cap: u128 },

    #[error("stage {stage}: regression has {rows} rows but needs at least {required}")]
    Regression { stage: usize, rows: usize, required: usize },

    #[error("component {0} has an empty action family")]
    EmptyFamily(usize),

    #[error("non-finite value at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },

    #[error("oracle failed at iteration {iteration}: {detail}")]
    Oracle { iteration: usize, detail: String },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
