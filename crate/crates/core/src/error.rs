use thiserror::Error;

#[derive(Debug, Error)]
pub enum OtocError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{name} = {value} is out of the supported range {range}")]
    OutOfRange {
        name: &'static str,
        value: String,
        range: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a valid quantum state: {0}")]
    InvalidState(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("shadow does not match the estimator: {0}")]
    ShadowMismatch(String),

    #[error("not enough snapshots: need at least {needed}, got {got}")]
    NotEnoughSnapshots { needed: usize, got: usize },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, OtocError>;

pub(crate) fn out_of_range(
    name: &'static str,
    value: impl std::fmt::Display,
    range: &'static str,
) -> OtocError {
    OtocError::OutOfRange {
        name,
        value: value.to_string(),
        range,
    }
}
