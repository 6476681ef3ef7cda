use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("{path}: row {row}: {reason}")]
    MalformedRecord {
        path: String,
        row: u64,
        reason: String,
    },

    #[error("{0}: no records")]
    NoRecords(String),

    #[error("I/O error on {path}: {reason}")]
    Io { path: String, reason: String },

    #[error("direction mismatch: expected {expected} bound for {parameter}")]
    DirectionMismatch {
        parameter: String,
        expected: &'static str,
    },

    #[error("contradictory bounds: upper {upper:e} < lower {lower:e} at qualifying confidence")]
    ContradictoryBounds { upper: f64, lower: f64 },

    #[error("malformed argument tree: {0}")]
    MalformedTree(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Checks `0 < alpha < 1`.
pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("{alpha} is outside (0, 1)")))
    }
}
