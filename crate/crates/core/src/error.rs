use thiserror::Error;

use crate::arch::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {}", join_violations(.0))]
    InvalidNetwork(Vec<Violation>),

    #[error("invalid layer {index}: {reason}")]
    InvalidLayer { index: usize, reason: String },

    #[error("operator cannot be applied at layer {layer}: {reason}")]
    InvalidOperator { layer: usize, reason: String },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("accuracy profile has no entry for layer {layer}, group {group}")]
    ProfileIncomplete { layer: usize, group: usize },

    #[error("malformed encoding: {0}")]
    MalformedEncoding(String),

    #[error("no feasible candidate")]
    NoFeasibleCandidate,

    #[error("search space holds {count} combinations, above the cap of {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("unsupported format_version {0}")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input data (as opposed to I/O).
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
