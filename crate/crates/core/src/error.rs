use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("expected {expected} values for the partition, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("functions live on different partitions")]
    PartitionMismatch,
    #[error("window index {index} out of range ({count} windows)")]
    InvalidWindow { index: usize, count: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("family is empty")]
    EmptyFamily,
    #[error("degenerate body: diameter is zero")]
    Degenerate,
    #[error("resolution exhausted: effective depth {depth} already equals storage depth")]
    ResolutionExhausted { depth: u32 },
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("no sampled pair satisfies the separation threshold")]
    NoQualifyingPair,
    #[error("no sampled pair of distinct points")]
    NoValidPair,
    #[error("linear program failed: {0}")]
    Solver(String),
    #[error("malformed document: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
