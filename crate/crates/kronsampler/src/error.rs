use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped by how a caller should react: input validation,
/// resource guards, and numerical failures discovered during computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("index {index} out of range for universe of size {universe}")]
    IndexOutOfRange { index: usize, universe: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible budget {budget}: must lie in [{min}, {max}]")]
    InfeasibleBudget { budget: usize, min: usize, max: usize },

    #[error("resource guard exceeded: {needed} > cap {cap} ({hint})")]
    ResourceGuard { needed: u128, cap: u128, hint: String },

    #[error("mode {mode} is rank deficient: rank {rank} < {cols} columns")]
    SingularMode { mode: usize, rank: usize, cols: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code a CLI should use for this error:
    /// 2 validation, 3 resource guard, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch { .. }
            | Error::IndexOutOfRange { .. }
            | Error::InvalidInput(_)
            | Error::InfeasibleBudget { .. }
            | Error::Parse(_)
            | Error::Io(_) => 2,
            Error::ResourceGuard { .. } => 3,
            Error::SingularMode { .. } | Error::DegenerateInput(_) | Error::NonFinite(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
