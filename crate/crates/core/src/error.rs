use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {context}: {detail}")]
    Domain { context: &'static str, detail: String },

    #[error("domain error at row {row}: {detail}")]
    RowDomain { row: usize, detail: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{block} design matrix is rank deficient (rank {rank} < {expected})")]
    RankDeficient {
        block: &'static str,
        rank: usize,
        expected: usize,
    },

    #[error("not identifiable: {0}")]
    Identifiability(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("fit did not converge after {iterations} iterations (score norm {score_norm:e})")]
    NonConvergence { iterations: usize, score_norm: f64 },

    #[error("line search could not stay inside the parameter domain")]
    DomainEscape,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no bootstrap replicate converged ({attempted} attempted)")]
    AllReplicatesFailed { attempted: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(context: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        context,
        detail: detail.into(),
    }
}
