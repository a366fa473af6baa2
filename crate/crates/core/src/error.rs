use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite feature value at index {index}")]
    NonFinite { index: usize },

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("underdetermined fit: {rows} records for {params} coefficients (need at least {})", params + 1)]
    Underdetermined { rows: usize, params: usize },

    #[error("rank-deficient design matrix; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("ill-conditioned design matrix (condition estimate {estimate:.3e})")]
    IllConditioned { estimate: f64 },

    #[error("energy provider unavailable: {0}")]
    ProviderUnavailable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad caller input rather than a runtime fault.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::DimensionMismatch { .. }
                | Error::NonFinite { .. }
                | Error::DegenerateDataset(_)
                | Error::Underdetermined { .. }
                | Error::RankDeficient { .. }
                | Error::IllConditioned { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
