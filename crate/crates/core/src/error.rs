use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rank-deficient input (smallest singular value {sigma_min:.3e}); polar factor is not unique")]
    RankDeficient { sigma_min: f64 },

    #[error("null measurement branch (probability {probability:.3e})")]
    NullBranch { probability: f64 },

    #[error("{0} requires the B factors of an oracle decomposition")]
    RequiresOracle(&'static str),

    #[error("dimension {dim} too large for exhaustive phase search (limit {limit})")]
    SearchTooLarge { dim: usize, limit: usize },

    #[error("factors are not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::NullBranch { .. }
                | Error::NotOrthonormal { .. }
                | Error::Numerical(_)
        )
    }
}
