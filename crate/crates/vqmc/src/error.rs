//! Crate-wide error type.

use crate::markov::VqmcVerdict;
use crate::sdp::SdpStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian: ‖M − M†‖_F = {violation:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { violation: f64, tol: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {min_eig:.3e} below −{tol:.3e}")]
    NotPositiveSemidefinite { min_eig: f64, tol: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown state name `{0}`")]
    UnknownState(String),

    #[error(
        "state is not virtually recoverable: rank(Rec_B) = {} ≠ rank(Rec_BC) = {}",
        .verdict.rank_b, .verdict.rank_bc
    )]
    NotRecoverable { verdict: VqmcVerdict },

    #[error("SDP solve ended with status {status:?} (gap {gap:.3e})")]
    SolverFailure { status: SdpStatus, gap: f64 },

    #[error("SDP is infeasible: {0}")]
    Infeasible(String),

    #[error("Born probability {p:.6e} outside [0, 1] beyond tolerance {tol:.1e}")]
    BornProbability { p: f64, tol: f64 },

    #[error("linear algebra backend error: {0}")]
    Backend(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
