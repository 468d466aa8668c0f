//! Semidefinite programming layer: a self-contained interior-point solver
//! plus the concrete optimization problems of this crate (virtual recovery
//! sampling overhead, approximate recoverability, additivity checks).

pub mod problems;
pub mod solver;

pub use problems::{
    additivity_check, approx_recoverability, sampling_overhead, AdditivityReport, ApproxMode,
    ApproxResult,
    OverheadResult,
};
pub use solver::{
    linear_inconsistency, solve, Constraint, SdpOptions, SdpProblem, SdpSolution, SdpStatus,
    SparseSym,
};
