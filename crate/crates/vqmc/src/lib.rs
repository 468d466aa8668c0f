//! Numerical toolkit for virtual quantum Markov chains (VQMCs).
//!
//! A tripartite state ρ_ABC is a *quantum Markov chain* (QMC) when a quantum
//! channel acting on B alone can rebuild ρ_ABC from ρ_AB; it is a *virtual*
//! quantum Markov chain when a Hermitian-preserving trace-preserving map — a
//! real-linear combination of channels — suffices. Virtual recovery restores
//! every measurement expectation value tr(Oρ_ABC) through quasiprobability
//! sampling, at a cost quantified by the sampling overhead γ = c₁ + c₂.
//!
//! The crate provides:
//! - [`markov`]: the block-matrix criterion deciding whether a state is a
//!   VQMC (kernel inclusion ker Rec_B ⊆ ker Rec_BC, tested via rank equality).
//! - [`recovery`]: construction of virtual recovery maps, a closed-form Choi
//!   matrix for generalized W states, and the Petz recovery channel.
//! - [`sdp`]: a self-contained interior-point SDP solver plus the two
//!   optimization problems of the theory — the optimal sampling overhead and
//!   the approximate virtual recoverability.
//! - [`sampling`]: a simulator for the quasiprobability recovery protocol
//!   with Hoeffding shot budgeting.
//! - [`analysis`]: entropies, conditional mutual information, fidelity, and
//!   the Fawzi–Renner inequality check.
//! - [`states`], [`numerics`], [`cli`]: state constructors, dense complex
//!   linear algebra, and the command-line front end.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod markov;
pub mod numerics;
pub mod recovery;
pub mod sampling;
pub mod sdp;
pub mod states;

pub use error::{Error, Result};
