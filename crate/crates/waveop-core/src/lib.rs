//! Numerical toolkit for radial Schrödinger operators −Δ + V on R^m in even
//! dimensions m ≥ 6.
//!
//! The crate discretizes radial functions on a uniform grid in (0, rmax],
//! reduces rotation-invariant integral kernels to one-dimensional kernels in
//! (r, s), and builds on that base:
//!
//! * the free resolvent at low energy, its threshold expansion, and the
//!   associated remainder operators ([`resolvent`]);
//! * threshold spectral analysis of −Δ + V — bound states, zero-energy
//!   resonances, and the projections attached to them ([`spectral`]);
//! * inversion of the perturbed operator 1 + G₀(λ)V near λ = 0, including
//!   the singular λ⁻² structure in the exceptional case ([`inversion`]);
//! * wave operators assembled three ways: Born series, stationary formula,
//!   and time-dependent propagator products ([`waveop`]);
//! * dispersive L^p decay measurements of e^{−itH}P_c ([`dispersive`]);
//! * the one-dimensional harmonic-analysis layer (oscillatory kernels,
//!   Hilbert transform, maximal function, power-weighted L^p probes) that
//!   controls the low-energy part ([`harmonic`]).
//!
//! Everything is deterministic: fixed summation orders, fixed quadrature
//! panels, and no randomness outside the test suites.

// Validation guards use `!(x > 0.0)` deliberately: the negation rejects NaN
// along with the out-of-range values, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cutoff;
pub mod dispersive;
pub mod grid;
pub mod harmonic;
pub mod inversion;
pub mod kernel;
pub mod linalg;
pub mod quad;
pub mod resolvent;
pub mod special;
pub mod spectral;
pub mod waveop;

use thiserror::Error;

/// Unified error type for construction and evaluation failures.
///
/// `Validation` covers precondition violations (bad arguments, malformed
/// input files); `Numerical` covers runtime failures of a numerical contract
/// (non-convergence, near-singularity, ambiguous classification).
#[derive(Debug, Error)]
pub enum WaveopError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("numerical: {0}")]
    Numerical(String),
}

impl WaveopError {
    pub fn validation(msg: impl Into<String>) -> Self {
        WaveopError::Validation(msg.into())
    }
    pub fn numerical(msg: impl Into<String>) -> Self {
        WaveopError::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, WaveopError>;
