//! Certified decisions about ternary cubics on the unit 2-sphere.
//!
//! The library identifies `S2` with the Riemann sphere, represents a cubic
//! `p` on the sphere by a 4x4 complex Hermitian matrix `H` with
//! `p(x) = <H, Z(x)>` for the rank-1 moment matrix `Z(x)`, and decides
//! nonnegativity of `p` through positive-semidefiniteness of a matrix pair
//! `(B, C)` tied to `H` by linear equations.  The same machinery yields
//! membership in the infinity-norm unit ball of homogeneous cubics, exact
//! global minima/maxima over the sphere, and minimizer extraction from
//! optimal moment matrices.  Every verdict comes with a certificate that
//! re-verifies by plain linear algebra, plus an independent sampling oracle.

pub mod cones;
pub mod hermitian;
pub mod optimize;
pub mod sdp;
pub mod sphere_moment;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("matrix is not Hermitian: asymmetry {0:.3e}")]
    NotHermitian(f64),
    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("atom extraction failed: {0}")]
    ExtractionFailed(String),
    #[error("invalid coefficient key {key:?}: {reason}")]
    BadCoefficient { key: String, reason: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
