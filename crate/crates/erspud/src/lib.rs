//! Recovery of a square dictionary `A` and sparse coefficients `X` from
//! observations `Y = A X`, up to row permutation and scaling.
//!
//! The pipeline synthesizes `X` from a Bernoulli-subgaussian model, forms
//! `Y = A X`, and then solves a family of linear programs
//!
//! ```text
//!     minimize ||w^T Y||_1   subject to   r^T w = 1,
//! ```
//!
//! one per column pair (`r` is the sum of two columns of `Y`). Each optimal
//! vertex yields a candidate row `s = w^T Y`; a greedy pass keeps the `n`
//! sparsest independent candidates and reconstructs the dictionary as
//! `A = Y Y^T (X Y^T)^{-1}`.
//!
//! The crate is `no_std`-compatible (requires `alloc`; enable the `libm`
//! feature when building without `std`). All randomness flows through named,
//! seeded ChaCha8 substreams, so every result is reproducible bit for bit.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("erspud requires either the `std` or the `libm` feature");

pub mod analysis;
pub mod lp;
mod math;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod spud;

use core::fmt;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Operand shapes do not agree.
    Dimension(&'static str),
    /// An input entry is NaN or infinite.
    NonFinite(&'static str),
    /// A scalar parameter is outside its admissible range.
    InvalidParameter(&'static str),
    /// A pivot fell below the singularity tolerance during factorization.
    SingularMatrix,
    /// The linear constraint vector is identically zero.
    ZeroConstraint,
    /// A candidate row is identically zero and cannot be normalized.
    ZeroCandidate,
    /// A documented precondition does not hold for the given inputs.
    Precondition(&'static str),
    /// The linear program is unbounded below.
    Unbounded,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(ctx) => write!(f, "dimension mismatch: {ctx}"),
            Error::NonFinite(ctx) => write!(f, "non-finite input: {ctx}"),
            Error::InvalidParameter(ctx) => write!(f, "invalid parameter: {ctx}"),
            Error::SingularMatrix => write!(f, "matrix is singular at the given tolerance"),
            Error::ZeroConstraint => write!(f, "constraint vector is zero"),
            Error::ZeroCandidate => write!(f, "candidate row is zero"),
            Error::Precondition(ctx) => write!(f, "precondition violated: {ctx}"),
            Error::Unbounded => write!(f, "linear program is unbounded"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

/// Crate-wide result type.
pub type Result<T> = core::result::Result<T, Error>;
