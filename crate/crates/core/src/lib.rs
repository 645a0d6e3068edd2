//! Numerical laboratory for the exponential instability of the fractional
//! Calderón problem.
//!
//! The crate builds the exterior basis whose Poisson images decay like
//! `2^{-m-k}`, computes the DtN difference `Γ(q)` for 1D potentials, runs the
//! discrete-set/net pigeonhole search, and checks the truncated Hilbert
//! transform and Caffarelli–Silvestre examples.
//!
//! Precision-sensitive code is generic over [`Scalar`]; [`Real`] and [`Wide`]
//! are the concrete choices used by the experiments.

pub mod dtn;
pub mod error;
pub mod fracpoisson;
pub mod hadamard;
pub mod hilbert1d;
pub mod mandache;
pub mod numkit;
pub mod radialbasis;

pub use error::{Error, Result};
pub use numkit::scalar::{Scalar, WideFloat};

/// Double precision, used wherever conditioning allows.
pub type Real = f64;
/// Default extended precision for the radial orthogonalization.
pub type Wide = WideFloat<{ numkit::params::DEFAULT_PRECISION_BITS }>;
