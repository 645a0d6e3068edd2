//! Shared numerical substrate.

pub mod bessel;
pub mod harmonics;
pub mod linalg;
pub mod params;
pub mod quad;
pub mod scalar;

pub use bessel::{bessel_i, bessel_i_scaled};
pub use harmonics::{spherical_harmonic, HarmonicIndex, SphereRule};
pub use linalg::{
    min_norm_with_budget, svd, tikhonov_solution, MinNormSolution, Svd, TikhonovProfile,
};
pub use params::ProblemParams;
pub use quad::{gauss_rule, ChebyshevInterpolant, GaussInterpolant, QuadRule};
pub use scalar::{Scalar, WideFloat};

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
