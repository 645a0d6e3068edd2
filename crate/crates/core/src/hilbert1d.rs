//! The truncated Hilbert transform `H_{[2,3]} : L²([2,3]) → L²([−1,1])`, its
//! singular system, the Sturm–Liouville operator that commutes with it, and
//! the one-dimensional control experiment.
//!
//! Both truncations have disjoint source and target intervals, so the kernel
//! `1/(t − y)` is smooth and Gauss–Legendre Nyström discretizations converge
//! exponentially.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::fracpoisson::{AnnulusRule, PoissonIntegral};
use crate::numkit::linalg::{min_norm_with_budget, svd, Svd};
use crate::numkit::linear_fit;
use crate::numkit::quad::{gauss_rule, GaussInterpolant, QuadRule};
use crate::radialbasis::WeightedSpace;

pub const DEFAULT_NODES: usize = 64;
/// Singular values below this multiple of the unit roundoff are not resolved.
pub const RESOLUTION_FACTOR: f64 = 100.0;
/// Residuals are checked on `[2 + margin, 3 − margin]`.
pub const SL_MARGIN: f64 = 0.05;
/// Sturm–Liouville residuals above this are attributed to differentiation noise.
pub const SL_NOISE_FLAG: f64 = 0.1;
/// Shift `σ = 5/4` in the Sturm–Liouville potential.
pub const SL_SHIFT: f64 = 1.25;
const CHECK_NODES: usize = 96;
const POISSON_NODES: usize = 80;

/// `P(x) = (x − 1)(x + 1)(x − 2)(x − 3)`.
pub fn sl_coefficient(x: f64) -> f64 {
    (x - 1.0) * (x + 1.0) * (x - 2.0) * (x - 3.0)
}

/// `P′(x) = 4x³ − 15x² + 10x + 5`.
pub fn sl_coefficient_derivative(x: f64) -> f64 {
    ((4.0 * x - 15.0) * x + 10.0) * x + 5.0
}

/// `c(s) = sin(πs)/π`, the one-dimensional Poisson constant.
pub fn poisson_constant_1d(s: f64) -> f64 {
    (std::f64::consts::PI * s).sin() / std::f64::consts::PI
}

/// Nyström discretization of both truncations.
#[derive(Clone, Debug)]
pub struct TruncatedHt {
    /// Rule on the source interval `[2, 3]`.
    pub outer: QuadRule<f64>,
    /// Rule on the target interval `[−1, 1]`.
    pub inner: QuadRule<f64>,
    /// `K_ij = 1/(t_i − y_j)`.
    pub kernel: DMatrix<f64>,
}

impl TruncatedHt {
    pub fn build(inner_nodes: usize, outer_nodes: usize) -> Result<Self> {
        if inner_nodes < 32 || outer_nodes < 32 {
            return Err(param(
                "the Hilbert transform needs at least 32 nodes per interval",
            ));
        }
        let outer = gauss_rule::<f64>(2.0, 3.0, outer_nodes)?;
        let inner = gauss_rule::<f64>(-1.0, 1.0, inner_nodes)?;
        let kernel = DMatrix::from_fn(inner.len(), outer.len(), |i, j| {
            1.0 / (inner.nodes[i] - outer.nodes[j])
        });
        Ok(TruncatedHt {
            outer,
            inner,
            kernel,
        })
    }

    /// `H_{[2,3]} f` at the inner nodes, for `f` sampled at the outer nodes.
    pub fn apply_outer(&self, f: &[f64]) -> Vec<f64> {
        let wf = DVector::from_iterator(
            f.len(),
            f.iter().zip(&self.outer.weights).map(|(f, w)| f * w),
        );
        (&self.kernel * wf).iter().cloned().collect()
    }

    /// `H_{[−1,1]} g` at the outer nodes, for `g` sampled at the inner nodes.
    pub fn apply_inner(&self, g: &[f64]) -> Vec<f64> {
        let wg = DVector::from_iterator(
            g.len(),
            g.iter().zip(&self.inner.weights).map(|(g, w)| g * w),
        );
        (self.kernel.transpose() * wg).iter().map(|v| -v).collect()
    }

    /// `D_inner^{1/2} K D_outer^{1/2}`.
    pub fn weighted_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.kernel.nrows(), self.kernel.ncols(), |i, j| {
            self.inner.weights[i].sqrt() * self.kernel[(i, j)] * self.outer.weights[j].sqrt()
        })
    }
}

/// `H_{[2,3]} f (t) = ∫₂³ f(y)/(t − y) dy` by the given rule.
pub fn hilbert_outer(f: &dyn Fn(f64) -> f64, t: f64, rule: &QuadRule<f64>) -> f64 {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(y, w)| w * f(*y) / (t - y))
        .sum()
}

/// `H_{[−1,1]} g (y) = ∫_{−1}^{1} g(t)/(y − t) dt` by the given rule.
pub fn hilbert_inner(g: &dyn Fn(f64) -> f64, y: f64, rule: &QuadRule<f64>) -> f64 {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(t, w)| w * g(*t) / (y - t))
        .sum()
}

/// `(σ_l, f_l, g_l)` with residuals of both eigen-relations on refined rules.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SvdTriple {
    pub index: usize,
    pub sigma: f64,
    /// `f_l` at the outer nodes.
    pub f_nodes: Vec<f64>,
    /// `g_l` at the inner nodes.
    pub g_nodes: Vec<f64>,
    /// `‖H_{[2,3]} f_l − σ_l g_l‖_{L²([−1,1])}`.
    pub forward_residual: f64,
    /// `‖H_{[−1,1]} g_l + σ_l f_l‖_{L²([2,3])}`.
    pub backward_residual: f64,
}

/// Resolved part of the singular system.
#[derive(Clone, Debug)]
pub struct HtSvd {
    pub ht: TruncatedHt,
    pub triples: Vec<SvdTriple>,
    /// Every discrete singular value, resolved or not.
    pub spectrum: Vec<f64>,
    pub requested: usize,
}

impl HtSvd {
    /// Fewer triples than requested were resolvable.
    pub fn truncated(&self) -> bool {
        self.triples.len() < self.requested
    }

    pub fn triple(&self, l: usize) -> Result<&SvdTriple> {
        self.triples.get(l).ok_or(Error::Truncated {
            requested: l + 1,
            achieved: self.triples.len(),
        })
    }

    pub fn f_interpolant(&self, l: usize) -> Result<GaussInterpolant> {
        GaussInterpolant::new(&self.ht.outer, self.triple(l)?.f_nodes.clone())
    }

    pub fn g_interpolant(&self, l: usize) -> Result<GaussInterpolant> {
        GaussInterpolant::new(&self.ht.inner, self.triple(l)?.g_nodes.clone())
    }

    /// Slope, intercept and normalized RMS deviation of the fit of `log σ_l` against `l`.
    pub fn decay_fit(&self) -> (f64, f64, f64) {
        let x: Vec<f64> = self.triples.iter().map(|t| t.index as f64).collect();
        let y: Vec<f64> = self.triples.iter().map(|t| t.sigma.ln()).collect();
        let (slope, intercept) = linear_fit(&x, &y);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let ss_res: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - slope * a - intercept).powi(2))
            .sum();
        let ss_tot: f64 = y.iter().map(|b| (b - mean).powi(2)).sum();
        (slope, intercept, (ss_res / ss_tot).sqrt())
    }

    /// Largest deviation of the `f_l` Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in &self.triples {
            for b in &self.triples {
                let ip: f64 = a
                    .f_nodes
                    .iter()
                    .zip(&b.f_nodes)
                    .zip(&self.ht.outer.weights)
                    .map(|((x, y), w)| w * x * y)
                    .sum();
                let target = if a.index == b.index { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }
}

/// Quadrature-weighted SVD; keeps at most `count` triples with `σ_l/σ₀` above
/// [`RESOLUTION_FACTOR`] times the unit roundoff.
pub fn ht_svd(ht: &TruncatedHt, count: usize) -> Result<HtSvd> {
    let decomposition: Svd = svd(&ht.weighted_matrix())?;
    let spectrum: Vec<f64> = decomposition.singular_values.iter().cloned().collect();
    let floor = RESOLUTION_FACTOR * f64::EPSILON * spectrum[0];
    let check_inner = gauss_rule::<f64>(-1.0, 1.0, CHECK_NODES)?;
    let check_outer = gauss_rule::<f64>(2.0, 3.0, CHECK_NODES)?;
    let mut triples = Vec::new();
    for (l, &sigma) in spectrum.iter().enumerate().take(count) {
        if sigma <= floor {
            break;
        }
        let u = decomposition.u.column(l);
        let v = decomposition.v.column(l);
        // Fix the sign so that g_l is positive near t = 1.
        let sign = if u[u.len() - 1] < 0.0 { -1.0 } else { 1.0 };
        let g_nodes: Vec<f64> = u
            .iter()
            .zip(&ht.inner.weights)
            .map(|(u, w)| sign * u / w.sqrt())
            .collect();
        let f_nodes: Vec<f64> = v
            .iter()
            .zip(&ht.outer.weights)
            .map(|(v, w)| sign * v / w.sqrt())
            .collect();
        let f = GaussInterpolant::new(&ht.outer, f_nodes.clone())?;
        let g = GaussInterpolant::new(&ht.inner, g_nodes.clone())?;
        let forward = check_inner
            .nodes
            .iter()
            .zip(&check_inner.weights)
            .map(|(t, w)| {
                w * (hilbert_outer(&|y| f.eval(y), *t, &check_outer) - sigma * g.eval(*t)).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let backward = check_outer
            .nodes
            .iter()
            .zip(&check_outer.weights)
            .map(|(y, w)| {
                w * (hilbert_inner(&|t| g.eval(t), *y, &check_inner) + sigma * f.eval(*y)).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        triples.push(SvdTriple {
            index: l,
            sigma,
            f_nodes,
            g_nodes,
            forward_residual: forward,
            backward_residual: backward,
        });
    }
    Ok(HtSvd {
        ht: ht.clone(),
        triples,
        spectrum,
        requested: count,
    })
}

/// Rayleigh quotient and interior residual of `L f_l = λ_l f_l`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SturmLiouvilleRow {
    pub index: usize,
    pub rayleigh: f64,
    pub residual: f64,
    /// Residual above [`SL_NOISE_FLAG`]: differentiation noise dominates.
    pub noisy: bool,
}

/// Applies `L f = (P f′)′ + 2(x − σ)² f` to the Nyström extension
/// `f_l(y) = −σ_l^{-1} Σ_i v_i g_l(t_i)/(y − t_i)`, differentiated termwise.
pub fn sturm_liouville_check(svd: &HtSvd, l: usize) -> Result<SturmLiouvilleRow> {
    let triple = svd.triple(l)?;
    let inner = &svd.ht.inner;
    let coef: Vec<(f64, f64)> = inner
        .nodes
        .iter()
        .zip(&inner.weights)
        .zip(&triple.g_nodes)
        .map(|((t, w), g)| (*t, w * g / triple.sigma))
        .collect();
    let derivatives = |y: f64| {
        let (mut f, mut df, mut ddf) = (0.0, 0.0, 0.0);
        for (t, c) in &coef {
            let r = 1.0 / (y - t);
            f -= c * r;
            df += c * r * r;
            ddf -= 2.0 * c * r * r * r;
        }
        (f, df, ddf)
    };
    let rule = gauss_rule::<f64>(2.0 + SL_MARGIN, 3.0 - SL_MARGIN, CHECK_NODES)?;
    let mut fs = Vec::with_capacity(rule.len());
    let mut lfs = Vec::with_capacity(rule.len());
    for y in &rule.nodes {
        let (f, df, ddf) = derivatives(*y);
        let lf = sl_coefficient(*y) * ddf
            + sl_coefficient_derivative(*y) * df
            + 2.0 * (y - SL_SHIFT).powi(2) * f;
        fs.push(f);
        lfs.push(lf);
    }
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&rule.weights)
            .map(|((x, y), w)| w * x * y)
            .sum()
    };
    let rayleigh = dot(&lfs, &fs) / dot(&fs, &fs);
    let diff: Vec<f64> = lfs
        .iter()
        .zip(&fs)
        .map(|(lf, f)| lf - rayleigh * f)
        .collect();
    let residual = (dot(&diff, &diff) / (rayleigh * rayleigh * dot(&fs, &fs))).sqrt();
    Ok(SturmLiouvilleRow {
        index: l,
        rayleigh,
        residual,
        noisy: residual > SL_NOISE_FLAG,
    })
}

/// Least-squares coefficients `(a₀, a₁, a₂)` of `λ ≈ a₀ + a₁ l + a₂ l²`.
pub fn quadratic_trend(rows: &[SturmLiouvilleRow]) -> Result<[f64; 3]> {
    if rows.len() < 3 {
        return Err(param("a quadratic trend needs at least three eigenvalues"));
    }
    let a = DMatrix::from_fn(rows.len(), 3, |i, j| (rows[i].index as f64).powi(j as i32));
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.rayleigh));
    let x = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Numeric(e.to_string()))?;
    Ok([x[0], x[1], x[2]])
}

/// Agreement of `A₀ g` with `−c(s)(1 − x²)^s H_{[2,3]}((·² − 1)^{-s} g)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub discrepancy: f64,
    /// `|⟨a, b⟩| / (‖a‖ ‖b‖)`, insensitive to the normalizing constant.
    pub collinearity: f64,
}

/// `A₀ g` at the inner nodes of `ht` through the Poisson integral of the
/// basis module, with data `g` on `[2, 3]` and zero on `[−3, −2]`.
fn poisson_side(g: &dyn Fn(f64) -> f64, s: f64, points: &[f64]) -> Result<Vec<f64>> {
    let annulus = AnnulusRule::<f64>::new(1, POISSON_NODES, 0)?;
    let samples = annulus.sample(|r, dir| if dir[0] > 0.0 { g(*r) } else { 0.0 });
    let integral = PoissonIntegral::new(WeightedSpace::new(1, s)?, &annulus)?;
    let pts: Vec<Vec<f64>> = points.iter().map(|x| vec![*x]).collect();
    Ok(integral.apply(&[samples], &pts)?.swap_remove(0))
}

fn compare(a: &[f64], b: &[f64], weights: &[f64]) -> IdentityReport {
    let dot = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .zip(weights)
            .map(|((p, q), w)| w * p * q)
            .sum()
    };
    let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    IdentityReport {
        discrepancy: dot(&diff, &diff).sqrt() / na,
        collinearity: dot(a, b).abs() / (na * nb),
    }
}

pub fn ht_frac_identity(
    g: &dyn Fn(f64) -> f64,
    s: f64,
    ht: &TruncatedHt,
) -> Result<IdentityReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(param(format!("s must lie in (0,1), got {s}")));
    }
    let a0 = poisson_side(g, s, &ht.inner.nodes)?;
    let damped: Vec<f64> = ht
        .outer
        .nodes
        .iter()
        .map(|y| (y * y - 1.0).powf(-s) * g(*y))
        .collect();
    let c = poisson_constant_1d(s);
    let hilbert: Vec<f64> = ht
        .apply_outer(&damped)
        .iter()
        .zip(&ht.inner.nodes)
        .map(|(h, x)| -c * (1.0 - x * x).powf(s) * h)
        .collect();
    Ok(compare(&a0, &hilbert, &ht.inner.weights))
}

/// Relative `L²` gap between `A₀ f̂_l` and `−c(s) σ_l ĝ_l`.
pub fn singular_image_check(svd: &HtSvd, s: f64, l: usize) -> Result<IdentityReport> {
    let triple = svd.triple(l)?;
    let f = svd.f_interpolant(l)?;
    let weighted = |y: f64| (y * y - 1.0).powf(s) * f.eval(y);
    let inner = &svd.ht.inner;
    let a0 = poisson_side(&weighted, s, &inner.nodes)?;
    let c = poisson_constant_1d(s);
    let predicted: Vec<f64> = inner
        .nodes
        .iter()
        .zip(&triple.g_nodes)
        .map(|(x, g)| -c * triple.sigma * (1.0 - x * x).powf(s) * g)
        .collect();
    Ok(compare(&a0, &predicted, &inner.weights))
}

/// Equivalence constants `c₁ ‖f‖_{L²_{−s}} ≤ ‖f‖_{L²} ≤ c₂ ‖f‖_{L²_{−s}}` on `[2, 3]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormBand {
    pub s: f64,
    /// `min (y² − 1)^s` over the nodes.
    pub lower: f64,
    /// `max (y² − 1)^s` over the nodes.
    pub upper: f64,
    /// Smallest and largest `‖f‖/‖f‖_{L²_{−s}}` over random samples.
    pub sampled_min: f64,
    pub sampled_max: f64,
}

impl NormBand {
    /// Both constants lie in `(1/3, 3)`.
    pub fn within_thirds(&self) -> bool {
        self.lower > 1.0 / 3.0 && self.upper < 3.0
    }
}

pub fn norm_equivalence(s: f64, rule: &QuadRule<f64>, samples: usize, seed: u64) -> NormBand {
    let weight: Vec<f64> = rule.nodes.iter().map(|y| (y * y - 1.0).powf(s)).collect();
    let lower = weight.iter().cloned().fold(f64::INFINITY, f64::min);
    let upper = weight.iter().cloned().fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sampled_min, mut sampled_max) = (f64::INFINITY, 0.0f64);
    for _ in 0..samples {
        let f: Vec<f64> = (0..rule.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let plain: f64 = f.iter().zip(&rule.weights).map(|(f, w)| w * f * f).sum();
        let damped: f64 = f
            .iter()
            .zip(&rule.weights)
            .zip(&weight)
            .map(|((f, w), q)| w * f * f / (q * q))
            .sum();
        let ratio = (plain / damped).sqrt();
        sampled_min = sampled_min.min(ratio);
        sampled_max = sampled_max.max(ratio);
    }
    NormBand {
        s,
        lower,
        upper,
        sampled_min,
        sampled_max,
    }
}

/// One row of the 1D control table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Control1dRow {
    pub k: usize,
    pub sigma: f64,
    pub control_norm: f64,
    pub weighted_norm: f64,
    /// `c(s) σ_k ‖f̃_k‖_{L²}`.
    pub ratio: f64,
    /// Component of the weighted approximation along `g_k`.
    pub alpha: f64,
    pub residual: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Control1d {
    pub s: f64,
    pub band: NormBand,
    pub rows: Vec<Control1dRow>,
    pub norm_slope: f64,
    pub sigma_slope: f64,
}

/// Minimal-`L²` controls `f̃` with `‖(1 − x²)^{-s}(ĝ_k − A₀ f̃)‖ ≤ 1/k` for each `k`.
pub fn control_growth_1d(svd: &HtSvd, s: f64, ks: &[usize]) -> Result<Control1d> {
    let ht = &svd.ht;
    let c = poisson_constant_1d(s);
    let (ni, no) = (ht.inner.len(), ht.outer.len());
    // (1 − x²)^{-s} A₀ f̃ = −c H_{[2,3]}((·² − 1)^{-s} f̃), in the variables √w_j f̃_j.
    let operator = DMatrix::from_fn(ni, no, |i, j| {
        let y = ht.outer.nodes[j];
        -c * ht.inner.weights[i].sqrt()
            * ht.kernel[(i, j)]
            * ht.outer.weights[j].sqrt()
            * (y * y - 1.0).powf(-s)
    });
    let decomposition = crate::numkit::linalg::svd(&operator)?;
    let band = norm_equivalence(s, &ht.outer, 2000, 17);
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        if k == 0 {
            return Err(param("control index k starts at 1"));
        }
        let triple = svd.triple(k)?;
        let rhs = DVector::from_iterator(
            ni,
            triple
                .g_nodes
                .iter()
                .zip(&ht.inner.weights)
                .map(|(g, w)| g * w.sqrt()),
        );
        let solution = min_norm_with_budget(&decomposition, &rhs, 1.0 / k as f64, 1e-3)?;
        let z = &solution.x;
        let control_norm = z.norm();
        let weighted_norm = z
            .iter()
            .zip(&ht.outer.nodes)
            .map(|(z, y)| (z * (y * y - 1.0).powf(-s)).powi(2))
            .sum::<f64>()
            .sqrt();
        let alpha = (&operator * z).dot(&rhs) / rhs.norm_squared();
        rows.push(Control1dRow {
            k,
            sigma: triple.sigma,
            control_norm,
            weighted_norm,
            ratio: c * triple.sigma * control_norm,
            alpha,
            residual: solution.residual,
            lambda: solution.lambda,
        });
    }
    let fit_rows: Vec<&Control1dRow> = rows.iter().filter(|r| r.control_norm > 0.0).collect();
    let x: Vec<f64> = fit_rows.iter().map(|r| r.k as f64).collect();
    let norm_slope = linear_fit(
        &x,
        &fit_rows
            .iter()
            .map(|r| r.control_norm.ln())
            .collect::<Vec<_>>(),
    )
    .0;
    let sigma_slope = linear_fit(
        &x,
        &fit_rows.iter().map(|r| r.sigma.ln()).collect::<Vec<_>>(),
    )
    .0;
    Ok(Control1d {
        s,
        band,
        rows,
        norm_slope,
        sigma_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_roots() {
        for r in [-1.0, 1.0, 2.0, 3.0] {
            assert_eq!(sl_coefficient(r), 0.0);
        }
        let h = 1e-6;
        let x = 2.4;
        let fd = (sl_coefficient(x + h) - sl_coefficient(x - h)) / (2.0 * h);
        assert!((fd - sl_coefficient_derivative(x)).abs() < 1e-7);
    }

    #[test]
    fn constant_input() {
        let ht = TruncatedHt::build(32, 32).unwrap();
        let v = hilbert_outer(&|_| 1.0, 0.0, &ht.outer);
        assert!((v + 1.5f64.ln()).abs() < 1e-14);
    }
}
