//! ε-discrete sets of bump potentials, δ-nets of Γ matrices, and the
//! pigeonhole search for two far-apart potentials with nearly equal Γ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtn::{
    count_tuples, smooth_bump, GammaMatrix, GammaSolver, HarmonicDimension, Potential,
};
use crate::error::{param, Error, Result};

/// Largest `N^n` enumerated exhaustively; beyond it the search samples members.
pub const EXHAUSTIVE_BITS: usize = 12;
/// Grid points per unit length for sampled sup and `C^m` norms.
const SAMPLES_PER_UNIT: usize = 4000;

/// `j`-th central finite difference quotient of `f` at `x` with step `h`.
fn derivative(f: &impl Fn(f64) -> f64, j: usize, x: f64, h: f64) -> f64 {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for i in 0..=j {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * f(x + (j as f64 / 2.0 - i as f64) * h);
        binom = binom * (j - i) as f64 / (i + 1) as f64;
    }
    acc / h.powi(j as i32)
}

/// `max_{j ≤ m} sup_{[a,b]} |f^{(j)}|` from finite differences on a uniform grid.
pub fn sampled_cm_norm(f: impl Fn(f64) -> f64, m: usize, interval: (f64, f64)) -> f64 {
    let (a, b) = interval;
    let count = ((b - a) * SAMPLES_PER_UNIT as f64).ceil() as usize;
    let h = 1e-3;
    let mut norm = 0.0f64;
    for i in 0..=count {
        let x = a + (b - a) * i as f64 / count as f64;
        for j in 0..=m {
            let d = if j == 0 {
                f(x)
            } else {
                derivative(&f, j, x, h)
            };
            norm = norm.max(d.abs());
        }
    }
    norm
}

/// `‖ψ‖_{C^m}` of the mold `ψ(t) = exp(1 − 1/(1 − t²))`, along a coordinate axis.
pub fn mold_cm_norm(m: usize) -> f64 {
    sampled_cm_norm(|t| smooth_bump(t * t), m, (-1.0, 1.0))
}

/// The family `{ε Σ_j σ_j ψ(N√n (x − y_j))}` over the cube `[−1/√n, 1/√n]^n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpFamilySpec {
    pub n: usize,
    pub smoothness: usize,
    pub amplitude: f64,
    pub budget: f64,
    /// `μ = n^{m/2} ‖ψ‖_{C^m}`.
    pub mu: f64,
    pub subdivisions: usize,
    pub centers: Vec<Vec<f64>>,
}

impl BumpFamilySpec {
    /// `N = ⌊(β/(με))^{1/m}⌋`; requires `ε < β/μ`.
    pub fn new(n: usize, smoothness: usize, amplitude: f64, budget: f64) -> Result<Self> {
        if !(1..=3).contains(&n) || smoothness == 0 {
            return Err(param("need n ∈ {1,2,3} and smoothness ≥ 1"));
        }
        if !(amplitude > 0.0 && budget > 0.0) {
            return Err(param("amplitude and budget must be positive"));
        }
        let mu = (n as f64).powf(smoothness as f64 / 2.0) * mold_cm_norm(smoothness);
        if amplitude >= budget / mu {
            return Err(param(format!(
                "amplitude {amplitude} must be below β/μ = {}",
                budget / mu
            )));
        }
        let ratio = budget / (mu * amplitude);
        let mut subdivisions = ratio.powf(1.0 / smoothness as f64).floor() as usize;
        // Guard against the root landing a hair below an exact integer.
        if ((subdivisions + 1) as f64).powi(smoothness as i32) <= ratio {
            subdivisions += 1;
        }
        let side = 2.0 / (n as f64).sqrt();
        let cell = side / subdivisions as f64;
        let total = subdivisions.pow(n as u32);
        let centers = (0..total)
            .map(|mut flat| {
                (0..n)
                    .map(|_| {
                        let i = flat % subdivisions;
                        flat /= subdivisions;
                        -side / 2.0 + (i as f64 + 0.5) * cell
                    })
                    .collect()
            })
            .collect();
        Ok(BumpFamilySpec {
            n,
            smoothness,
            amplitude,
            budget,
            mu,
            subdivisions,
            centers,
        })
    }

    /// The budget giving exactly `N` subdivisions: `β = (N + ½)^m μ ε`.
    pub fn with_subdivisions(
        n: usize,
        smoothness: usize,
        amplitude: f64,
        subdivisions: usize,
    ) -> Result<Self> {
        let mu = (n as f64).powf(smoothness as f64 / 2.0) * mold_cm_norm(smoothness);
        let budget = (subdivisions as f64 + 0.5).powi(smoothness as i32) * mu * amplitude;
        BumpFamilySpec::new(n, smoothness, amplitude, budget)
    }

    /// `N^n`, the number of bumps.
    pub fn bits(&self) -> usize {
        self.centers.len()
    }

    /// `log |Z| = N^n log 2`.
    pub fn log_cardinality(&self) -> f64 {
        self.bits() as f64 * std::f64::consts::LN_2
    }

    /// `log` of the guaranteed size `exp(2^{−n−1} (β/(με))^{n/m})`.
    pub fn log_cardinality_bound(&self) -> f64 {
        let ratio = self.budget / (self.mu * self.amplitude);
        2f64.powi(-(self.n as i32) - 1) * ratio.powf(self.n as f64 / self.smoothness as f64)
    }

    /// Bump radius `1/(N√n)`.
    pub fn bump_radius(&self) -> f64 {
        1.0 / (self.subdivisions as f64 * (self.n as f64).sqrt())
    }

    /// The member with selector bits `sigma` (bit `j` switches bump `j` on).
    pub fn member(&self, sigma: u64) -> Result<Potential> {
        if self.n != 1 {
            return Err(param("potentials are one-dimensional"));
        }
        let mut q = Potential::zero();
        for (j, c) in self.centers.iter().enumerate() {
            if sigma >> j & 1 == 1 {
                q = q.plus(&Potential::bump(c[0], self.bump_radius(), self.amplitude));
            }
        }
        Ok(q)
    }
}

/// Every member of the family in selector order.
pub fn build_discrete_set(spec: &BumpFamilySpec) -> Result<Vec<Potential>> {
    if spec.bits() > 63 {
        return Err(Error::Budget {
            requested: u128::MAX,
            budget: 1 << 63,
        });
    }
    (0..1u64 << spec.bits())
        .map(|sigma| spec.member(sigma))
        .collect()
}

/// Sampled `sup |q₁ − q₂|` over `[−1, 1]`, including the bump centers.
pub fn sampled_distance(a: &Potential, b: &Potential) -> f64 {
    let count = 2 * SAMPLES_PER_UNIT;
    let mut points: Vec<f64> = (0..=count)
        .map(|i| -1.0 + 2.0 * i as f64 / count as f64)
        .collect();
    points.extend(a.bumps.iter().chain(&b.bumps).map(|bump| bump.center));
    points
        .iter()
        .map(|x| (a.eval(*x) - b.eval(*x)).abs())
        .fold(0.0, f64::max)
}

/// Sampled `‖q‖_{C^m}` on `[−1, 1]`.
pub fn sampled_potential_cm_norm(q: &Potential, m: usize) -> f64 {
    sampled_cm_norm(|x| q.eval(x), m, (-1.0, 1.0))
}

/// Discretization of the X-ball used to count δ-nets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetSpec {
    pub n: usize,
    pub delta: f64,
    /// Envelope `|a| ≤ C e^{-c·level}` assumed of admissible matrices.
    pub prefactor: f64,
    pub rate: f64,
    /// `l_δ`: `(1+l)^{n+2} C e^{-cl} ≤ δ` for all `l ≥ l_δ`.
    pub cutoff: usize,
    /// `δ′ = (1 + l_δ)^{-n-2} δ`.
    pub step: f64,
    /// `R₀ = sup_l (1+l)^{n+2} C e^{-cl}`.
    pub radius: f64,
    /// `N(δ) = Σ_{p < l_δ} N_p` with the actual harmonic dimensions.
    pub free_entries: u128,
    /// `log |Y| = N(δ) log(2⌊R₀/δ′⌋ + 1)`.
    pub log_cardinality: f64,
    /// `C̃` with `l_δ ≤ C̃ log(1/δ)` for every admissible `δ`.
    pub cutoff_constant: f64,
}

impl NetSpec {
    fn envelope(&self, level: usize) -> f64 {
        (1.0 + level as f64).powi(self.n as i32 + 2)
            * self.prefactor
            * (-self.rate * level as f64).exp()
    }

    /// `log |Y| / (log 1/δ)^{2n+3}`.
    pub fn cardinality_constant(&self) -> f64 {
        self.log_cardinality / (1.0 / self.delta).ln().powi(2 * self.n as i32 + 3)
    }

    /// Largest grid point `k δ′ ≤ R₀`.
    fn grid_limit(&self) -> f64 {
        (self.radius / self.step).floor() * self.step
    }
}

/// A `C̃` valid for every `δ < e^{-1}`, from `log x ≤ x/a + log a − 1` with `a = 2(n+2)/c`.
pub fn cutoff_constant(prefactor: f64, rate: f64, n: usize) -> f64 {
    let a = 2.0 * (n as f64 + 2.0) / rate;
    let k = rate / 2.0 + (n as f64 + 2.0) * (a.ln() - 1.0) + prefactor.ln();
    1.0 + 2.0 * (k.max(0.0) + 1.0) / rate
}

pub fn net_parameters(delta: f64, prefactor: f64, rate: f64, n: usize) -> Result<NetSpec> {
    if !(delta > 0.0 && delta < (-1.0f64).exp()) {
        return Err(param(format!("δ must lie in (0, 1/e), got {delta}")));
    }
    if !(prefactor > 0.0 && rate > 0.0) {
        return Err(param("decay prefactor and rate must be positive"));
    }
    let value =
        |l: usize| (1.0 + l as f64).powi(n as i32 + 2) * prefactor * (-rate * l as f64).exp();
    let peak = ((n as f64 + 2.0) / rate - 1.0).max(0.0).ceil() as usize;
    let mut cutoff = 0;
    let mut radius = 0.0f64;
    let mut l = 0usize;
    loop {
        let v = value(l);
        radius = radius.max(v);
        if v > delta {
            cutoff = l + 1;
        } else if l >= peak {
            break;
        }
        l += 1;
    }
    let step = (1.0 + cutoff as f64).powi(-(n as i32) - 2) * delta;
    let free_entries: u128 = (0..cutoff)
        .map(|p| count_tuples(p, n, HarmonicDimension::Exact))
        .sum();
    let levels = 2.0 * (radius / step).floor() + 1.0;
    Ok(NetSpec {
        n,
        delta,
        prefactor,
        rate,
        cutoff,
        step,
        radius,
        free_entries,
        log_cardinality: free_entries as f64 * levels.ln(),
        cutoff_constant: cutoff_constant(prefactor, rate, n),
    })
}

/// Rounds entries below the cutoff to `δ′ℤ ∩ [−R₀, R₀]` and zeroes the rest.
pub fn project_to_net(mat: &GammaMatrix, net: &NetSpec) -> Result<GammaMatrix> {
    let norm = mat.x_norm();
    if norm > net.radius {
        return Err(Error::OutOfBall {
            norm,
            radius: net.radius,
        });
    }
    let limit = net.grid_limit();
    let mut out = mat.clone();
    let d = mat.len();
    for i in 0..d {
        for j in 0..d {
            let p = mat.indices[i].level().max(mat.indices[j].level());
            out.values[(i, j)] = if p < net.cutoff {
                ((mat.values[(i, j)] / net.step).round() * net.step).clamp(-limit, limit)
            } else {
                0.0
            };
        }
    }
    Ok(out)
}

/// Whether a matrix satisfies the envelope assumed by `net`.
pub fn is_admissible(mat: &GammaMatrix, net: &NetSpec) -> bool {
    let d = mat.len();
    (0..d).all(|i| {
        (0..d).all(|j| {
            let p = mat.indices[i].level().max(mat.indices[j].level());
            mat.weight(i, j) * mat.values[(i, j)].abs() <= net.envelope(p) * (1.0 + 1e-12)
        })
    })
}

/// Controls for [`instability_search`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SearchParams {
    /// Most Γ evaluations allowed.
    pub max_members: usize,
    /// Members drawn when the family is too large to enumerate.
    pub sampled_members: usize,
    pub seed: u64,
    /// Envelope used for the net comparison.
    pub prefactor: f64,
    pub rate: f64,
}

/// Outcome of the pigeonhole search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchReport {
    pub n: usize,
    pub smoothness: usize,
    pub subdivisions: usize,
    pub epsilon: f64,
    pub exhaustive: bool,
    pub members_evaluated: usize,
    pub log_family_size: f64,
    /// `δ = exp(−ε^{−n/((2n+3)m)})`.
    pub delta: f64,
    pub net: Option<NetSpec>,
    /// `log |Z| > log |Y|`: the counting argument forces a pair into one net cell.
    pub hypothesis_met: bool,
    pub best_pair: (u64, u64),
    pub potential_distance: f64,
    pub x_distance: f64,
    /// `4 ‖Γ(q₁) − Γ(q₂)‖_X`.
    pub operator_bound: f64,
    pub operator_distance: f64,
    /// `8 exp(−ε^{−n/((2n+3)m)})`.
    pub theoretical_target: f64,
    /// `‖Γ(q₁) − Γ(q₂)‖_X / ‖q₁ − q₂‖_∞`.
    pub contraction_ratio: f64,
    /// `max_z ‖Γ(q₀ + z) − Γ(q₀)‖_X / ‖z‖_∞` over the evaluated members.
    pub response_scale: f64,
    /// `x_distance / (ε · response_scale)`: the closest pair against a typical single-member response.
    pub relative_contraction: f64,
}

/// Evaluates `Γ(q₀ + z)` over the family and returns the closest pair in X.
pub fn instability_search(
    q0: &Potential,
    spec: &BumpFamilySpec,
    solver: &GammaSolver,
    params: &SearchParams,
) -> Result<(Potential, Potential, SearchReport)> {
    let r0 = solver.op().admissible_radius();
    if q0.sup_norm() > r0 / 2.0 {
        return Err(param(format!("‖q₀‖_∞ must not exceed r₀/2 = {}", r0 / 2.0)));
    }
    let bits = spec.bits();
    let exhaustive = bits <= EXHAUSTIVE_BITS;
    let selectors: Vec<u64> = if exhaustive {
        let total = 1usize << bits;
        if total > params.max_members {
            return Err(Error::Budget {
                requested: total as u128,
                budget: params.max_members as u128,
            });
        }
        (0..total as u64).collect()
    } else {
        if params.sampled_members > params.max_members || bits > 64 {
            return Err(Error::Budget {
                requested: params.sampled_members as u128,
                budget: params.max_members as u128,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut picked = std::collections::BTreeSet::new();
        while picked.len() < params.sampled_members.max(2) {
            let sigma: u64 = if bits == 64 {
                rng.gen()
            } else {
                rng.gen_range(0..1u64 << bits)
            };
            picked.insert(sigma);
        }
        picked.into_iter().collect()
    };
    let base = solver.gamma(q0)?;
    let members: Vec<Potential> = selectors
        .iter()
        .map(|sigma| Ok(q0.plus(&spec.member(*sigma)?)))
        .collect::<Result<_>>()?;
    let images = members
        .par_iter()
        .map(|q| solver.gamma(q))
        .collect::<Result<Vec<GammaMatrix>>>()?;

    let mut response_scale = 0.0f64;
    for (sigma, image) in selectors.iter().zip(&images) {
        if *sigma != 0 {
            response_scale = response_scale.max(image.minus(&base)?.x_norm() / spec.amplitude);
        }
    }

    let mut best = (0usize, 1usize, f64::INFINITY);
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            let d = images[i].minus(&images[j])?.x_norm();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i, j, x_distance) = best;
    let difference = images[i].minus(&images[j])?;
    let potential_distance = sampled_distance(&members[i], &members[j]);

    let exponent = -(spec.n as f64) / ((2 * spec.n + 3) as f64 * spec.smoothness as f64);
    let delta = (-spec.amplitude.powf(exponent)).exp();
    let net = net_parameters(delta, params.prefactor, params.rate, spec.n).ok();
    let hypothesis_met = net
        .as_ref()
        .is_some_and(|net| spec.log_cardinality() > net.log_cardinality);
    let report = SearchReport {
        n: spec.n,
        smoothness: spec.smoothness,
        subdivisions: spec.subdivisions,
        epsilon: spec.amplitude,
        exhaustive,
        members_evaluated: members.len(),
        log_family_size: spec.log_cardinality(),
        delta,
        net,
        hypothesis_met,
        best_pair: (selectors[i], selectors[j]),
        potential_distance,
        x_distance,
        operator_bound: 4.0 * x_distance,
        operator_distance: difference.operator_norm()?,
        theoretical_target: 8.0 * delta,
        contraction_ratio: x_distance / potential_distance,
        response_scale,
        relative_contraction: x_distance / (spec.amplitude * response_scale),
    };
    Ok((members[i].clone(), members[j].clone(), report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_differences_of_polynomials() {
        let f = |x: f64| x * x * x;
        assert!((derivative(&f, 1, 0.5, 1e-3) - 0.75).abs() < 1e-6);
        assert!((derivative(&f, 2, 0.5, 1e-3) - 3.0).abs() < 1e-6);
        assert!((derivative(&f, 3, 0.5, 1e-3) - 6.0).abs() < 1e-4);
    }

    #[test]
    fn subdivision_choice() {
        for n_sub in 1..6 {
            let spec = BumpFamilySpec::with_subdivisions(1, 1, 0.01, n_sub).unwrap();
            assert_eq!(spec.subdivisions, n_sub);
        }
        let spec = BumpFamilySpec::with_subdivisions(2, 2, 0.01, 3).unwrap();
        assert_eq!(spec.bits(), 9);
    }

    #[test]
    fn amplitude_limit() {
        let mu = mold_cm_norm(1);
        assert!(BumpFamilySpec::new(1, 1, 1.0, mu).is_err());
    }
}
