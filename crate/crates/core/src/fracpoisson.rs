//! Exterior basis `f_{m,k,l}` on the annulus `2 < |y| < 3`, the Poisson operator
//! `A₀ : f ↦ u|_{B₁}` and the Runge-approximation control experiment.
//!
//! With `ρ_{m,k}(r) = r^{-n} (r² − 1)^{-s} g̃_{m,k}(r)` the basis function is
//! `f_{m,k,l}(rω) = ρ_{m,k}(r) h_{m,l}(ω)`, and its image separates as
//! `u_{m,k,l}(ρω) = c̃ (1 − ρ²)^s ρ^m h_{m,l}(ω) F_{m,k}(ρ)` where
//! `c̃ = c(n,s)·|S^{n−1}| = 2 sin(πs)/π`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::numkit::harmonics::{harmonic_count, spherical_harmonic, HarmonicIndex, SphereRule};
use crate::numkit::linalg::{svd, tikhonov_solution, Svd, TikhonovProfile};
use crate::numkit::quad::{gauss_rule, ChebyshevInterpolant, QuadRule};
use crate::numkit::scalar::Scalar;
use crate::numkit::{linear_fit, ProblemParams};
use crate::radialbasis::{build_radial_basis, RadialBasis, RadialQuadrature, WeightedSpace};

/// Chebyshev points (in `ρ²`) used to tabulate `F_{m,k}` for off-grid evaluation.
const F_TABLE_POINTS: usize = 48;
/// Relative tolerance on the residual when bisecting the Tikhonov parameter.
pub const CONTROL_RESIDUAL_TOL: f64 = 0.01;

/// Ball Poisson constant `c(n,s) = Γ(n/2) sin(πs) / π^{n/2+1}`.
pub fn poisson_constant<T: Scalar>(n: usize, s: f64) -> T {
    let pi = T::pi();
    let root_pi = pi.sqrt();
    let (gamma_half, power) = match n {
        1 => (root_pi.clone(), pi.clone() * root_pi),
        2 => (T::one(), pi.clone() * pi.clone()),
        _ => (
            root_pi.clone() / T::from_f64(2.0),
            pi.clone() * pi.clone() * root_pi,
        ),
    };
    gamma_half * (pi * T::from_f64(s)).sin() / power
}

/// `c̃ = 2 sin(πs)/π`, the constant in `‖A₀ f_{m,k,l}‖ ≤ c̃ 2^{-m-k}`.
pub fn decay_constant(s: f64) -> f64 {
    2.0 * (std::f64::consts::PI * s).sin() / std::f64::consts::PI
}

/// Index `(m, k, l)` of an exterior basis function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    pub m: usize,
    pub k: usize,
    pub l: usize,
}

impl BasisIndex {
    pub fn new(m: usize, k: usize, l: usize) -> Self {
        BasisIndex { m, k, l }
    }

    /// `m + k`, the quantity controlling the decay.
    pub fn level(&self) -> usize {
        self.m + self.k
    }

    pub fn harmonic(&self) -> HarmonicIndex {
        HarmonicIndex::new(self.m, self.l)
    }
}

impl fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.m, self.k, self.l)
    }
}

/// Which `(m, k)` pairs to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub m_max: usize,
    pub k_max: usize,
    /// Optional cap on `m + k`.
    pub level_max: Option<usize>,
}

impl Truncation {
    /// All pairs with `m + k ≤ cap`.
    pub fn level(cap: usize) -> Self {
        Truncation {
            m_max: cap,
            k_max: cap,
            level_max: Some(cap),
        }
    }

    /// The rectangle `m ≤ m_max`, `k ≤ k_max`.
    pub fn rectangle(m_max: usize, k_max: usize) -> Self {
        Truncation {
            m_max,
            k_max,
            level_max: None,
        }
    }

    /// Largest `k` kept for degree `m`.
    pub fn k_cap(&self, m: usize) -> Option<usize> {
        if m > self.m_max {
            return None;
        }
        let k = match self.level_max {
            Some(cap) if cap < m => return None,
            Some(cap) => self.k_max.min(cap - m),
            None => self.k_max,
        };
        Some(k)
    }

    pub fn contains(&self, m: usize, k: usize) -> bool {
        self.k_cap(m).is_some_and(|cap| k <= cap)
    }
}

/// Tensor grid on the unit ball: Gauss in the radius times a sphere rule.
#[derive(Clone, Debug)]
pub struct InteriorGrid {
    pub n: usize,
    pub radii: Vec<f64>,
    /// Radial weights including the Jacobian `ρ^{n−1}`.
    pub radial_weights: Vec<f64>,
    pub sphere: SphereRule<f64>,
}

impl InteriorGrid {
    /// `radial_nodes` Gauss points in `ρ`, sphere rule exact for harmonic products up to `degree`.
    pub fn new(n: usize, radial_nodes: usize, degree: usize) -> Result<Self> {
        let rule = gauss_rule::<f64>(0.0, 1.0, radial_nodes)?;
        let radial_weights = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(r, w)| w * r.powi(n as i32 - 1))
            .collect();
        Ok(InteriorGrid {
            n,
            radii: rule.nodes,
            radial_weights,
            sphere: SphereRule::new(n, degree)?,
        })
    }

    /// Default grid for a truncation: sphere rule exact through degree `2 m_max + 2`.
    pub fn for_truncation(params: &ProblemParams, truncation: &Truncation) -> Result<Self> {
        let m_max = if params.n == 1 { 1 } else { truncation.m_max };
        Self::new(params.n, params.quad_nodes, 2 * m_max + 2)
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.sphere.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cartesian coordinates of node `(i, a)`, stored at `i · |sphere| + a`.
    pub fn point(&self, i: usize, a: usize) -> Vec<f64> {
        self.sphere.directions[a]
            .iter()
            .map(|c| c * self.radii[i])
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.radii.len() {
            for a in 0..self.sphere.len() {
                out.push(self.point(i, a));
            }
        }
        out
    }

    fn weight(&self, flat: usize) -> f64 {
        let ns = self.sphere.len();
        self.radial_weights[flat / ns] * self.sphere.weights[flat % ns]
    }
}

/// Samples of a function on the interior grid.
#[derive(Clone, Debug)]
pub struct InteriorField {
    pub grid: Arc<InteriorGrid>,
    pub values: Vec<f64>,
}

impl InteriorField {
    pub fn zeros(grid: Arc<InteriorGrid>) -> Self {
        let len = grid.len();
        InteriorField {
            grid,
            values: vec![0.0; len],
        }
    }

    /// `L²(B₁)` inner product by the grid quadrature.
    pub fn dot(&self, other: &InteriorField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(q, (a, b))| self.grid.weight(q) * a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &InteriorField) -> f64 {
        let mut diff = self.clone();
        diff.axpy(-1.0, other);
        diff.norm()
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &InteriorField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in self.values.iter_mut() {
            *a *= alpha;
        }
    }
}

/// Everything derived from the radial profiles for one degree `m`.
#[derive(Clone, Debug)]
struct DegreeData<T> {
    radial: RadialBasis<T>,
    /// `c̃ (1 − ρ²)^s ρ^m F_{m,k}(ρ)` at the grid radii, `[k][i]`.
    images: Vec<Vec<f64>>,
    /// `F_{m,k}` as a function of `ρ²`.
    f_tables: Vec<ChebyshevInterpolant>,
    /// `h_{m,l}` at the grid directions, `[l][a]`.
    harmonics: Vec<Vec<f64>>,
}

/// The exterior basis up to a truncation, with its Poisson images on a grid.
#[derive(Clone, Debug)]
pub struct ExteriorBasis<T> {
    pub params: ProblemParams,
    pub space: WeightedSpace,
    pub truncation: Truncation,
    pub grid: Arc<InteriorGrid>,
    degrees: Vec<DegreeData<T>>,
}

impl<T: Scalar> ExteriorBasis<T> {
    /// Builds with the default radial quadrature for `T`.
    pub fn build(params: &ProblemParams, truncation: Truncation) -> Result<Self> {
        let grid = Arc::new(InteriorGrid::for_truncation(params, &truncation)?);
        Self::build_with(
            params,
            truncation,
            grid,
            RadialQuadrature::<T>::default_count(),
        )
    }

    pub fn build_with(
        params: &ProblemParams,
        truncation: Truncation,
        grid: Arc<InteriorGrid>,
        radial_nodes: usize,
    ) -> Result<Self> {
        params.validate()?;
        if grid.n != params.n {
            return Err(param("grid dimension does not match the problem dimension"));
        }
        let space = WeightedSpace::new(params.n, params.s)?;
        let quadrature = RadialQuadrature::<T>::new(space, radial_nodes)?;
        let m_top = if params.n == 1 {
            truncation.m_max.min(1)
        } else {
            truncation.m_max
        };
        let scale = T::from_f64(2.0) * (T::pi() * T::from_f64(params.s)).sin() / T::pi();
        let s = params.s;
        let degrees = (0..=m_top)
            .into_par_iter()
            .filter_map(|m| truncation.k_cap(m).map(|k| (m, k)))
            .map(|(m, k_max)| -> Result<DegreeData<T>> {
                let radial = build_radial_basis(m, k_max, &quadrature)?;
                let radii: Vec<T> = grid.radii.iter().map(|&r| T::from_f64(r)).collect();
                let f_grid = radial.eval_f_table(&radii)?;
                let images = f_grid
                    .iter()
                    .map(|row| {
                        row.iter()
                            .zip(&radii)
                            .map(|(f, rho)| {
                                let envelope = (T::one() - rho.clone() * rho.clone())
                                    .powf(&T::from_f64(s))
                                    * rho.powi(m as i32);
                                (scale.clone() * envelope * f.clone()).to_f64()
                            })
                            .collect()
                    })
                    .collect();
                let table_points = ChebyshevInterpolant::points(0.0, 1.0, F_TABLE_POINTS);
                // The rightmost point ρ² = 1 is outside [0, 1); nudge it inward.
                let table_radii: Vec<T> = table_points
                    .iter()
                    .map(|&t| T::from_f64(t.min(1.0 - 1e-15).sqrt()))
                    .collect();
                let f_tables = radial
                    .eval_f_table(&table_radii)?
                    .into_iter()
                    .map(|row| {
                        ChebyshevInterpolant::new(
                            (0.0, 1.0),
                            row.iter().map(Scalar::to_f64).collect(),
                        )
                    })
                    .collect();
                let harmonics = (0..harmonic_count(params.n, m))
                    .map(|l| grid.sphere.sample(HarmonicIndex::new(m, l)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(DegreeData {
                    radial,
                    images,
                    f_tables,
                    harmonics,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExteriorBasis {
            params: params.clone(),
            space,
            truncation,
            grid,
            degrees,
        })
    }

    pub fn decay_constant(&self) -> f64 {
        decay_constant(self.params.s)
    }

    /// Largest degree actually built.
    pub fn m_top(&self) -> usize {
        self.degrees.len().saturating_sub(1)
    }

    fn degree(&self, m: usize) -> Result<&DegreeData<T>> {
        self.degrees
            .get(m)
            .ok_or_else(|| Error::Dependency(format!("no radial basis built for m = {m}")))
    }

    fn check_index(&self, idx: BasisIndex) -> Result<&DegreeData<T>> {
        let data = self.degree(idx.m)?;
        if idx.k >= data.images.len() {
            return Err(Error::Dependency(format!(
                "radial profile for {idx} not built"
            )));
        }
        if idx.l >= data.harmonics.len() {
            return Err(Error::Index(format!(
                "harmonic order out of range in {idx}"
            )));
        }
        Ok(data)
    }

    pub fn radial_basis(&self, m: usize) -> Result<&RadialBasis<T>> {
        Ok(&self.degree(m)?.radial)
    }

    /// All built indices in `(m, k, l)` order.
    pub fn indices(&self) -> Vec<BasisIndex> {
        let mut out = Vec::new();
        for (m, data) in self.degrees.iter().enumerate() {
            for k in 0..data.images.len() {
                for l in 0..data.harmonics.len() {
                    out.push(BasisIndex::new(m, k, l));
                }
            }
        }
        out
    }

    /// Radial factor of `u_{m,k,l}` at the grid radii.
    pub fn radial_image(&self, m: usize, k: usize) -> Result<&[f64]> {
        self.check_index(BasisIndex::new(m, k, 0))
            .map(|data| data.images[k].as_slice())
    }

    /// `‖u_{m,k,l}‖_{L²(B₁)}` from the radial factor (harmonics are orthonormal).
    pub fn image_norm(&self, m: usize, k: usize) -> Result<f64> {
        let image = self.radial_image(m, k)?;
        Ok(image
            .iter()
            .zip(&self.grid.radial_weights)
            .map(|(u, w)| w * u * u)
            .sum::<f64>()
            .sqrt())
    }

    /// `u_{m,k,l} = A₀ f_{m,k,l}` sampled on the interior grid.
    pub fn apply_a0_basis(&self, idx: BasisIndex) -> Result<InteriorField> {
        let data = self.check_index(idx)?;
        let harmonic = &data.harmonics[idx.l];
        let image = &data.images[idx.k];
        let mut values = Vec::with_capacity(self.grid.len());
        for u in image {
            values.extend(harmonic.iter().map(|h| u * h));
        }
        Ok(InteriorField {
            grid: self.grid.clone(),
            values,
        })
    }

    /// `F_{m,k}(ρ)` at any `ρ ∈ [0, 1)` from the Chebyshev table.
    pub fn f_value(&self, m: usize, k: usize, rho: f64) -> Result<f64> {
        let data = self.check_index(BasisIndex::new(m, k, 0))?;
        Ok(data.f_tables[k].eval(rho * rho))
    }

    /// `u_{m,k,l}(x)` at an arbitrary interior point.
    pub fn image_at(&self, idx: BasisIndex, x: &[f64]) -> Result<f64> {
        self.check_index(idx)?;
        let rho = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if rho >= 1.0 {
            return Err(param(format!("point with |x| = {rho} is not interior")));
        }
        let direction: Vec<f64> = if rho == 0.0 {
            let mut e = vec![0.0; self.params.n];
            e[self.params.n - 1] = 1.0;
            e
        } else {
            x.iter().map(|c| c / rho).collect()
        };
        let h = spherical_harmonic(self.params.n, idx.harmonic(), &direction)?;
        let envelope = (1.0 - rho * rho).powf(self.params.s) * rho.powi(idx.m as i32);
        Ok(self.decay_constant() * envelope * h * self.f_value(idx.m, idx.k, rho)?)
    }

    /// Radial factor `ρ_{m,k}(r) = r^{-n} (r² − 1)^{-s} g̃_{m,k}(r)` on [2, 3].
    pub fn exterior_radial(&self, m: usize, k: usize, r: &T) -> Result<T> {
        let profile = self.degree(m)?.radial.profile(k)?;
        let damp = (-(T::from_f64(self.params.s)) * (r.clone() * r.clone() - T::one()).ln()).exp();
        Ok(profile.eval(r) * damp / r.powi(self.params.n as i32))
    }

    /// `f_{m,k,l}(y)` at a point of the annulus.
    pub fn exterior_value(&self, idx: BasisIndex, y: &[T]) -> Result<T> {
        self.check_index(idx)?;
        let r = y
            .iter()
            .fold(T::zero(), |a, c| a + c.clone() * c.clone())
            .sqrt();
        let direction: Vec<T> = y.iter().map(|c| c.clone() / r.clone()).collect();
        let h = spherical_harmonic(self.params.n, idx.harmonic(), &direction)?;
        Ok(self.exterior_radial(idx.m, idx.k, &r)? * h)
    }

    /// `f_{m,k,l}` at the nodes of an annulus rule.
    pub fn annulus_samples(&self, idx: BasisIndex, annulus: &AnnulusRule<T>) -> Result<Vec<T>> {
        self.check_index(idx)?;
        let radial = annulus
            .radial
            .nodes
            .iter()
            .map(|r| self.exterior_radial(idx.m, idx.k, r))
            .collect::<Result<Vec<T>>>()?;
        let harmonic = annulus.sphere.sample(idx.harmonic())?;
        let mut out = Vec::with_capacity(annulus.len());
        for rho in &radial {
            out.extend(harmonic.iter().map(|h| rho.clone() * h.clone()));
        }
        Ok(out)
    }

    /// Largest deviation of the exterior Gram matrix from the identity.
    ///
    /// The annulus Gram matrix factors into a radial part, integrated here with
    /// an independent Gauss rule of `radial_nodes` points, and the harmonic
    /// Gram matrix on the grid's sphere rule.
    pub fn gram_deviation(&self, radial_nodes: usize) -> Result<f64> {
        let rule = gauss_rule::<T>(2.0, 3.0, radial_nodes)?;
        // ρ_a ρ_b r^{n−1} = w(r) g̃_a g̃_b with the weight of the s-inner product.
        let jac: Vec<T> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(r, w)| w.clone() * self.space.weight(r))
            .collect();
        let mut worst: f64 = 0.0;
        for data in &self.degrees {
            let samples: Vec<Vec<T>> = data
                .radial
                .profiles
                .iter()
                .map(|p| rule.nodes.iter().map(|r| p.eval(r)).collect())
                .collect();
            for a in 0..samples.len() {
                for b in 0..=a {
                    let ip = jac
                        .iter()
                        .zip(samples[a].iter().zip(&samples[b]))
                        .fold(T::zero(), |acc, (w, (x, y))| {
                            acc + w.clone() * x.clone() * y.clone()
                        });
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((ip.to_f64() - target).abs());
                }
            }
        }
        let sphere = &self.grid.sphere;
        let mut harmonics = Vec::new();
        for data in &self.degrees {
            harmonics.extend(data.harmonics.iter());
        }
        for a in 0..harmonics.len() {
            for b in 0..=a {
                let ip: f64 = (0..sphere.len())
                    .map(|q| sphere.weights[q] * harmonics[a][q] * harmonics[b][q])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        Ok(worst)
    }
}

/// Quadrature on the annulus `2 < |y| < 3`, nodes ordered radius-major.
#[derive(Clone, Debug)]
pub struct AnnulusRule<T> {
    pub n: usize,
    pub radial: QuadRule<T>,
    pub sphere: SphereRule<T>,
}

impl<T: Scalar> AnnulusRule<T> {
    pub fn new(n: usize, radial_nodes: usize, sphere_degree: usize) -> Result<Self> {
        Ok(AnnulusRule {
            n,
            radial: gauss_rule::<T>(2.0, 3.0, radial_nodes)?,
            sphere: SphereRule::new(n, sphere_degree)?,
        })
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.sphere.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples `f(r, ω)` at every node.
    pub fn sample<F: Fn(&T, &[T]) -> T>(&self, f: F) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for r in &self.radial.nodes {
            for dir in &self.sphere.directions {
                out.push(f(r, dir));
            }
        }
        out
    }
}

/// Discretized Poisson integral
/// `u(x) = c(n,s) (1 − |x|²)^s ∫ |x − y|^{-n} (|y|² − 1)^{-s} f(y) dy`
/// for data `f` given by its samples on an [`AnnulusRule`].
#[derive(Clone, Debug)]
pub struct PoissonIntegral<T> {
    n: usize,
    s: T,
    constant: T,
    sources: Vec<Vec<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> PoissonIntegral<T> {
    pub fn new(space: WeightedSpace, annulus: &AnnulusRule<T>) -> Result<Self> {
        if annulus.n != space.n {
            return Err(param("annulus rule dimension mismatch"));
        }
        let n = space.n;
        let s = T::from_f64(space.s);
        let mut sources = Vec::with_capacity(annulus.len());
        let mut weights = Vec::with_capacity(annulus.len());
        for (r, wr) in annulus.radial.nodes.iter().zip(&annulus.radial.weights) {
            let damp = (-(s.clone()) * (r.clone() * r.clone() - T::one()).ln()).exp();
            let radial_weight = wr.clone() * r.powi(n as i32 - 1) * damp;
            for (dir, wa) in annulus
                .sphere
                .directions
                .iter()
                .zip(&annulus.sphere.weights)
            {
                sources.push(dir.iter().map(|c| c.clone() * r.clone()).collect());
                weights.push(radial_weight.clone() * wa.clone());
            }
        }
        Ok(PoissonIntegral {
            n,
            s,
            constant: poisson_constant::<T>(n, space.s),
            sources,
            weights,
        })
    }

    /// Applies the integral to several sampled data sets at once; indexed `[data][point]`.
    pub fn apply(&self, data: &[Vec<T>], points: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        for d in data {
            if d.len() != self.sources.len() {
                return Err(param("sample vector does not match the annulus rule"));
            }
        }
        let scaled: Vec<Vec<T>> = data
            .iter()
            .map(|d| {
                d.iter()
                    .zip(&self.weights)
                    .map(|(f, w)| f.clone() * w.clone())
                    .collect()
            })
            .collect();
        let per_point = points
            .par_iter()
            .map(|x| -> Result<Vec<T>> {
                let rho2 = x.iter().fold(T::zero(), |a, c| a + c.clone() * c.clone());
                if x.len() != self.n || rho2.to_f64() >= 1.0 {
                    return Err(param("interior node must lie in the open unit ball"));
                }
                let mut acc = vec![T::zero(); scaled.len()];
                for (q, y) in self.sources.iter().enumerate() {
                    let d2 = x.iter().zip(y).fold(T::zero(), |a, (p, q)| {
                        let d = p.clone() - q.clone();
                        a + d.clone() * d
                    });
                    let kernel = match self.n {
                        1 => T::one() / d2.sqrt(),
                        2 => T::one() / d2,
                        _ => T::one() / (d2.clone() * d2.sqrt()),
                    };
                    for (slot, f) in acc.iter_mut().zip(&scaled) {
                        *slot = slot.clone() + kernel.clone() * f[q].clone();
                    }
                }
                let factor = self.constant.clone() * (T::one() - rho2).powf(&self.s);
                acc.into_iter()
                    .map(|v| {
                        let u = factor.clone() * v;
                        if u.is_finite() {
                            Ok(u)
                        } else {
                            Err(Error::Numeric("Poisson integral".into()))
                        }
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![Vec::with_capacity(points.len()); data.len()];
        for values in per_point {
            for (slot, v) in out.iter_mut().zip(values) {
                slot.push(v);
            }
        }
        Ok(out)
    }
}

/// `A₀ f` at each point for `f` sampled on `annulus`.
pub fn apply_a0_general<T: Scalar>(
    space: WeightedSpace,
    samples: &[T],
    points: &[Vec<T>],
    annulus: &AnnulusRule<T>,
) -> Result<Vec<T>> {
    let mut out = PoissonIntegral::new(space, annulus)?.apply(&[samples.to_vec()], points)?;
    Ok(out.swap_remove(0))
}

/// [`apply_a0_general`] in double precision on an interior grid.
pub fn apply_a0_general_grid(
    space: WeightedSpace,
    samples: &[f64],
    grid: Arc<InteriorGrid>,
    annulus: &AnnulusRule<f64>,
) -> Result<InteriorField> {
    let values = apply_a0_general(space, samples, &grid.points(), annulus)?;
    Ok(InteriorField { grid, values })
}

/// One row of the decay table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayRow {
    pub m: usize,
    pub k: usize,
    pub l: usize,
    pub norm: f64,
    pub bound: f64,
}

/// `‖A₀ f_{m,k,l}‖` for every built index against `c̃ 2^{-m-k}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub n: usize,
    pub s: f64,
    pub decay_constant: f64,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `ln ‖·‖` against `m + k`.
    pub slope: f64,
    pub intercept: f64,
}

impl DecayReport {
    pub fn violations(&self) -> Vec<&DecayRow> {
        self.rows.iter().filter(|r| !(r.norm <= r.bound)).collect()
    }
}

pub fn decay_report<T: Scalar>(basis: &ExteriorBasis<T>) -> Result<DecayReport> {
    let c = basis.decay_constant();
    let rows = basis
        .indices()
        .into_iter()
        .map(|idx| -> Result<DecayRow> {
            let norm = basis.apply_a0_basis(idx)?.norm();
            Ok(DecayRow {
                m: idx.m,
                k: idx.k,
                l: idx.l,
                norm,
                bound: c * 0.5f64.powi(idx.level() as i32),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.norm > 0.0)
        .map(|r| ((r.m + r.k) as f64, r.norm.ln()))
        .unzip();
    let (slope, intercept) = if x.len() >= 2 {
        linear_fit(&x, &y)
    } else {
        (f64::NAN, y.first().copied().unwrap_or(f64::NAN))
    };
    Ok(DecayReport {
        n: basis.params.n,
        s: basis.params.s,
        decay_constant: c,
        rows,
        slope,
        intercept,
    })
}

/// `v_p = u_{p,0,0}/‖u_{p,0,0}‖` and `α₀ = ‖u_{p,0,0}‖^{-1}`.
pub fn make_vp<T: Scalar>(basis: &ExteriorBasis<T>, p: usize) -> Result<(InteriorField, f64)> {
    if p < 2 {
        return Err(param(format!(
            "target degree p must be at least 2, got {p}"
        )));
    }
    if basis.params.n == 1 {
        return Err(param(
            "for n = 1 only degrees 0 and 1 exist; use the truncated Hilbert transform control instead",
        ));
    }
    let mut field = basis.apply_a0_basis(BasisIndex::new(p, 0, 0))?;
    let norm = field.norm();
    field.scale(1.0 / norm);
    Ok((field, 1.0 / norm))
}

/// The discretized control problem `min ‖α‖` subject to `‖Σ α u − v_p‖ ≤ 1/p`.
///
/// The discretized `A₀` is block diagonal over harmonics `(m, l)`; each block
/// maps the radial coefficients `k` to `√(w_i ρ_i^{n−1}) · u_{m,k}(ρ_i)`, and
/// the block matrix depends on `m` only.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub p: usize,
    pub budget: f64,
    pub alpha0: f64,
    /// Block matrix for each degree `m`.
    pub blocks: Vec<DMatrix<f64>>,
    svds: Vec<Svd>,
    /// Projected target for each `(m, l)`.
    rhs: BTreeMap<HarmonicIndex, DVector<f64>>,
    unreachable: f64,
}

/// Minimal-norm control and its diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlSolution {
    pub p: usize,
    pub coefficients: Vec<(BasisIndex, f64)>,
    pub norm: f64,
    pub residual: f64,
    pub budget: f64,
    pub lambda: f64,
    pub alpha0: f64,
    /// `max_k |α_{p,k,0}|`.
    pub mode_max_coefficient: f64,
    /// `‖Σ_k α_{p,k,0} u_{p,k,0}‖`.
    pub mode_mass: f64,
}

impl ControlProblem {
    pub fn new<T: Scalar>(basis: &ExteriorBasis<T>, p: usize) -> Result<Self> {
        let tr = basis.truncation;
        if tr.m_max < p + 2 || tr.k_max < p + 2 || tr.level_max.is_some() {
            return Err(param(format!(
                "control for p = {p} needs rectangular caps of at least ({}, {})",
                p + 2,
                p + 2
            )));
        }
        let (target, alpha0) = make_vp(basis, p)?;
        let grid = &basis.grid;
        let root_w: Vec<f64> = grid.radial_weights.iter().map(|w| w.sqrt()).collect();
        let mut blocks = Vec::new();
        let mut svds = Vec::new();
        let mut rhs = BTreeMap::new();
        let ns = grid.sphere.len();
        let mut captured = 0.0;
        for (m, data) in basis.degrees.iter().enumerate() {
            let block = DMatrix::from_fn(grid.radii.len(), data.images.len(), |i, k| {
                root_w[i] * data.images[k][i]
            });
            svds.push(svd(&block)?);
            blocks.push(block);
            for (l, h) in data.harmonics.iter().enumerate() {
                let b = DVector::from_fn(grid.radii.len(), |i, _| {
                    let row = &target.values[i * ns..(i + 1) * ns];
                    let proj: f64 = (0..ns)
                        .map(|a| grid.sphere.weights[a] * h[a] * row[a])
                        .sum();
                    root_w[i] * proj
                });
                captured += b.norm_squared();
                rhs.insert(HarmonicIndex::new(m, l), b);
            }
        }
        let total = target.norm().powi(2);
        Ok(ControlProblem {
            p,
            budget: 1.0 / p as f64,
            alpha0,
            blocks,
            svds,
            rhs,
            unreachable: (total - captured).max(0.0),
        })
    }

    pub fn solve(&self) -> Result<ControlSolution> {
        let profile =
            TikhonovProfile::from_blocks(self.rhs.iter().map(|(h, b)| (&self.svds[h.m], b)))
                .with_unreachable(self.unreachable);
        let (lambda, residual) = profile.choose_lambda(self.budget, CONTROL_RESIDUAL_TOL)?;
        let mut coefficients = Vec::new();
        let mut norm2 = 0.0;
        let mut mode_max: f64 = 0.0;
        let mut mode_mass = 0.0;
        for (h, b) in &self.rhs {
            let x = tikhonov_solution(&self.svds[h.m], b, lambda);
            norm2 += x.norm_squared();
            if h.m == self.p && h.l == 0 {
                mode_max = x.iter().fold(0.0, |a, v| a.max(v.abs()));
                mode_mass = (&self.blocks[h.m] * &x).norm();
            }
            for (k, v) in x.iter().enumerate() {
                coefficients.push((BasisIndex::new(h.m, k, h.l), *v));
            }
        }
        Ok(ControlSolution {
            p: self.p,
            coefficients,
            norm: norm2.sqrt(),
            residual,
            budget: self.budget,
            lambda,
            alpha0: self.alpha0,
            mode_max_coefficient: mode_max,
            mode_mass,
        })
    }

    /// `‖Σ α u‖² / Σ α²` for coefficients laid out per `(m, l)` block.
    pub fn expansion_ratio(&self, coefficients: &BTreeMap<HarmonicIndex, DVector<f64>>) -> f64 {
        let mut image = 0.0;
        let mut coeff = 0.0;
        for (h, x) in coefficients {
            image += (&self.blocks[h.m] * x).norm_squared();
            coeff += x.norm_squared();
        }
        image / coeff
    }
}

/// Minimal-norm approximation of `v_p` to accuracy `1/p` at the basis truncation.
pub fn min_norm_control<T: Scalar>(basis: &ExteriorBasis<T>, p: usize) -> Result<ControlSolution> {
    ControlProblem::new(basis, p)?.solve()
}

/// One row of the control-growth table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlGrowthRow {
    pub p: usize,
    pub norm: f64,
    pub lower_bound: f64,
    pub residual: f64,
}

/// `‖f‖` for each `p`, with `c₀ 2^p`, `c₀ = 1/(4 c̃)`, and the fitted log-slope.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlGrowth {
    pub n: usize,
    pub s: f64,
    pub rows: Vec<ControlGrowthRow>,
    pub slope: f64,
}

pub fn control_growth<T: Scalar>(basis: &ExteriorBasis<T>, ps: &[usize]) -> Result<ControlGrowth> {
    let c0 = 1.0 / (4.0 * basis.decay_constant());
    let rows = ps
        .iter()
        .map(|&p| -> Result<ControlGrowthRow> {
            let sol = min_norm_control(basis, p)?;
            Ok(ControlGrowthRow {
                p,
                norm: sol.norm,
                lower_bound: c0 * 2f64.powi(p as i32),
                residual: sol.residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.p as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.norm.ln()).collect();
    let slope = if rows.len() >= 2 {
        linear_fit(&x, &y).0
    } else {
        f64::NAN
    };
    Ok(ControlGrowth {
        n: basis.params.n,
        s: basis.params.s,
        rows,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::scalar::WideFloat;

    type W = WideFloat<256>;

    #[test]
    fn poisson_constant_matches_sphere_product() {
        for n in 1..=3 {
            for s in [0.25, 0.5, 0.75] {
                let c: f64 = poisson_constant(n, s);
                let area = crate::numkit::harmonics::sphere_area::<f64>(n);
                assert!((c * area - decay_constant(s)).abs() < 1e-14);
            }
        }
        let c1: f64 = poisson_constant(1, 0.5);
        assert!((c1 - 1.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn truncation_shapes() {
        let t = Truncation::level(3);
        assert_eq!(t.k_cap(0), Some(3));
        assert_eq!(t.k_cap(3), Some(0));
        assert_eq!(t.k_cap(4), None);
        let r = Truncation::rectangle(2, 5);
        assert!(r.contains(2, 5));
        assert!(!r.contains(3, 0));
    }

    #[test]
    fn images_separate_and_satisfy_bound() {
        let params = ProblemParams::new(2, 0.5).unwrap();
        let basis = ExteriorBasis::<W>::build(&params, Truncation::level(5)).unwrap();
        let c = basis.decay_constant();
        for idx in basis.indices() {
            let field = basis.apply_a0_basis(idx).unwrap();
            assert!(field.norm() <= c * 0.5f64.powi(idx.level() as i32));
        }
        let field = basis.apply_a0_basis(BasisIndex::new(2, 1, 1)).unwrap();
        let ns = basis.grid.sphere.len();
        let h = basis.grid.sphere.sample(HarmonicIndex::new(2, 1)).unwrap();
        let i = 40;
        let mut ratio: Option<f64> = None;
        for a in 0..ns {
            if h[a].abs() > 0.1 {
                let r = field.values[i * ns + a] / h[a];
                if let Some(r0) = ratio {
                    assert!(((r - r0) / r0).abs() < 1e-10);
                } else {
                    ratio = Some(r);
                }
            }
        }
    }

    #[test]
    fn off_grid_evaluation_matches_grid() {
        let params = ProblemParams::new(1, 0.25).unwrap();
        let basis = ExteriorBasis::<W>::build(&params, Truncation::level(4)).unwrap();
        let idx = BasisIndex::new(1, 2, 0);
        let field = basis.apply_a0_basis(idx).unwrap();
        let x = basis.grid.point(17, 1);
        let direct = basis.image_at(idx, &x).unwrap();
        let grid_value = field.values[17 * 2 + 1];
        assert!((direct - grid_value).abs() <= 1e-12 * grid_value.abs().max(1e-300) + 1e-18);
    }

    #[test]
    fn vp_requires_higher_dimension() {
        let params = ProblemParams::new(1, 0.5).unwrap();
        let basis = ExteriorBasis::<W>::build(&params, Truncation::rectangle(1, 4)).unwrap();
        assert!(make_vp(&basis, 2).is_err());
    }
}
