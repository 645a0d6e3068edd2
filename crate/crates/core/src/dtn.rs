//! The DtN difference `Γ(q) = Λ_q − Λ₀` in the exterior basis for `n = 1`.
//!
//! `(−Δ)^s` on `(−1, 1)` with zero exterior condition is discretized by
//! piecewise-linear Galerkin on a uniform mesh. On such a mesh the stiffness
//! matrix is Toeplitz and its entries are fourth differences of `|x|^{3−2s}`
//! (or `x² ln|x|` at `s = 1/2`), so no singular quadrature is needed.
//!
//! Entries are computed from the bilinear identity
//! `(Γ(q) f₁, f₂) = ∫ q u₀₁ u₀₂ + ∫ q v₁ u₀₂`, with `v₁` the discrete solution of
//! `((−Δ)^s + q) v₁ = −q u₀₁`. The pointwise route through
//! `(−Δ)^s v₁` on the annulus is available as a cross-check.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{param, Error, Result};
use crate::fracpoisson::{AnnulusRule, BasisIndex, ExteriorBasis};
use crate::numkit::harmonics::harmonic_count;
use crate::numkit::linalg::{generalized_min_eigenpair, svd};
use crate::numkit::linear_fit;
use crate::numkit::scalar::Scalar;

/// Default number of elements on `(−1, 1)`.
pub const DEFAULT_ELEMENTS: usize = 400;
/// Radial Gauss nodes on each half of the 1D annulus for the kernel route.
const KERNEL_ROUTE_NODES: usize = 40;
/// Distance from the boundary excluded by [`FracOp1d::closed_form_residual`];
/// the `(1 − x²)^s` boundary layer converges slowly for small `s`.
pub const INTERIOR_MARGIN: f64 = 0.1;

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Smooth bump `exp(1 − 1/(1 − t²))` on `t² < 1`, with value 1 at the origin.
pub fn smooth_bump(t2: f64) -> f64 {
    if t2 < 1.0 {
        (1.0 - 1.0 / (1.0 - t2)).exp()
    } else {
        0.0
    }
}

/// Normalization of the hypersingular kernel, `(−Δ)^s u(x) = C P.V.∫ (u(x) − u(y)) |x − y|^{-n-2s} dy`.
pub fn kernel_constant(n: usize, s: f64) -> f64 {
    let nh = n as f64 / 2.0;
    s * 4f64.powf(s) * gamma(nh + s) / (PI.powf(nh) * gamma(1.0 - s))
}

/// `ψ((x − center)/radius)` scaled by `amplitude`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.radius;
        self.amplitude * smooth_bump(t * t)
    }
}

/// A potential on `(−1, 1)`: a constant plus a sum of bumps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub constant: f64,
    pub bumps: Vec<Bump>,
}

impl Potential {
    pub fn zero() -> Self {
        Potential::default()
    }

    pub fn constant(value: f64) -> Self {
        Potential {
            constant: value,
            bumps: Vec::new(),
        }
    }

    pub fn bump(center: f64, radius: f64, amplitude: f64) -> Self {
        Potential {
            constant: 0.0,
            bumps: vec![Bump {
                center,
                radius,
                amplitude,
            }],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.constant + self.bumps.iter().map(|b| b.eval(x)).sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.bumps.iter().all(|b| b.amplitude == 0.0)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Potential {
            constant: self.constant * t,
            bumps: self
                .bumps
                .iter()
                .map(|b| Bump {
                    amplitude: b.amplitude * t,
                    ..*b
                })
                .collect(),
        }
    }

    pub fn plus(&self, other: &Potential) -> Self {
        let mut bumps = self.bumps.clone();
        bumps.extend(other.bumps.iter().copied());
        Potential {
            constant: self.constant + other.constant,
            bumps,
        }
    }

    fn bumps_disjoint(&self) -> bool {
        self.bumps.iter().enumerate().all(|(i, a)| {
            self.bumps[i + 1..]
                .iter()
                .all(|b| (a.center - b.center).abs() >= a.radius + b.radius)
        })
    }

    /// `sup |q|` over `[−1, 1]`; exact for disjoint bumps, densely sampled otherwise.
    pub fn sup_norm(&self) -> f64 {
        let mut sup = self.constant.abs();
        if self.bumps_disjoint() {
            for b in &self.bumps {
                sup = sup.max((self.constant + b.amplitude).abs());
            }
            return sup;
        }
        let samples = 20_000;
        for i in 0..=samples {
            let x = -1.0 + 2.0 * i as f64 / samples as f64;
            sup = sup.max(self.eval(x).abs());
        }
        for b in &self.bumps {
            sup = sup.max(self.eval(b.center).abs());
        }
        sup
    }
}

/// Uniform mesh of `(−1, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mesh {
    pub elements: usize,
}

impl Mesh {
    pub fn new(elements: usize) -> Result<Self> {
        if elements < 4 {
            return Err(param(format!(
                "mesh needs at least 4 elements, got {elements}"
            )));
        }
        Ok(Mesh { elements })
    }

    pub fn h(&self) -> f64 {
        2.0 / self.elements as f64
    }

    /// Interior degrees of freedom.
    pub fn dofs(&self) -> usize {
        self.elements - 1
    }

    pub fn interior_nodes(&self) -> Vec<f64> {
        (1..self.elements)
            .map(|i| -1.0 + i as f64 * self.h())
            .collect()
    }

    pub fn refined(&self) -> Mesh {
        Mesh {
            elements: 2 * self.elements,
        }
    }
}

/// A Gauss point of the element quadrature with the two local hat values.
#[derive(Clone, Copy, Debug)]
struct ElementPoint {
    x: f64,
    weight: f64,
    left: Option<usize>,
    right: Option<usize>,
    t: f64,
}

/// Galerkin discretization of `(−Δ)^s` on `(−1, 1)`.
#[derive(Clone, Debug)]
pub struct FracOp1d {
    pub s: f64,
    pub mesh: Mesh,
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    lambda_min: f64,
    ground_state: DVector<f64>,
    points: Vec<ElementPoint>,
}

/// Fourth central difference of `g` at `k`.
fn fourth_difference(k: f64, g: impl Fn(f64) -> f64) -> f64 {
    g(k - 2.0) - 4.0 * g(k - 1.0) + 6.0 * g(k) - 4.0 * g(k + 1.0) + g(k + 2.0)
}

/// Stiffness entry between hats `k` nodes apart on a mesh of width `h`.
fn toeplitz_entry(s: f64, h: f64, k: usize) -> f64 {
    let k = k as f64;
    if (1.0 - 2.0 * s).abs() < 1e-7 {
        let g = |j: f64| if j == 0.0 { 0.0 } else { j * j * j.abs().ln() };
        return fourth_difference(k, g) / (2.0 * PI);
    }
    let expo = 3.0 - 2.0 * s;
    let cg = gamma(s - 0.5) / (PI.sqrt() * 2f64.powf(2.0 - 2.0 * s) * gamma(1.0 - s));
    let stencil = fourth_difference(k, |j: f64| j.abs().powf(expo));
    -cg * h.powf(1.0 - 2.0 * s) * stencil / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s))
}

impl FracOp1d {
    pub fn assemble(mesh: Mesh, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(param(format!("s must lie in (0,1), got {s}")));
        }
        let n = mesh.dofs();
        let h = mesh.h();
        let row: Vec<f64> = (0..n).map(|k| toeplitz_entry(s, h, k)).collect();
        let stiffness = DMatrix::from_fn(n, n, |i, j| row[i.abs_diff(j)]);
        let mass = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 4.0 * h / 6.0,
            1 => h / 6.0,
            _ => 0.0,
        });
        let mut points = Vec::with_capacity(3 * mesh.elements);
        for e in 0..mesh.elements {
            let left_x = -1.0 + e as f64 * h;
            for (xi, w) in GAUSS3 {
                let t = 0.5 * (xi + 1.0);
                points.push(ElementPoint {
                    x: left_x + t * h,
                    weight: 0.5 * h * w,
                    left: (e >= 1).then(|| e - 1),
                    right: (e + 1 < mesh.elements).then_some(e),
                    t,
                });
            }
        }
        let (lambda_min, ground_state) = generalized_min_eigenpair(&stiffness, &mass)?;
        if lambda_min <= 0.0 {
            return Err(Error::Numeric(format!(
                "stiffness is not positive definite (λ = {lambda_min})"
            )));
        }
        Ok(FracOp1d {
            s,
            mesh,
            stiffness,
            mass,
            lambda_min,
            ground_state,
            points,
        })
    }

    /// Smallest eigenvalue of the discrete pencil, approximating `λ_{1,s}`.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Mass-normalized ground state.
    pub fn ground_state(&self) -> &DVector<f64> {
        &self.ground_state
    }

    /// Radius `r₀ = λ_{1,s}/2` of the admissible potential ball.
    pub fn admissible_radius(&self) -> f64 {
        0.5 * self.lambda_min
    }

    /// Positions of the element Gauss points.
    pub fn quadrature_points(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    /// `∫ g φ_i` for `g` given at the Gauss points.
    pub fn load_from_values(&self, values: &[f64]) -> DVector<f64> {
        let mut b = DVector::zeros(self.mesh.dofs());
        for (p, v) in self.points.iter().zip(values) {
            if let Some(i) = p.left {
                b[i] += p.weight * v * (1.0 - p.t);
            }
            if let Some(i) = p.right {
                b[i] += p.weight * v * p.t;
            }
        }
        b
    }

    pub fn load<F: Fn(f64) -> f64>(&self, f: F) -> DVector<f64> {
        let values: Vec<f64> = self.points.iter().map(|p| f(p.x)).collect();
        self.load_from_values(&values)
    }

    /// `∫ q φ_i φ_j`.
    pub fn potential_matrix(&self, q: &Potential) -> DMatrix<f64> {
        let n = self.mesh.dofs();
        let mut out = DMatrix::zeros(n, n);
        if q.is_zero() {
            return out;
        }
        for p in &self.points {
            let wq = p.weight * q.eval(p.x);
            let hats = [(p.left, 1.0 - p.t), (p.right, p.t)];
            for (a, va) in hats {
                for (b, vb) in hats {
                    if let (Some(i), Some(j)) = (a, b) {
                        out[(i, j)] += wq * va * vb;
                    }
                }
            }
        }
        out
    }

    /// Values of a nodal vector at the Gauss points.
    pub fn values_at_points(&self, nodal: &DVector<f64>) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| {
                p.left.map_or(0.0, |i| nodal[i] * (1.0 - p.t))
                    + p.right.map_or(0.0, |i| nodal[i] * p.t)
            })
            .collect()
    }

    /// L² norm of a nodal vector, `sqrt(vᵀ M v)`.
    pub fn l2_norm(&self, nodal: &DVector<f64>) -> f64 {
        nodal.dot(&(&self.mass * nodal)).max(0.0).sqrt()
    }

    /// Cholesky factor of `A + Q`, refusing potentials outside the coercivity margin.
    pub fn factor(&self, q: &Potential) -> Result<Cholesky<f64, Dyn>> {
        let sup_q = q.sup_norm();
        if sup_q >= self.lambda_min {
            return Err(Error::Solvability {
                sup_q,
                lambda_min: self.lambda_min,
            });
        }
        (&self.stiffness + self.potential_matrix(q))
            .cholesky()
            .ok_or(Error::Solvability {
                sup_q,
                lambda_min: self.lambda_min,
            })
    }

    /// Solves `((−Δ)^s + q) v = g` for `g` given by its nodal values.
    pub fn solve_dirichlet(&self, q: &Potential, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if rhs.len() != self.mesh.dofs() {
            return Err(param("right-hand side does not match the mesh"));
        }
        let chol = self.factor(q)?;
        Ok(chol.solve(&(&self.mass * rhs)))
    }

    /// Largest nodal deviation from `(1 − x²)^s` on `|x| ≤ 1 − INTERIOR_MARGIN`
    /// when solving with the constant load `Γ(1 + 2s)`, relative to the peak value 1.
    pub fn closed_form_residual(&self) -> Result<f64> {
        let c = gamma(1.0 + 2.0 * self.s);
        let b = self.load(|_| c);
        let u = self
            .stiffness
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numeric("stiffness factorization".into()))?
            .solve(&b);
        Ok(self
            .mesh
            .interior_nodes()
            .iter()
            .zip(u.iter())
            .filter(|(x, _)| x.abs() <= 1.0 - INTERIOR_MARGIN)
            .map(|(x, v)| (v - (1.0 - x * x).powf(self.s)).abs())
            .fold(0.0, f64::max))
    }
}

/// Matrix of a kernel in the exterior basis, indexed by a list of basis indices.
#[derive(Clone, Debug)]
pub struct GammaMatrix {
    pub n: usize,
    pub indices: Vec<BasisIndex>,
    pub values: DMatrix<f64>,
}

/// One `(row, column, value)` entry of a [`GammaMatrix`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GammaEntry {
    pub row: BasisIndex,
    pub col: BasisIndex,
    pub value: f64,
}

impl GammaMatrix {
    pub fn zeros(n: usize, indices: Vec<BasisIndex>) -> Self {
        let d = indices.len();
        GammaMatrix {
            n,
            indices,
            values: DMatrix::zeros(d, d),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `(1 + max(level₁, level₂))^{n+2}`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let p = self.indices[i].level().max(self.indices[j].level());
        (1.0 + p as f64).powi(self.n as i32 + 2)
    }

    /// `sup (1 + max(m₁+k₁, m₂+k₂))^{n+2} |a|`.
    pub fn x_norm(&self) -> f64 {
        let d = self.len();
        let mut sup = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                sup = sup.max(self.weight(i, j) * self.values[(i, j)].abs());
            }
        }
        sup
    }

    pub fn operator_norm(&self) -> Result<f64> {
        if self.is_empty() {
            return Ok(0.0);
        }
        Ok(svd(&self.values)?
            .singular_values
            .iter()
            .cloned()
            .fold(0.0, f64::max))
    }

    pub fn hilbert_schmidt_norm(&self) -> f64 {
        self.values.norm()
    }

    /// Largest `|a_ij − a_ji| / max(|a_ij|, |a_ji|)`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.len();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i + 1..d {
                let (a, b) = (self.values[(i, j)], self.values[(j, i)]);
                let scale = a.abs().max(b.abs());
                if scale > 0.0 {
                    worst = worst.max((a - b).abs() / scale);
                }
            }
        }
        worst
    }

    pub fn minus(&self, other: &GammaMatrix) -> Result<GammaMatrix> {
        if self.indices != other.indices || self.n != other.n {
            return Err(param("matrices are indexed differently"));
        }
        Ok(GammaMatrix {
            n: self.n,
            indices: self.indices.clone(),
            values: &self.values - &other.values,
        })
    }

    pub fn position(&self, idx: BasisIndex) -> Option<usize> {
        self.indices.iter().position(|i| *i == idx)
    }

    pub fn entries(&self) -> Vec<GammaEntry> {
        let mut out = Vec::with_capacity(self.len() * self.len());
        for (i, row) in self.indices.iter().enumerate() {
            for (j, col) in self.indices.iter().enumerate() {
                out.push(GammaEntry {
                    row: *row,
                    col: *col,
                    value: self.values[(i, j)],
                });
            }
        }
        out
    }
}

/// Precomputed basis data for repeated `Γ(q)` evaluations on one mesh.
#[derive(Clone, Debug)]
pub struct GammaSolver {
    op: FracOp1d,
    indices: Vec<BasisIndex>,
    /// `u₀` at the element Gauss points, one vector per index.
    images: Vec<Vec<f64>>,
    annulus_nodes: Vec<f64>,
    annulus_weights: Vec<f64>,
    /// `f` at the annulus nodes, one vector per index.
    exterior: Vec<Vec<f64>>,
}

impl GammaSolver {
    /// Uses every basis function with `m + k ≤ level_cap`.
    pub fn new<T: Scalar>(
        basis: &ExteriorBasis<T>,
        op: FracOp1d,
        level_cap: usize,
    ) -> Result<Self> {
        if basis.params.n != 1 {
            return Err(param("the DtN solver is one-dimensional"));
        }
        if (basis.params.s - op.s).abs() > 1e-15 {
            return Err(param("basis and operator use different s"));
        }
        let indices: Vec<BasisIndex> = basis
            .indices()
            .into_iter()
            .filter(|i| i.level() <= level_cap)
            .collect();
        if indices.is_empty() {
            return Err(param("no basis functions below the level cap"));
        }
        let xs = op.quadrature_points();
        let images = indices
            .par_iter()
            .map(|idx| {
                xs.iter()
                    .map(|x| basis.image_at(*idx, &[*x]))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let annulus = AnnulusRule::<T>::new(1, KERNEL_ROUTE_NODES, 0)?;
        let mut annulus_nodes = Vec::with_capacity(annulus.len());
        let mut annulus_weights = Vec::with_capacity(annulus.len());
        for (r, w) in annulus.radial.nodes.iter().zip(&annulus.radial.weights) {
            for dir in &annulus.sphere.directions {
                annulus_nodes.push(r.to_f64() * dir[0].to_f64());
                annulus_weights.push(w.to_f64());
            }
        }
        let exterior = indices
            .iter()
            .map(|idx| {
                Ok(basis
                    .annulus_samples(*idx, &annulus)?
                    .iter()
                    .map(Scalar::to_f64)
                    .collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(GammaSolver {
            op,
            indices,
            images,
            annulus_nodes,
            annulus_weights,
            exterior,
        })
    }

    pub fn op(&self) -> &FracOp1d {
        &self.op
    }

    pub fn indices(&self) -> &[BasisIndex] {
        &self.indices
    }

    fn position(&self, idx: BasisIndex) -> Result<usize> {
        self.indices
            .iter()
            .position(|i| *i == idx)
            .ok_or_else(|| Error::Index(format!("{idx} is not in the solver's index set")))
    }

    fn weighted_q(&self, q: &Potential) -> Vec<f64> {
        self.op
            .points
            .iter()
            .map(|p| p.weight * q.eval(p.x))
            .collect()
    }

    /// All entries `a = (Γ(q) f_j, f_i)` over the solver's index set.
    pub fn gamma(&self, q: &Potential) -> Result<GammaMatrix> {
        let d = self.indices.len();
        if q.is_zero() {
            return Ok(GammaMatrix::zeros(1, self.indices.clone()));
        }
        let chol = self.op.factor(q)?;
        let wq = self.weighted_q(q);
        let loads: Vec<DVector<f64>> = self
            .images
            .par_iter()
            .map(|u| {
                let g: Vec<f64> = u
                    .iter()
                    .zip(&self.op.points)
                    .map(|(u, p)| u * q.eval(p.x))
                    .collect();
                self.op.load_from_values(&g)
            })
            .collect();
        let b = DMatrix::from_columns(&loads);
        let x = chol.solve(&b);
        let correction = b.transpose() * x;
        let values = DMatrix::from_fn(d, d, |i, j| {
            let direct: f64 = self.images[i]
                .iter()
                .zip(&self.images[j])
                .zip(&wq)
                .map(|((a, b), w)| w * a * b)
                .sum();
            direct - correction[(i, j)]
        });
        Ok(GammaMatrix {
            n: 1,
            indices: self.indices.clone(),
            values,
        })
    }

    /// A single entry `(Γ(q) f_{first}, f_{second})`.
    pub fn entry(&self, q: &Potential, first: BasisIndex, second: BasisIndex) -> Result<f64> {
        let (i, j) = (self.position(first)?, self.position(second)?);
        if q.is_zero() {
            return Ok(0.0);
        }
        let chol = self.op.factor(q)?;
        let wq = self.weighted_q(q);
        let load = |u: &Vec<f64>| {
            let g: Vec<f64> = u
                .iter()
                .zip(&self.op.points)
                .map(|(u, p)| u * q.eval(p.x))
                .collect();
            self.op.load_from_values(&g)
        };
        let (bi, bj) = (load(&self.images[i]), load(&self.images[j]));
        let direct: f64 = self.images[i]
            .iter()
            .zip(&self.images[j])
            .zip(&wq)
            .map(|((a, b), w)| w * a * b)
            .sum();
        Ok(direct - bj.dot(&chol.solve(&bi)))
    }

    /// The same entry through `∫_{annulus} (−Δ)^s v · f_{second}` with
    /// `(−Δ)^s v(x) = −C ∫ v(y) |x − y|^{-1-2s} dy`.
    pub fn kernel_entry(
        &self,
        q: &Potential,
        first: BasisIndex,
        second: BasisIndex,
    ) -> Result<f64> {
        let (i, j) = (self.position(first)?, self.position(second)?);
        if q.is_zero() {
            return Ok(0.0);
        }
        let chol = self.op.factor(q)?;
        let g: Vec<f64> = self.images[i]
            .iter()
            .zip(&self.op.points)
            .map(|(u, p)| -u * q.eval(p.x))
            .collect();
        let v = chol.solve(&self.op.load_from_values(&g));
        let v_points = self.op.values_at_points(&v);
        let c = kernel_constant(1, self.op.s);
        let exponent = -1.0 - 2.0 * self.op.s;
        let mut total = 0.0;
        for ((x, w), f) in self
            .annulus_nodes
            .iter()
            .zip(&self.annulus_weights)
            .zip(&self.exterior[j])
        {
            let integral: f64 = self
                .op
                .points
                .iter()
                .zip(&v_points)
                .map(|(p, vy)| p.weight * vy * (x - p.x).abs().powf(exponent))
                .sum();
            total += w * f * (-c * integral);
        }
        Ok(total)
    }
}

/// Exponential fits of a Γ matrix.
///
/// `diagonal_rate` fits `|a_ii| ≈ A e^{-c (m+k)}`. `envelope_rate` fits the
/// largest entry at each `max(level₁, level₂)`, and `envelope` is the smallest
/// `C` with `|a| ≤ C e^{-c max(level)} ‖q‖_∞ (2/λ)` for that rate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaDecay {
    pub diagonal_rate: f64,
    pub diagonal_log_intercept: f64,
    pub envelope_rate: f64,
    pub envelope: f64,
    pub levels: Vec<usize>,
    pub diagonal: Vec<f64>,
    pub level_maxima: Vec<f64>,
}

pub fn fit_decay(mat: &GammaMatrix, q_sup: f64, lambda_min: f64) -> Result<GammaDecay> {
    let (mut levels, mut diagonal) = (Vec::new(), Vec::new());
    for (i, idx) in mat.indices.iter().enumerate() {
        let a = mat.values[(i, i)].abs();
        if a > 0.0 {
            levels.push(idx.level());
            diagonal.push(a);
        }
    }
    if levels.len() < 2 || q_sup <= 0.0 {
        return Err(param(
            "need a nonzero potential and at least two nonzero diagonal entries",
        ));
    }
    let x: Vec<f64> = levels.iter().map(|l| *l as f64).collect();
    let y: Vec<f64> = diagonal.iter().map(|a| a.ln()).collect();
    let (slope, diagonal_log_intercept) = linear_fit(&x, &y);

    let top = mat.indices.iter().map(BasisIndex::level).max().unwrap_or(0);
    let mut level_maxima = vec![0.0f64; top + 1];
    let d = mat.len();
    for i in 0..d {
        for j in 0..d {
            let p = mat.indices[i].level().max(mat.indices[j].level());
            level_maxima[p] = level_maxima[p].max(mat.values[(i, j)].abs());
        }
    }
    let (px, py): (Vec<f64>, Vec<f64>) = level_maxima
        .iter()
        .enumerate()
        .filter(|(_, a)| **a > 0.0)
        .map(|(p, a)| (p as f64, a.ln()))
        .unzip();
    let envelope_rate = -linear_fit(&px, &py).0;
    let scale = q_sup * 2.0 / lambda_min;
    let envelope = level_maxima
        .iter()
        .enumerate()
        .map(|(p, a)| a * (envelope_rate * p as f64).exp() / scale)
        .fold(0.0, f64::max);
    Ok(GammaDecay {
        diagonal_rate: -slope,
        diagonal_log_intercept,
        envelope_rate,
        envelope,
        levels,
        diagonal,
        level_maxima,
    })
}

/// How many harmonics of degree `m` the tuple count allows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HarmonicDimension {
    /// The actual dimension of degree-`m` harmonics.
    Exact,
    /// `⌊2 (m+1)^{n−2}⌋`.
    Bound,
}

impl HarmonicDimension {
    pub fn count(self, n: usize, m: usize) -> usize {
        match self {
            HarmonicDimension::Exact => harmonic_count(n, m),
            HarmonicDimension::Bound => {
                (2.0 * (m as f64 + 1.0).powi(n as i32 - 2)).floor() as usize
            }
        }
    }
}

/// Number of `(m, k, l)` with `m + k = p`.
fn level_size(p: usize, n: usize, dim: HarmonicDimension) -> u128 {
    (0..=p).map(|m| dim.count(n, m) as u128).sum()
}

/// `N_p`: tuples `(m₁,k₁,l₁,m₂,k₂,l₂)` with `max(m₁+k₁, m₂+k₂) = p`.
pub fn count_tuples(p: usize, n: usize, dim: HarmonicDimension) -> u128 {
    let exact = level_size(p, n, dim);
    let below: u128 = (0..=p).map(|q| level_size(q, n, dim)).sum();
    2 * exact * below - exact * exact
}

/// `8 (p+1)^{2n+1}`.
pub fn tuple_bound(p: usize, n: usize) -> f64 {
    8.0 * (p as f64 + 1.0).powi(2 * n as i32 + 1)
}

/// `Σ_{p ≤ p_max} (1+p)^{-2(n+2)} N_p`.
pub fn weighted_tuple_sum(n: usize, dim: HarmonicDimension, p_max: usize) -> f64 {
    (0..=p_max)
        .map(|p| count_tuples(p, n, dim) as f64 * (1.0 + p as f64).powi(-2 * (n as i32 + 2)))
        .sum()
}

/// All `(m, k, l)` with `m + k ≤ cap` and the exact harmonic dimension.
pub fn indices_up_to(n: usize, cap: usize) -> Vec<BasisIndex> {
    let mut out = Vec::new();
    for m in 0..=cap {
        for k in 0..=cap - m {
            for l in 0..harmonic_count(n, m) {
                out.push(BasisIndex::new(m, k, l));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_profile() {
        assert_eq!(smooth_bump(0.0), 1.0);
        assert_eq!(smooth_bump(1.0), 0.0);
        let q = Potential::bump(0.5, 0.25, -2.0);
        assert_eq!(q.sup_norm(), 2.0);
        assert_eq!(q.eval(0.8), 0.0);
    }

    #[test]
    fn kernel_constant_half() {
        // C_{1,1/2} = 1/π.
        assert!((kernel_constant(1, 0.5) - 1.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn toeplitz_is_continuous_at_half() {
        let h = 0.01;
        for k in 0..5 {
            let a = toeplitz_entry(0.5, h, k);
            let b = toeplitz_entry(0.5 + 1e-5, h, k);
            assert!(
                (a - b).abs() < 1e-3 * a.abs().max(1e-2),
                "k={k}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn row_sums_decay() {
        // A constant is not in the kernel, but far entries are negative and small.
        for s in [0.25, 0.5, 0.75] {
            let a5 = toeplitz_entry(s, 0.01, 5);
            let a50 = toeplitz_entry(s, 0.01, 50);
            assert!(a5 < 0.0 && a50 < 0.0 && a50.abs() < a5.abs());
            assert!(toeplitz_entry(s, 0.01, 0) > 0.0);
        }
    }

    #[test]
    fn counting_small_cases() {
        assert_eq!(count_tuples(0, 1, HarmonicDimension::Exact), 1);
        assert_eq!(count_tuples(1, 1, HarmonicDimension::Exact), 2 * 2 * 3 - 4);
        assert_eq!(count_tuples(0, 3, HarmonicDimension::Bound), 4);
    }
}
