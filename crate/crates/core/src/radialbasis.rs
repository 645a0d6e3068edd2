//! Radial profiles orthonormal in the weighted space `L²_s([2, 3])`.
//!
//! The inner product is `(f, g)_s = ∫₂³ r^{-n-1} (r² − 1)^{-2s} f g dr`. For a
//! degree `m` the generators are `r^{-m}, r^{-m-1}, …`; profile `k` is the
//! Gram–Schmidt image of the `(k+1)`-th generator, so it is orthogonal to
//! `r^{-(m+j)}` for every `j < k`. That makes the moments
//! `∫₂³ g r^{-(m+2j)} dr` vanish for `2j ≤ k − 1` and gives the Poisson images
//! their `2^{-m-k}` decay.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::numkit::linalg::{spd_condition, Dense};
use crate::numkit::quad::{gauss_rule, QuadRule};
use crate::numkit::scalar::Scalar;

/// Largest `m + k` the default pipelines request.
pub const DEFAULT_INDEX_CAP: usize = 24;
/// Digits of headroom required between the Gram condition estimate and the working precision.
pub const CONDITION_HEADROOM_DIGITS: f64 = 12.0;

/// The weighted space `L²_s([2, 3])` for a dimension and fractional order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSpace {
    pub n: usize,
    pub s: f64,
}

impl WeightedSpace {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        crate::numkit::harmonics::check_dimension(n)?;
        if !(s > 0.0 && s < 1.0) {
            return Err(param(format!("s must lie in (0, 1), got {s}")));
        }
        Ok(WeightedSpace { n, s })
    }

    /// `w(r) = r^{-n-1} (r² − 1)^{-2s}`.
    pub fn weight<T: Scalar>(&self, r: &T) -> T {
        let base = r.clone() * r.clone() - T::one();
        let power = (-T::from_f64(2.0 * self.s) * base.ln()).exp();
        power / r.powi(self.n as i32 + 1)
    }
}

/// Gauss rule on [2, 3] with the weight folded into the quadrature weights.
#[derive(Clone, Debug)]
pub struct RadialQuadrature<T> {
    pub space: WeightedSpace,
    pub rule: QuadRule<T>,
    /// `W_q · w(r_q)`.
    pub weighted: Vec<T>,
    /// `1 / r_q`.
    pub inv_r: Vec<T>,
}

impl<T: Scalar> RadialQuadrature<T> {
    pub fn new(space: WeightedSpace, count: usize) -> Result<Self> {
        let rule = gauss_rule::<T>(2.0, 3.0, count)?;
        let weighted = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(r, w)| w.clone() * space.weight(r))
            .collect();
        let inv_r = rule.nodes.iter().map(|r| T::one() / r.clone()).collect();
        Ok(RadialQuadrature {
            space,
            rule,
            weighted,
            inv_r,
        })
    }

    /// Node count that resolves the Gram moments to the working precision of `T`.
    pub fn default_count() -> usize {
        (T::MANTISSA_BITS / 3 + 24).max(48)
    }

    pub fn for_precision(space: WeightedSpace) -> Result<Self> {
        Self::new(space, Self::default_count())
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    /// `(f, g)_s` for radial functions given as closures.
    pub fn inner_product<F, G>(&self, f: F, g: G) -> Result<T>
    where
        F: Fn(&T) -> T,
        G: Fn(&T) -> T,
    {
        let mut acc = T::zero();
        for (r, w) in self.rule.nodes.iter().zip(&self.weighted) {
            let term = f(r) * g(r);
            if !term.is_finite() {
                return Err(Error::Numeric(format!(
                    "inner product integrand at r = {:.6}",
                    r.to_f64()
                )));
            }
            acc = acc + w.clone() * term;
        }
        Ok(acc)
    }

    /// `μ_p = (r^{-p/2}, r^{-p/2})_s = ∫₂³ w(r) r^{-p} dr` for `p` in `range`.
    pub fn power_moments(&self, lo: usize, hi: usize) -> Vec<T> {
        let mut out = vec![T::zero(); hi + 1 - lo];
        for (t, w) in self.inv_r.iter().zip(&self.weighted) {
            let mut tp = w.clone() * t.powi(lo as i32);
            for slot in out.iter_mut() {
                *slot = slot.clone() + tp.clone();
                tp = tp * t.clone();
            }
        }
        out
    }
}

/// `(f, g)_s` evaluated with the default quadrature for `T`.
pub fn inner_product_s<T, F, G>(f: F, g: G, space: WeightedSpace) -> Result<T>
where
    T: Scalar,
    F: Fn(&T) -> T,
    G: Fn(&T) -> T,
{
    RadialQuadrature::<T>::for_precision(space)?.inner_product(f, g)
}

/// `g̃_{m,k}(r) = Σ_j coeffs[j] · r^{-(m+j)}`, `0 ≤ j ≤ k`.
#[derive(Clone, Debug)]
pub struct RadialProfile<T> {
    pub m: usize,
    pub k: usize,
    pub coeffs: Vec<T>,
}

impl<T: Scalar> RadialProfile<T> {
    pub fn eval(&self, r: &T) -> T {
        let t = T::one() / r.clone();
        self.eval_inverse(&t)
    }

    /// Evaluation at `t = 1/r`.
    pub fn eval_inverse(&self, t: &T) -> T {
        let mut acc = T::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * t.clone() + c.clone();
        }
        acc * t.powi(self.m as i32)
    }
}

/// Highest `j` with `∫ g_{m,k} r^{-(m+2j)} dr = 0`, or `None` for `k = 0`.
pub fn vanishing_order(k: usize) -> Option<usize> {
    match k {
        0 => None,
        k if k % 2 == 1 => Some((k - 1) / 2),
        k => Some(k / 2 - 1),
    }
}

/// Profiles `g̃_{m,0..=k_max}` with construction diagnostics.
#[derive(Clone, Debug)]
pub struct RadialBasis<T> {
    pub m: usize,
    pub profiles: Vec<RadialProfile<T>>,
    /// Condition estimates of the leading generator Gram blocks.
    pub condition: Vec<f64>,
    /// `max |(g̃_i, g̃_j)_s − δ_ij|`.
    pub gram_residual: f64,
    /// `max |moment(j)|` over `k ≥ 1`, `j ≤ k₀(k)`.
    pub moment_residual: f64,
    pub quadrature: RadialQuadrature<T>,
}

fn g_inner<T: Scalar>(gram: &Dense<T>, a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        let mut row = T::zero();
        for (j, bj) in b.iter().enumerate() {
            row = row + gram[i][j].clone() * bj.clone();
        }
        acc = acc + ai.clone() * row;
    }
    acc
}

/// Gram–Schmidt on `r^{-m}, …, r^{-m-k_max}` under `(·,·)_s`.
///
/// The generator Gram matrix is condition-estimated for every prefix; if the
/// estimate exceeds `10^{digits − 12}` a conditioning error names the first
/// failing `k`.
pub fn build_radial_basis<T: Scalar>(
    m: usize,
    k_max: usize,
    quadrature: &RadialQuadrature<T>,
) -> Result<RadialBasis<T>> {
    let size = k_max + 1;
    let moments = quadrature.power_moments(2 * m, 2 * m + 2 * k_max);
    let gram: Dense<T> = (0..size)
        .map(|i| (0..size).map(|j| moments[i + j].clone()).collect())
        .collect();
    if gram.iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("generator Gram matrix for m = {m}")));
    }

    let budget = 10f64.powf(T::decimal_digits() - CONDITION_HEADROOM_DIGITS);
    let mut condition = Vec::with_capacity(size);
    for k in 0..size {
        let block: Dense<T> = gram[..=k].iter().map(|row| row[..=k].to_vec()).collect();
        let estimate = spd_condition(&block);
        if !(estimate <= budget) {
            return Err(Error::Conditioning {
                m,
                k,
                estimate,
                budget,
            });
        }
        condition.push(estimate);
    }

    // Modified Gram–Schmidt on coefficient vectors, two passes.
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(size);
    for k in 0..size {
        let mut v = vec![T::zero(); size];
        v[k] = T::one();
        for _pass in 0..2 {
            for q in &basis {
                let proj = g_inner(&gram, q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi = vi.clone() - proj.clone() * qi.clone();
                }
            }
        }
        let norm = g_inner(&gram, &v, &v).sqrt();
        for vi in v.iter_mut() {
            *vi = vi.clone() / norm.clone();
        }
        basis.push(v);
    }

    let mut gram_residual: f64 = 0.0;
    for i in 0..size {
        for j in 0..=i {
            let target = if i == j { T::one() } else { T::zero() };
            let dev = (g_inner(&gram, &basis[i], &basis[j]) - target)
                .abs()
                .to_f64();
            gram_residual = gram_residual.max(dev);
        }
    }
    let mut moment_residual: f64 = 0.0;
    for (k, coeffs) in basis.iter().enumerate() {
        if let Some(k0) = vanishing_order(k) {
            for j in 0..=k0 {
                let mut e = vec![T::zero(); size];
                e[2 * j] = T::one();
                moment_residual = moment_residual.max(g_inner(&gram, coeffs, &e).abs().to_f64());
            }
        }
    }

    let profiles = basis
        .into_iter()
        .enumerate()
        .map(|(k, mut coeffs)| {
            coeffs.truncate(k + 1);
            RadialProfile { m, k, coeffs }
        })
        .collect();
    Ok(RadialBasis {
        m,
        profiles,
        condition,
        gram_residual,
        moment_residual,
        quadrature: quadrature.clone(),
    })
}

impl<T: Scalar> RadialBasis<T> {
    pub fn k_max(&self) -> usize {
        self.profiles.len() - 1
    }

    pub fn profile(&self, k: usize) -> Result<&RadialProfile<T>> {
        self.profiles.get(k).ok_or_else(|| {
            Error::Dependency(format!("radial profile (m={}, k={k}) not built", self.m))
        })
    }

    /// Values `g̃_k(r_q)` at the quadrature nodes, indexed `[k][q]`.
    pub fn node_values(&self) -> Vec<Vec<T>> {
        self.profiles
            .iter()
            .map(|p| {
                self.quadrature
                    .inv_r
                    .iter()
                    .map(|t| p.eval_inverse(t))
                    .collect()
            })
            .collect()
    }

    /// `∫₂³ w(r) g̃_k(r) r^{-(m+2j)} dr`.
    pub fn moment(&self, k: usize, j: usize) -> Result<T> {
        let profile = self.profile(k)?;
        let q = &self.quadrature;
        let power = (self.m + 2 * j) as i32;
        Ok(q.inv_r
            .iter()
            .zip(&q.weighted)
            .fold(T::zero(), |acc, (t, w)| {
                acc + w.clone() * profile.eval_inverse(t) * t.powi(power)
            }))
    }

    /// `F_{m,k}(ρ) = ∫₂³ w(r) g̃_k(r) r^{-m} / (1 − ρ²/r²) dr` by direct quadrature,
    /// for every built `k` and every radius in `radii`. Indexed `[k][i]`.
    pub fn eval_f_table(&self, radii: &[T]) -> Result<Vec<Vec<T>>> {
        for r in radii {
            let v = r.to_f64();
            if !(0.0..1.0).contains(&v) {
                return Err(param(format!("F is evaluated on [0, 1), got {v}")));
            }
        }
        let values = self.node_values();
        let q = &self.quadrature;
        let tm: Vec<T> = q
            .inv_r
            .iter()
            .zip(&q.weighted)
            .map(|(t, w)| w.clone() * t.powi(self.m as i32))
            .collect();
        let mut out = vec![Vec::with_capacity(radii.len()); self.profiles.len()];
        for rho in radii {
            let rho2 = rho.clone() * rho.clone();
            let kernel: Vec<T> = q
                .inv_r
                .iter()
                .zip(&tm)
                .map(|(t, base)| base.clone() / (T::one() - rho2.clone() * t.clone() * t.clone()))
                .collect();
            for (k, vals) in values.iter().enumerate() {
                let f = kernel
                    .iter()
                    .zip(vals)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
                out[k].push(f);
            }
        }
        Ok(out)
    }

    /// `F_{m,k}(ρ)` by direct quadrature.
    pub fn eval_f(&self, k: usize, rho: &T) -> Result<T> {
        self.profile(k)?;
        let mut table = self.eval_f_table(std::slice::from_ref(rho))?;
        Ok(table.swap_remove(k).swap_remove(0))
    }

    /// Truncated series `Σ_{j<terms} ρ^{2j} · moment(j)`.
    pub fn eval_f_series(&self, k: usize, rho: &T, terms: usize) -> Result<T> {
        let rho2 = rho.clone() * rho.clone();
        let mut power = T::one();
        let mut acc = T::zero();
        for j in 0..terms {
            acc = acc + power.clone() * self.moment(k, j)?;
            power = power * rho2.clone();
        }
        Ok(acc)
    }

    /// Persistable form with decimal coefficient strings.
    pub fn to_document(&self) -> BasisDocument {
        BasisDocument {
            n: self.quadrature.space.n,
            s: self.quadrature.space.s,
            m: self.m,
            precision_bits: T::MANTISSA_BITS,
            quad_nodes: self.quadrature.len(),
            coefficients: self
                .profiles
                .iter()
                .map(|p| p.coeffs.iter().map(Scalar::to_decimal).collect())
                .collect(),
            condition_estimates: self.condition.clone(),
            gram_residual: self.gram_residual,
            moment_residual: self.moment_residual,
        }
    }
}

/// Serialized profiles for one `(n, s, m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisDocument {
    pub n: usize,
    pub s: f64,
    pub m: usize,
    pub precision_bits: usize,
    pub quad_nodes: usize,
    /// `coefficients[k][j]` multiplies `r^{-(m+j)}`.
    pub coefficients: Vec<Vec<String>>,
    pub condition_estimates: Vec<f64>,
    pub gram_residual: f64,
    pub moment_residual: f64,
}

impl BasisDocument {
    /// Parse the coefficients back at precision `T`.
    pub fn profiles<T: Scalar>(&self) -> Result<Vec<RadialProfile<T>>> {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let coeffs = row
                    .iter()
                    .map(|text| {
                        T::parse_decimal(text)
                            .ok_or_else(|| param(format!("unparsable coefficient {text:?}")))
                    })
                    .collect::<Result<Vec<T>>>()?;
                Ok(RadialProfile {
                    m: self.m,
                    k,
                    coeffs,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::scalar::WideFloat;

    type W = WideFloat<256>;

    fn space(n: usize, s: f64) -> WeightedSpace {
        WeightedSpace::new(n, s).unwrap()
    }

    #[test]
    fn constant_inner_product_matches_closed_form() {
        let value: f64 = inner_product_s(|_| 1.0, |_| 1.0, space(1, 0.5)).unwrap();
        let exact = 0.5 * 1.5f64.ln() - 1.0 / 6.0;
        assert!((value - exact).abs() < 1e-14);
        let zero: f64 = inner_product_s(|r| r * r, |_| 0.0, space(2, 0.3)).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn first_profile_is_normalized_constant_for_m0() {
        let q = RadialQuadrature::<W>::for_precision(space(1, 0.5)).unwrap();
        let basis = build_radial_basis(0, 0, &q).unwrap();
        let c = basis.profiles[0].coeffs[0].to_f64();
        let exact = (0.5 * 1.5f64.ln() - 1.0 / 6.0).powf(-0.5);
        assert!((c - exact).abs() < 1e-12);
        assert!((c - 5.265646).abs() < 1e-6);
    }

    #[test]
    fn orthonormal_with_vanishing_moments() {
        let q = RadialQuadrature::<W>::for_precision(space(2, 0.25)).unwrap();
        let basis = build_radial_basis(3, 12, &q).unwrap();
        assert!(basis.gram_residual < 1e-30);
        assert!(basis.moment_residual < 1e-30);
        // Newest generator carries a positive coefficient.
        for p in &basis.profiles {
            assert!(p.coeffs[p.k] > W::zero());
        }
    }

    #[test]
    fn double_precision_hits_conditioning_guard() {
        let q = RadialQuadrature::<f64>::for_precision(space(1, 0.5)).unwrap();
        match build_radial_basis(0, 10, &q) {
            Err(Error::Conditioning { m, k, .. }) => {
                assert_eq!(m, 0);
                assert!((1..=4).contains(&k));
            }
            other => panic!("expected conditioning error, got {other:?}"),
        }
    }

    #[test]
    fn vanishing_orders() {
        assert_eq!(vanishing_order(0), None);
        assert_eq!(vanishing_order(1), Some(0));
        assert_eq!(vanishing_order(2), Some(0));
        assert_eq!(vanishing_order(5), Some(2));
        assert_eq!(vanishing_order(6), Some(2));
    }

    #[test]
    fn document_round_trip() {
        let q = RadialQuadrature::<W>::for_precision(space(1, 0.75)).unwrap();
        let basis = build_radial_basis(1, 4, &q).unwrap();
        let doc = basis.to_document();
        let back = doc.profiles::<W>().unwrap();
        for (a, b) in basis.profiles.iter().zip(&back) {
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                let rel = ((x.clone() - y.clone()) / x.clone()).abs().to_f64();
                assert!(rel < 1e-70);
            }
        }
    }

    use num_traits::Zero;
}
