//! Gauss–Legendre rules at any [`Scalar`] precision, plus Chebyshev interpolation.

use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::error::{param, Result};

/// Quadrature rule on a finite interval.
#[derive(Clone, Debug)]
pub struct QuadRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub interval: (T, T),
}

impl<T: Scalar> QuadRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(&T) -> T>(&self, f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (x, w)| acc + w.clone() * f(x))
    }

    /// Weighted sum of values already sampled at the nodes.
    pub fn integrate_values(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.len());
        self.weights
            .iter()
            .zip(values)
            .fold(T::zero(), |acc, (w, v)| acc + w.clone() * v.clone())
    }

    /// The same rule rounded to double precision.
    pub fn to_f64(&self) -> QuadRule<f64> {
        QuadRule {
            nodes: self.nodes.iter().map(Scalar::to_f64).collect(),
            weights: self.weights.iter().map(Scalar::to_f64).collect(),
            interval: (self.interval.0.to_f64(), self.interval.1.to_f64()),
        }
    }
}

/// Legendre polynomial `P_count(x)` and its derivative.
fn legendre_with_derivative<T: Scalar>(count: usize, x: &T) -> (T, T) {
    let mut prev = T::one();
    let mut cur = x.clone();
    for k in 1..count {
        let kf = T::from_i64(k as i64);
        let next = (T::from_i64(2 * k as i64 + 1) * x.clone() * cur.clone() - kf.clone() * prev)
            / (kf + T::one());
        prev = cur;
        cur = next;
    }
    let n = T::from_i64(count as i64);
    let deriv = n * (x.clone() * cur.clone() - prev) / (x.clone() * x.clone() - T::one());
    (cur, deriv)
}

/// Gauss–Legendre rule with `count` nodes on `[a, b]`.
///
/// Nodes start from the classical cosine guess, are polished by Newton's
/// method in double precision and then again in `T` until the update drops
/// below the unit roundoff of `T`.
pub fn gauss_rule<T: Scalar>(a: f64, b: f64, count: usize) -> Result<QuadRule<T>> {
    if count < 2 {
        return Err(param(format!(
            "quadrature needs at least 2 nodes, got {count}"
        )));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(param(format!("invalid quadrature interval ({a}, {b})")));
    }
    let half = count.div_ceil(2);
    let mut ref_nodes: Vec<T> = Vec::with_capacity(half);
    let mut ref_weights: Vec<T> = Vec::with_capacity(half);
    let eps = T::epsilon();
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (count as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(count, &x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut xt = T::from_f64(x);
        let mut dp_final = legendre_with_derivative(count, &xt).1;
        if T::MANTISSA_BITS > 53 {
            for _ in 0..12 {
                let (p, dp) = legendre_with_derivative(count, &xt);
                let dx = p / dp.clone();
                xt = xt - dx.clone();
                dp_final = dp;
                if dx.abs() <= eps.clone() * T::from_f64(4.0) {
                    dp_final = legendre_with_derivative(count, &xt).1;
                    break;
                }
            }
        }
        let w =
            T::from_f64(2.0) / ((T::one() - xt.clone() * xt.clone()) * dp_final.clone() * dp_final);
        ref_nodes.push(xt);
        ref_weights.push(w);
    }
    // ref_nodes are positive and decreasing; assemble in increasing order.
    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for i in 0..half {
        if count % 2 == 1 && i == half - 1 {
            continue;
        }
        nodes.push(-ref_nodes[i].clone());
        weights.push(ref_weights[i].clone());
    }
    for i in (0..half).rev() {
        if count % 2 == 1 && i == half - 1 {
            nodes.push(T::zero());
        } else {
            nodes.push(ref_nodes[i].clone());
        }
        weights.push(ref_weights[i].clone());
    }
    let at = T::from_f64(a);
    let bt = T::from_f64(b);
    let mid = (at.clone() + bt.clone()) / T::from_f64(2.0);
    let rad = (bt.clone() - at.clone()) / T::from_f64(2.0);
    let nodes = nodes
        .into_iter()
        .map(|x| mid.clone() + rad.clone() * x)
        .collect();
    let weights = weights.into_iter().map(|w| rad.clone() * w).collect();
    Ok(QuadRule {
        nodes,
        weights,
        interval: (at, bt),
    })
}

/// Equispaced rule for periodic integrands on `[0, 2π)`.
pub fn trapezoid_periodic<T: Scalar>(count: usize) -> Result<QuadRule<T>> {
    if count < 1 {
        return Err(param("periodic rule needs at least one node"));
    }
    let two_pi = T::pi() * T::from_f64(2.0);
    let step = two_pi.clone() / T::from_i64(count as i64);
    let nodes = (0..count)
        .map(|j| step.clone() * T::from_i64(j as i64))
        .collect();
    Ok(QuadRule {
        nodes,
        weights: vec![step; count],
        interval: (T::zero(), two_pi),
    })
}

/// Polynomial interpolant through values at the nodes of a Gauss–Legendre rule.
#[derive(Clone, Debug)]
pub struct GaussInterpolant {
    nodes: Vec<f64>,
    bary: Vec<f64>,
    values: Vec<f64>,
}

impl GaussInterpolant {
    /// `rule` must come from [`gauss_rule`] (nodes in increasing order).
    pub fn new(rule: &QuadRule<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != rule.len() {
            return Err(param("one value per node is required"));
        }
        let (a, b) = rule.interval;
        let bary = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .enumerate()
            .map(|(j, (x, w))| {
                let t = (2.0 * x - a - b) / (b - a);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * ((1.0 - t * t) * w * 2.0 / (b - a)).sqrt()
            })
            .collect();
        Ok(GaussInterpolant {
            nodes: rule.nodes.clone(),
            bary,
            values,
        })
    }

    /// Barycentric evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((xj, lj), fj) in self.nodes.iter().zip(&self.bary).zip(&self.values) {
            let diff = x - xj;
            if diff == 0.0 {
                return *fj;
            }
            let c = lj / diff;
            num += c * fj;
            den += c;
        }
        num / den
    }
}

/// Polynomial interpolant through values at Chebyshev points of the second kind.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChebyshevInterpolant {
    pub interval: (f64, f64),
    pub points: Vec<f64>,
    pub values: Vec<f64>,
}

impl ChebyshevInterpolant {
    /// Chebyshev points of the second kind on `[a, b]`, in increasing order.
    pub fn points(a: f64, b: f64, count: usize) -> Vec<f64> {
        let deg = (count.max(2) - 1) as f64;
        (0..count.max(2))
            .map(|j| {
                let x = -(std::f64::consts::PI * j as f64 / deg).cos();
                0.5 * (a + b) + 0.5 * (b - a) * x
            })
            .collect()
    }

    pub fn new(interval: (f64, f64), values: Vec<f64>) -> Self {
        let points = Self::points(interval.0, interval.1, values.len());
        ChebyshevInterpolant {
            interval,
            points,
            values,
        }
    }

    /// Barycentric evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.points.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, (&xj, &fj)) in self.points.iter().zip(&self.values).enumerate() {
            let diff = x - xj;
            if diff == 0.0 {
                return fj;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                w *= 0.5;
            }
            let t = w / diff;
            num += t * fj;
            den += t;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_interpolant_reproduces_polynomials() {
        let rule = gauss_rule::<f64>(2.0, 3.0, 12).unwrap();
        let f = |x: f64| x.powi(7) - 3.0 * x * x + 1.0;
        let interp =
            GaussInterpolant::new(&rule, rule.nodes.iter().map(|x| f(*x)).collect()).unwrap();
        for x in [2.0, 2.123, 2.5, 2.99, 3.0] {
            assert!((interp.eval(x) - f(x)).abs() < 1e-11 * f(x).abs());
        }
    }
    use crate::numkit::scalar::WideFloat;
    use num_traits::One;

    #[test]
    fn polynomial_exactness() {
        let rule = gauss_rule::<f64>(0.0, 1.0, 8).unwrap();
        assert!((rule.integrate(|x| x * x) - 1.0 / 3.0).abs() < 1e-14);
        assert!((rule.integrate(|x| x.powi(15)) - 1.0 / 16.0).abs() < 1e-14);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn odd_and_even_counts_are_symmetric() {
        for count in [2, 3, 7, 10] {
            let rule = gauss_rule::<f64>(-1.0, 1.0, count).unwrap();
            for i in 0..count {
                assert!((rule.nodes[i] + rule.nodes[count - 1 - i]).abs() < 1e-15);
                assert!(rule.weights[i] > 0.0);
            }
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn wide_rule_reaches_wide_accuracy() {
        type W = WideFloat<256>;
        let rule = gauss_rule::<W>(2.0, 3.0, 60).unwrap();
        // ∫₂³ r⁻² (r²−1)⁻¹ dr = ½ ln(3/2) − 1/6
        let value = rule
            .integrate(|r| W::one() / (r.clone() * r.clone() * (r.clone() * r.clone() - W::one())));
        let exact = (W::from_f64(1.5)).ln() / W::from_f64(2.0) - W::one() / W::from_f64(6.0);
        assert!((value - exact).abs().to_f64() < 1e-60);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gauss_rule::<f64>(1.0, 1.0, 4).is_err());
        assert!(gauss_rule::<f64>(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn chebyshev_interpolates_smooth_function() {
        let pts = ChebyshevInterpolant::points(0.0, 1.0, 30);
        let interp =
            ChebyshevInterpolant::new((0.0, 1.0), pts.iter().map(|x| (3.0 * x).exp()).collect());
        for x in [0.0, 0.123, 0.5, 0.97, 1.0] {
            assert!((interp.eval(x) - (3.0 * x).exp()).abs() < 1e-13);
        }
    }
}
