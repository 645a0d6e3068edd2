//! Real orthonormal spherical harmonics on the unit sphere of R^n, n ∈ {1, 2, 3}.
//!
//! For n = 1 the sphere is the two-point set {−1, 1} with counting measure.

use serde::{Deserialize, Serialize};

use super::quad::{gauss_rule, trapezoid_periodic};
use super::scalar::Scalar;
use crate::error::{param, Error, Result};

/// Degree `m` and order `l` of a real spherical harmonic.
///
/// Orders for n = 3: `l = 0` is the zonal harmonic, `l = 2j − 1` carries
/// `cos(jφ)` and `l = 2j` carries `sin(jφ)`. For n = 2, `l = 0` is the cosine
/// mode and `l = 1` the sine mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub m: usize,
    pub l: usize,
}

impl HarmonicIndex {
    pub fn new(m: usize, l: usize) -> Self {
        HarmonicIndex { m, l }
    }
}

pub fn check_dimension(n: usize) -> Result<()> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(param(format!("dimension must be 1, 2 or 3, got {n}")))
    }
}

/// Number of linearly independent harmonics of degree `m` (zero if none).
pub fn harmonic_count(n: usize, m: usize) -> usize {
    match n {
        1 => usize::from(m <= 1),
        2 => {
            if m == 0 {
                1
            } else {
                2
            }
        }
        3 => 2 * m + 1,
        _ => 0,
    }
}

/// All harmonic indices of degree `m`.
pub fn harmonic_indices(n: usize, m: usize) -> Vec<HarmonicIndex> {
    (0..harmonic_count(n, m))
        .map(|l| HarmonicIndex::new(m, l))
        .collect()
}

fn validate_index(n: usize, idx: HarmonicIndex) -> Result<()> {
    check_dimension(n)?;
    if idx.l >= harmonic_count(n, idx.m) {
        return Err(Error::Index(format!(
            "harmonic (m={}, l={}) does not exist for n={}",
            idx.m, idx.l, n
        )));
    }
    Ok(())
}

/// Real and imaginary parts of `(x + iy)^power`.
fn complex_power<T: Scalar>(x: &T, y: &T, power: usize) -> (T, T) {
    let mut re = T::one();
    let mut im = T::zero();
    for _ in 0..power {
        let next_re = re.clone() * x.clone() - im.clone() * y.clone();
        im = re * y.clone() + im * x.clone();
        re = next_re;
    }
    (re, im)
}

/// `P_m^μ(z) / (1 − z²)^{μ/2}` without the Condon–Shortley phase.
fn reduced_legendre<T: Scalar>(m: usize, mu: usize, z: &T) -> T {
    let mut diag = T::one();
    for i in 1..=mu {
        diag = diag * T::from_i64(2 * i as i64 - 1);
    }
    if m == mu {
        return diag;
    }
    let mut prev = diag;
    let mut cur = z.clone() * T::from_i64(2 * mu as i64 + 1) * prev.clone();
    for l in (mu + 2)..=m {
        let next = (T::from_i64(2 * l as i64 - 1) * z.clone() * cur.clone()
            - T::from_i64((l + mu - 1) as i64) * prev)
            / T::from_i64((l - mu) as i64);
        prev = cur;
        cur = next;
    }
    cur
}

/// Value of the orthonormal real harmonic `idx` at a unit vector.
pub fn spherical_harmonic<T: Scalar>(n: usize, idx: HarmonicIndex, direction: &[T]) -> Result<T> {
    validate_index(n, idx)?;
    if direction.len() != n {
        return Err(param(format!(
            "direction has {} components, expected {n}",
            direction.len()
        )));
    }
    let norm2: f64 = direction.iter().map(|c| c.to_f64().powi(2)).sum();
    if (norm2 - 1.0).abs() > 1e-8 {
        return Err(param(format!(
            "direction is not a unit vector (|ω|² = {norm2})"
        )));
    }
    let two = T::from_f64(2.0);
    let value = match n {
        1 => {
            let base = T::one() / two.sqrt();
            if idx.m == 0 {
                base
            } else {
                base * direction[0].clone()
            }
        }
        2 => {
            if idx.m == 0 {
                T::one() / (two * T::pi()).sqrt()
            } else {
                let (re, im) = complex_power(&direction[0], &direction[1], idx.m);
                let part = if idx.l == 0 { re } else { im };
                part / T::pi().sqrt()
            }
        }
        _ => {
            let m = idx.m;
            let mu = idx.l.div_ceil(2);
            let mut ratio = T::one();
            for i in (m - mu + 1)..=(m + mu) {
                ratio = ratio * T::from_i64(i as i64);
            }
            let mut norm =
                (T::from_i64(2 * m as i64 + 1) / (T::from_f64(4.0) * T::pi() * ratio)).sqrt();
            if mu > 0 {
                norm = norm * two.sqrt();
            }
            let (re, im) = complex_power(&direction[0], &direction[1], mu);
            let azimuthal = if idx.l == 0 || idx.l % 2 == 1 { re } else { im };
            norm * reduced_legendre(m, mu, &direction[2]) * azimuthal
        }
    };
    Ok(value)
}

/// Product quadrature on the unit sphere.
#[derive(Clone, Debug)]
pub struct SphereRule<T> {
    pub n: usize,
    pub directions: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> SphereRule<T> {
    /// Rule integrating products of harmonics of total degree `≤ degree` exactly.
    pub fn new(n: usize, degree: usize) -> Result<Self> {
        check_dimension(n)?;
        match n {
            1 => Ok(SphereRule {
                n,
                directions: vec![vec![-T::one()], vec![T::one()]],
                weights: vec![T::one(), T::one()],
            }),
            2 => {
                let rule = trapezoid_periodic::<T>(degree + 1)?;
                let directions = rule
                    .nodes
                    .iter()
                    .map(|phi| vec![phi.cos(), phi.sin()])
                    .collect();
                Ok(SphereRule {
                    n,
                    directions,
                    weights: rule.weights,
                })
            }
            _ => {
                let polar = gauss_rule::<T>(-1.0, 1.0, (degree / 2 + 1).max(2))?;
                let azimuth = trapezoid_periodic::<T>(degree + 1)?;
                let trig: Vec<(T, T)> = azimuth.nodes.iter().map(|p| (p.cos(), p.sin())).collect();
                let mut directions = Vec::with_capacity(polar.len() * trig.len());
                let mut weights = Vec::with_capacity(polar.len() * trig.len());
                for (z, wz) in polar.nodes.iter().zip(&polar.weights) {
                    let rho = (T::one() - z.clone() * z.clone()).sqrt();
                    for ((c, s), wp) in trig.iter().zip(&azimuth.weights) {
                        directions.push(vec![
                            rho.clone() * c.clone(),
                            rho.clone() * s.clone(),
                            z.clone(),
                        ]);
                        weights.push(wz.clone() * wp.clone());
                    }
                }
                Ok(SphereRule {
                    n,
                    directions,
                    weights,
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Samples of harmonic `idx` at every direction.
    pub fn sample(&self, idx: HarmonicIndex) -> Result<Vec<T>> {
        self.directions
            .iter()
            .map(|d| spherical_harmonic(self.n, idx, d))
            .collect()
    }

    /// Surface measure of the sphere.
    pub fn area(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, w| a + w.clone())
    }
}

/// Surface measure |S^{n−1}| (2 for the two-point sphere).
pub fn sphere_area<T: Scalar>(n: usize) -> T {
    match n {
        1 => T::from_f64(2.0),
        2 => T::from_f64(2.0) * T::pi(),
        _ => T::from_f64(4.0) * T::pi(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(n: usize, max_m: usize) -> f64 {
        let rule = SphereRule::<f64>::new(n, 2 * max_m + 2).unwrap();
        let mut idx = Vec::new();
        for m in 0..=max_m {
            idx.extend(harmonic_indices(n, m));
        }
        let samples: Vec<Vec<f64>> = idx.iter().map(|&i| rule.sample(i).unwrap()).collect();
        let mut worst: f64 = 0.0;
        for a in 0..idx.len() {
            for b in 0..idx.len() {
                let ip: f64 = (0..rule.len())
                    .map(|q| rule.weights[q] * samples[a][q] * samples[b][q])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    #[test]
    fn gram_matrices_are_identity() {
        assert!(gram(1, 1) < 1e-14);
        assert!(gram(2, 15) < 1e-12);
        assert!(gram(3, 15) < 1e-10);
    }

    #[test]
    fn named_values() {
        let v = spherical_harmonic(2, HarmonicIndex::new(0, 0), &[0.6, 0.8]).unwrap();
        assert!((v - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        let v = spherical_harmonic(1, HarmonicIndex::new(1, 0), &[-1.0]).unwrap();
        assert!((v + 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn invalid_order_is_an_index_error() {
        let err = spherical_harmonic(2, HarmonicIndex::new(0, 1), &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Index(_)));
        assert!(spherical_harmonic(1, HarmonicIndex::new(2, 0), &[1.0]).is_err());
        assert!(spherical_harmonic(3, HarmonicIndex::new(1, 0), &[1.0, 1.0, 0.0]).is_err());
    }
}
