//! Modified Bessel function of the first kind for real order and argument.

use statrs::function::gamma::ln_gamma;

use crate::error::{param, Error, Result};

/// Arguments up to this value use the ascending series.
pub const SERIES_LIMIT: f64 = 15.0;
/// Above this argument `I_ν(z)` overflows double precision.
pub const UNSCALED_LIMIT: f64 = 700.0;

fn check(order: f64, z: f64) -> Result<()> {
    if !(order >= 0.0 && order.is_finite()) {
        return Err(param(format!(
            "Bessel order must be finite and ≥ 0, got {order}"
        )));
    }
    if !(z >= 0.0 && z.is_finite()) {
        return Err(param(format!(
            "Bessel argument must be finite and ≥ 0, got {z}"
        )));
    }
    Ok(())
}

/// Ascending series, returned as `e^{-shift} I_ν(z)`.
fn series(order: f64, z: f64, shift: f64) -> f64 {
    if z == 0.0 {
        return if order == 0.0 { (-shift).exp() } else { 0.0 };
    }
    let half = 0.5 * z;
    let mut term = (order * half.ln() - ln_gamma(order + 1.0) - shift).exp();
    let mut sum = term;
    let q = half * half;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * (kf + order));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Large-argument expansion of `e^{-z} I_ν(z) √(2πz)`.
fn asymptotic_factor(order: f64, z: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (k as f64 * 8.0 * z);
        if term.abs() >= last {
            break;
        }
        sum += term;
        last = term.abs();
        if last < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `e^{-z} I_ν(z)`, finite for every admissible argument.
pub fn bessel_i_scaled(order: f64, z: f64) -> Result<f64> {
    check(order, z)?;
    if z <= SERIES_LIMIT {
        Ok(series(order, z, z))
    } else {
        Ok(asymptotic_factor(order, z) / (2.0 * std::f64::consts::PI * z).sqrt())
    }
}

/// `I_ν(z)`.
pub fn bessel_i(order: f64, z: f64) -> Result<f64> {
    check(order, z)?;
    if z > UNSCALED_LIMIT {
        return Err(Error::Range {
            function: "bessel_i",
            argument: z,
        });
    }
    if z <= SERIES_LIMIT {
        Ok(series(order, z, 0.0))
    } else {
        Ok(bessel_i_scaled(order, z)? * z.exp())
    }
}

/// `d/dz I_ν(z) = I_{ν+1}(z) + (ν/z) I_ν(z)`, in scaled form `e^{-z} I_ν′(z)`.
pub fn bessel_i_derivative_scaled(order: f64, z: f64) -> Result<f64> {
    if z == 0.0 {
        return Err(param("derivative of I_ν is evaluated only for z > 0"));
    }
    Ok(bessel_i_scaled(order + 1.0, z)? + order / z * bessel_i_scaled(order, z)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn half_order_closed_form() {
        let z: f64 = 1.0;
        let exact = (2.0 / (PI * z)).sqrt() * z.sinh();
        assert!((bessel_i(0.5, z).unwrap() / exact - 1.0).abs() < 1e-14);
        assert!((exact - 0.937674).abs() < 1e-6);
        for z in [0.3, 5.0, 14.9, 15.1, 40.0] {
            let exact = (2.0 / (PI * z)).sqrt() * z.sinh();
            assert!(
                (bessel_i(0.5, z).unwrap() / exact - 1.0).abs() < 1e-12,
                "z = {z}"
            );
        }
    }

    #[test]
    fn branches_agree_at_the_switch() {
        for order in [0.0, 0.25, 0.75, 1.3] {
            let lo = series(order, SERIES_LIMIT, SERIES_LIMIT);
            let hi = asymptotic_factor(order, SERIES_LIMIT) / (2.0 * PI * SERIES_LIMIT).sqrt();
            assert!((lo / hi - 1.0).abs() < 1e-11, "order {order}");
        }
    }

    #[test]
    fn limits() {
        assert_eq!(bessel_i(0.3, 0.0).unwrap(), 0.0);
        let z: f64 = 50.0;
        let ratio = bessel_i(0.4, z).unwrap() * (2.0 * PI * z).sqrt() * (-z).exp();
        assert!((ratio - 1.0).abs() < 1e-2);
        assert!(matches!(bessel_i(0.5, 800.0), Err(Error::Range { .. })));
        assert!(bessel_i_scaled(0.5, 800.0).unwrap().is_finite());
    }
}
