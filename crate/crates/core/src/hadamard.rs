//! Hadamard-type example for the Caffarelli–Silvestre extension:
//! `v_n(x, y) = C_s n^{-s} sin(nx) y^s I_s(ny)` solves
//! `∇·(y^{1−2s} ∇v) = 0` in the upper half plane with `v(x, 0) = 0` and
//! `y^{1−2s} ∂_y v → sin(nx)`, yet grows like `e^{ny}` in the bulk.
//!
//! `C_s = 2^{s−1} Γ(s)` follows from `I_s(z) ~ (z/2)^s / Γ(s+1)`: the flux then
//! tends to `C_s 2^{1−s}/Γ(s) · sin(nx) = sin(nx)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{param, Error, Result};
use crate::numkit::bessel::{bessel_i, bessel_i_scaled};

/// Largest `ln|v|` representable in double precision.
const LOG_MAX: f64 = 709.0;

/// The unit-flux normalization `2^{s−1} Γ(s)`.
pub fn unit_flux_constant(s: f64) -> f64 {
    2f64.powf(s - 1.0) * gamma(s)
}

/// `v(x, y) = C n^{-s} sin(nx) y^s I_ν(ny)`; `ν = s` for the true solution.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExtensionSolution {
    pub frequency: f64,
    pub s: f64,
    pub constant: f64,
    /// Bessel order; differs from `s` only in the negative control.
    pub order: f64,
}

impl ExtensionSolution {
    pub fn new(frequency: f64, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(param(format!("s must lie in (0,1), got {s}")));
        }
        if !(frequency >= 1.0) {
            return Err(param(format!(
                "frequency must be at least 1, got {frequency}"
            )));
        }
        Ok(ExtensionSolution {
            frequency,
            s,
            constant: unit_flux_constant(s),
            order: s,
        })
    }

    /// The same ansatz with the wrong Bessel order `s + shift`.
    pub fn with_order_shift(mut self, shift: f64) -> Self {
        self.order = self.s + shift;
        self
    }

    /// `C n^{-s} y^s I_ν(ny)`, the factor multiplying `sin(nx)`.
    pub fn profile(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Err(param(format!("y must be nonnegative, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let z = self.frequency * y;
        let prefactor = self.constant * self.frequency.powf(-self.s) * y.powf(self.s);
        if z < 600.0 {
            return Ok(prefactor * bessel_i(self.order, z)?);
        }
        let log = prefactor.ln() + z + bessel_i_scaled(self.order, z)?.ln();
        if log > LOG_MAX {
            return Err(Error::Range {
                function: "v_n",
                argument: z,
            });
        }
        Ok(log.exp())
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        Ok((self.frequency * x).sin() * self.profile(y)?)
    }

    /// `ln |v(x, y)|`, finite beyond the overflow range.
    pub fn log_abs(&self, x: f64, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(param("log |v| needs y > 0"));
        }
        let z = self.frequency * y;
        Ok(
            (self.constant * self.frequency.powf(-self.s) * y.powf(self.s))
                .abs()
                .ln()
                + z
                + bessel_i_scaled(self.order, z)?.ln()
                + (self.frequency * x).sin().abs().ln(),
        )
    }

    /// `y^{1−2s} ∂_y v = C n^{-s} sin(nx) y^{1−s} (2s I_s(ny)/y + n I_{s+1}(ny))` at `ν = s`.
    pub fn flux(&self, x: f64, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(param("the flux is evaluated at y > 0"));
        }
        let n = self.frequency;
        let z = n * y;
        let nu = self.order;
        // d/dy [y^s I_ν(ny)] = s y^{s−1} I_ν + y^s n (I_{ν+1} + ν/z I_ν)
        let inner = (self.s + nu) * bessel_i(nu, z)? / y + n * bessel_i(nu + 1.0, z)?;
        Ok(self.constant * n.powf(-self.s) * (n * x).sin() * y.powf(1.0 - self.s) * inner)
    }

    /// `(x, y)` where `|sin(nx)| = 1`.
    pub fn peak_x(&self) -> f64 {
        PI / (2.0 * self.frequency)
    }
}

/// Sampling window for [`pde_residual`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ResidualGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub points: usize,
}

/// Largest divergence-form residual
/// `[Δ_y^h(y^{1−2s} Δ_y^h v) + y^{1−2s} δ_x² v] / h²` over the window,
/// relative to the largest `|y^{1−2s} ∂_x² v|` there.
pub fn pde_residual(sol: &ExtensionSolution, grid: &ResidualGrid, h: f64) -> Result<f64> {
    if grid.y_range.0 - h <= 0.0 {
        return Err(param("the stencil must stay inside y > 0"));
    }
    if grid.points < 2 || !(h > 0.0) {
        return Err(param("need at least two points per side and h > 0"));
    }
    let weight = |y: f64| y.powf(1.0 - 2.0 * sol.s);
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let span = |r: (f64, f64), i: usize| r.0 + (r.1 - r.0) * i as f64 / (grid.points - 1) as f64;
    for i in 0..grid.points {
        let x = span(grid.x_range, i);
        for j in 0..grid.points {
            let y = span(grid.y_range, j);
            let c = sol.eval(x, y)?;
            let vertical = weight(y + 0.5 * h) * (sol.eval(x, y + h)? - c)
                - weight(y - 0.5 * h) * (c - sol.eval(x, y - h)?);
            let horizontal = weight(y) * (sol.eval(x + h, y)? - 2.0 * c + sol.eval(x - h, y)?);
            worst = worst.max(((vertical + horizontal) / (h * h)).abs());
            scale = scale.max(weight(y) * sol.frequency * sol.frequency * c.abs());
        }
    }
    Ok(worst / scale)
}

/// One refinement level of the residual table.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ResidualRow {
    pub h: f64,
    pub residual: f64,
}

pub fn residual_table(
    sol: &ExtensionSolution,
    grid: &ResidualGrid,
    steps: &[f64],
) -> Result<Vec<ResidualRow>> {
    steps
        .iter()
        .map(|h| {
            Ok(ResidualRow {
                h: *h,
                residual: pde_residual(sol, grid, *h)?,
            })
        })
        .collect()
}

/// Fluxes at `y = 2^{-j}` and their Richardson extrapolation in `y²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FluxLimit {
    pub x: f64,
    pub heights: Vec<f64>,
    pub fluxes: Vec<f64>,
    pub limit: f64,
    /// Gap between the last two diagonal entries of the tableau.
    pub error_estimate: f64,
}

pub fn boundary_flux(
    sol: &ExtensionSolution,
    x: f64,
    levels: std::ops::Range<i32>,
) -> Result<FluxLimit> {
    if levels.is_empty() {
        return Err(param("need at least one height"));
    }
    let heights: Vec<f64> = levels.map(|j| 2f64.powi(-j)).collect();
    let fluxes = heights
        .iter()
        .map(|y| sol.flux(x, *y))
        .collect::<Result<Vec<f64>>>()?;
    // The flux is even in y with an O(y²) leading correction, so each column removes one power of 4.
    let mut table = vec![fluxes.clone()];
    for col in 1..fluxes.len() {
        let prev = &table[col - 1];
        let factor = 4f64.powi(col as i32);
        let next: Vec<f64> = (1..prev.len())
            .map(|i| (factor * prev[i] - prev[i - 1]) / (factor - 1.0))
            .collect();
        table.push(next);
    }
    let diagonal: Vec<f64> = table
        .iter()
        .map(|c| *c.last().unwrap_or(&f64::NAN))
        .collect();
    let limit = *diagonal.last().unwrap_or(&f64::NAN);
    let error_estimate = if diagonal.len() >= 2 {
        (diagonal[diagonal.len() - 1] - diagonal[diagonal.len() - 2]).abs()
    } else {
        f64::INFINITY
    };
    Ok(FluxLimit {
        x,
        heights,
        fluxes,
        limit,
        error_estimate,
    })
}

/// `v_n(x, y₀) e^{-ny₀} n^s (2πny₀)^{1/2} / (C_s sin(nx) y₀^s)`, which tends to 1.
pub fn asymptotic_ratio(sol: &ExtensionSolution, x: f64, y0: f64) -> Result<f64> {
    let n = sol.frequency;
    let sin = (n * x).sin();
    if sin == 0.0 {
        return Err(param("sin(nx) vanishes at this x"));
    }
    let log = sol.log_abs(x, y0)? - n * y0 + sol.s * n.ln() + 0.5 * (2.0 * PI * n * y0).ln()
        - (sol.constant * sin.abs() * y0.powf(sol.s)).ln();
    Ok(log.exp())
}

/// `ln|v_n(x₀, y₀)/sin(nx₀)| − n y₀ + (s + ½) ln n` over a range of frequencies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub log_abs_v: f64,
    pub normalized: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    pub s: f64,
    pub x0: f64,
    pub y0: f64,
    pub rows: Vec<GrowthRow>,
    /// `ln(C_s y₀^s (2π y₀)^{-1/2})`, the limit of the normalized values.
    pub limit: f64,
    /// `max exp(normalized − limit) − 1` in absolute value.
    pub spread: f64,
}

pub fn growth_check(
    s: f64,
    x0: f64,
    y0: f64,
    ns: std::ops::RangeInclusive<usize>,
) -> Result<GrowthReport> {
    let mut rows = Vec::new();
    for n in ns {
        let sol = ExtensionSolution::new(n as f64, s)?;
        let sin = (n as f64 * x0).sin().abs();
        if sin < 1e-3 {
            return Err(param(format!("sin(n x₀) nearly vanishes at n = {n}")));
        }
        let log_abs_v = sol.log_abs(x0, y0)?;
        rows.push(GrowthRow {
            n,
            log_abs_v,
            normalized: log_abs_v - sin.ln() - n as f64 * y0 + (s + 0.5) * (n as f64).ln(),
        });
    }
    let limit = (unit_flux_constant(s) * y0.powf(s) / (2.0 * PI * y0).sqrt()).ln();
    let spread = rows
        .iter()
        .map(|r| ((r.normalized - limit).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(GrowthReport {
        s,
        x0,
        y0,
        rows,
        limit,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_is_classical() {
        let sol = ExtensionSolution::new(3.0, 0.5).unwrap();
        for (x, y) in [(0.3f64, 0.2f64), (1.1, 0.7), (-0.4, 1.5)] {
            let exact = (3.0 * x).sin() * (3.0 * y).sinh() / 3.0;
            let v = sol.eval(x, y).unwrap();
            assert!(
                (v - exact).abs() < 1e-13 * exact.abs().max(1e-300),
                "{v} vs {exact}"
            );
        }
    }

    #[test]
    fn constant_at_half() {
        assert!((unit_flux_constant(0.5) - (PI / 2.0).sqrt()).abs() < 1e-14);
    }
}
