use serde::{Deserialize, Serialize};

use super::harmonics::check_dimension;
use crate::error::{param, Result};

/// Default mantissa width for the orthogonalization paths.
///
/// Gram matrices of `r^{-m-j}` on [2, 3] reach condition numbers near 1e68 for
/// 24 generators; 320 bits keeps twelve digits of headroom there.
pub const DEFAULT_PRECISION_BITS: usize = 320;

/// Problem dimension, fractional order and numerical resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemParams {
    pub n: usize,
    pub s: f64,
    pub quad_nodes: usize,
    pub precision_bits: usize,
    pub tol_quad: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            n: 1,
            s: 0.5,
            quad_nodes: 96,
            precision_bits: DEFAULT_PRECISION_BITS,
            tol_quad: 1e-12,
        }
    }
}

impl ProblemParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        let p = ProblemParams {
            n,
            s,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_dimension(self.n)?;
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(param(format!("s must lie in (0, 1), got {}", self.s)));
        }
        if self.quad_nodes < 16 {
            return Err(param(format!(
                "quad_nodes must be at least 16, got {}",
                self.quad_nodes
            )));
        }
        if self.precision_bits < 53 {
            return Err(param(format!(
                "precision_bits must be at least 53, got {}",
                self.precision_bits
            )));
        }
        if !(self.tol_quad > 0.0 && self.tol_quad < 1.0) {
            return Err(param(format!(
                "tol_quad must lie in (0, 1), got {}",
                self.tol_quad
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ProblemParams::new(2, 0.3).is_ok());
        assert!(ProblemParams::new(4, 0.3).is_err());
        assert!(ProblemParams::new(1, 1.5).is_err());
        let p = ProblemParams {
            quad_nodes: 8,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
