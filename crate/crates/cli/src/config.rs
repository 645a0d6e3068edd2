use std::path::{Path, PathBuf};

use fraclab::numkit::params::DEFAULT_PRECISION_BITS;
use fraclab::numkit::ProblemParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Mantissa widths with a compiled scalar type; 53 selects plain `f64`.
pub const SUPPORTED_PRECISIONS: [usize; 5] = [53, 128, 256, 320, 512];

/// Everything a run depends on. Serialized verbatim into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub s: f64,
    pub seed: u64,
    pub threads: usize,
    pub precision_bits: usize,
    pub out: PathBuf,
    pub basis: BasisConfig,
    pub decay: DecayConfig,
    pub gamma: GammaConfig,
    pub instability: InstabilityConfig,
    pub approx: ApproxConfig,
    pub hilbert: HilbertConfig,
    pub hadamard: HadamardConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    /// Largest `m + k`.
    pub cap: usize,
    /// Gauss points of the independent rule used for the Gram check.
    pub gram_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub dims: Vec<usize>,
    pub s_values: Vec<f64>,
    pub cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaConfig {
    pub elements: usize,
    pub cap: usize,
    pub bump_center: f64,
    pub bump_radius: f64,
    /// Bump height as a fraction of `r₀`.
    pub amplitude_fraction: f64,
    /// Largest level in the counting table.
    pub p_max: usize,
    /// Random matrices in the norm-chain check.
    pub norm_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstabilityConfig {
    pub smoothness: usize,
    pub subdivisions: usize,
    /// `ε` as a fraction of `r₀`.
    pub epsilon_fraction: f64,
    pub max_members: usize,
    pub sampled_members: usize,
    pub elements: usize,
    pub cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxConfig {
    pub dims: Vec<usize>,
    pub p_min: usize,
    pub p_max: usize,
    /// Radial profiles per degree in the control basis.
    pub k_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HilbertConfig {
    pub nodes: usize,
    pub count: usize,
    pub k_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HadamardConfig {
    pub frequency: f64,
    pub steps: Vec<f64>,
    pub x0: f64,
    pub y0: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub asymptotic_n: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 1,
            s: 0.5,
            seed: 7,
            threads: 1,
            precision_bits: DEFAULT_PRECISION_BITS,
            out: PathBuf::from("fraclab-out"),
            basis: BasisConfig::default(),
            decay: DecayConfig::default(),
            gamma: GammaConfig::default(),
            instability: InstabilityConfig::default(),
            approx: ApproxConfig::default(),
            hilbert: HilbertConfig::default(),
            hadamard: HadamardConfig::default(),
        }
    }
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            cap: 12,
            gram_nodes: 150,
        }
    }
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            dims: vec![1, 2],
            s_values: vec![0.25, 0.5, 0.75],
            cap: 12,
        }
    }
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            elements: 400,
            cap: 12,
            bump_center: 0.1,
            bump_radius: 0.6,
            amplitude_fraction: 0.5,
            p_max: 20,
            norm_samples: 100,
        }
    }
}

impl Default for InstabilityConfig {
    fn default() -> Self {
        InstabilityConfig {
            smoothness: 1,
            subdivisions: 3,
            epsilon_fraction: 0.05,
            max_members: 4096,
            sampled_members: 64,
            elements: 400,
            cap: 12,
        }
    }
}

impl Default for ApproxConfig {
    fn default() -> Self {
        ApproxConfig {
            dims: vec![2, 3],
            p_min: 2,
            p_max: 8,
            k_max: 10,
        }
    }
}

impl Default for HilbertConfig {
    fn default() -> Self {
        HilbertConfig {
            nodes: 64,
            count: 12,
            k_max: 8,
        }
    }
}

impl Default for HadamardConfig {
    fn default() -> Self {
        HadamardConfig {
            frequency: 4.0,
            steps: vec![0.04, 0.02, 0.01, 0.005],
            x0: 0.3,
            y0: 1.0,
            n_min: 20,
            n_max: 80,
            asymptotic_n: 60.0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    /// Reads a TOML config, or the `config` field of a JSON report.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            let config = value.get("config").cloned().unwrap_or(value);
            return serde_json::from_value(config)
                .map_err(|e| invalid(format!("{}: {e}", path.display())));
        }
        toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    /// Applies a `section.key=value` override; the value is parsed as TOML.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            invalid(format!(
                "override `{assignment}` is not of the form key=value"
            ))
        })?;
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .map(|mut t| {
                t.remove("v")
                    .unwrap_or(toml::Value::String(raw.to_string()))
            })
            .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
        let mut tree = toml::Value::try_from(&*self).map_err(|e| invalid(e.to_string()))?;
        let mut slot = &mut tree;
        for part in key.trim().split('.') {
            slot = slot
                .as_table_mut()
                .and_then(|t| t.get_mut(part))
                .ok_or_else(|| invalid(format!("unknown config key `{key}`")))?;
        }
        *slot = match (&*slot, value) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        *self = tree
            .try_into()
            .map_err(|e: toml::de::Error| invalid(format!("`{key}`: {e}")))?;
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemParams, CliError> {
        let mut params = ProblemParams::new(self.n, self.s)?;
        params.precision_bits = self.precision_bits;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.problem()?;
        if self.threads == 0 {
            return Err(invalid("threads must be at least 1"));
        }
        if !SUPPORTED_PRECISIONS.contains(&self.precision_bits) {
            return Err(invalid(format!(
                "precision_bits must be one of {SUPPORTED_PRECISIONS:?}, got {}",
                self.precision_bits
            )));
        }
        for s in &self.decay.s_values {
            ProblemParams::new(1, *s)?;
        }
        for n in self.decay.dims.iter().chain(&self.approx.dims) {
            ProblemParams::new(*n, 0.5)?;
        }
        if self.decay.dims.is_empty()
            || self.decay.s_values.is_empty()
            || self.approx.dims.is_empty()
        {
            return Err(invalid("sweep lists must not be empty"));
        }
        if self.approx.dims.iter().any(|n| *n < 2) {
            return Err(invalid(
                "approx needs n ≥ 2; the 1D control lives in the hilbert command",
            ));
        }
        if self.approx.p_min < 2 || self.approx.p_min > self.approx.p_max {
            return Err(invalid("approx needs 2 ≤ p_min ≤ p_max"));
        }
        if self.approx.p_max > self.approx.k_max {
            return Err(invalid("approx.p_max must not exceed approx.k_max"));
        }
        let g = &self.gamma;
        if !(g.amplitude_fraction > 0.0 && g.amplitude_fraction <= 0.5) {
            return Err(invalid("gamma.amplitude_fraction must lie in (0, 1/2]"));
        }
        if !(g.bump_radius > 0.0 && g.bump_center.abs() + g.bump_radius <= 1.0) {
            return Err(invalid("the gamma bump must lie inside (−1, 1)"));
        }
        let i = &self.instability;
        if !(i.epsilon_fraction > 0.0 && i.epsilon_fraction <= 0.5) {
            return Err(invalid("instability.epsilon_fraction must lie in (0, 1/2]"));
        }
        if i.smoothness == 0 || i.subdivisions == 0 {
            return Err(invalid("instability needs smoothness and subdivisions ≥ 1"));
        }
        let h = &self.hilbert;
        if h.k_max < 2 || h.k_max >= h.count {
            return Err(invalid("hilbert needs 2 ≤ k_max < count"));
        }
        let d = &self.hadamard;
        if d.steps.len() < 2 || d.steps.iter().any(|h| !(*h > 0.0)) {
            return Err(invalid("hadamard.steps needs at least two positive steps"));
        }
        if d.n_min == 0 || d.n_min > d.n_max || !(d.y0 > 0.0) {
            return Err(invalid("hadamard needs 1 ≤ n_min ≤ n_max and y0 > 0"));
        }
        Ok(())
    }
}
