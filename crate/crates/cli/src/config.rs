//! Scenario configuration files.
//!
//! A scenario is a TOML document with a few flat sections. Rates, energies
//! and detunings are in units of γ, times in γ⁻¹, lengths in λ₀. Unknown keys
//! are rejected.

use std::f64::consts::TAU;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dfsim_core::geometry::DisorderMode;
use dfsim_core::{Decay, Geometry, ProtocolOptions, ReadoutTransition, SweepAxis, SweepProtocol, TableSpec, Timing, Wavevector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Prepare,
    Rotate,
    MeritPrepare,
    MeritRotate,
    ToleranceTable,
    Sweep,
    Readout,
    Cphase4,
    ClusterGrowth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub kind: Kind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Prefix of the CSV file names; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_prefix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterConfig>,
}

fn default_seed() -> u64 {
    1
}

/// Linear array along x. Give either `xi12` (k₀r₁₂) or `r` together with
/// `lambda0` in the same length unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi12: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default = "default_emitters")]
    pub n: usize,
    /// Angle between the dipoles and the array axis, radians.
    #[serde(default)]
    pub alpha: f64,
}

fn default_emitters() -> usize {
    3
}

impl GeometryConfig {
    pub fn xi12(&self) -> Result<f64> {
        match (self.xi12, self.r, self.lambda0) {
            (Some(xi), None, None) => Ok(xi),
            (None, Some(r), Some(l)) => {
                if !(l > 0.0) {
                    bail!("geometry.lambda0 must be > 0");
                }
                Ok(TAU * r / l)
            }
            _ => bail!("geometry needs either `xi12` or both `r` and `lambda0`"),
        }
    }

    pub fn build(&self) -> Result<Geometry> {
        Ok(Geometry::linear(self.xi12()?, self.n, self.alpha)?)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_nu: Option<f64>,
    /// Raman detuning from level e.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_delta: Option<f64>,
    /// Tune ω_δ for the best transfer before the run.
    #[serde(default)]
    pub calibrate: bool,
    /// Readout transition: "c-g" or "b-g".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<ReadoutTransition>,
    /// CPHASE detuning from the f–l transition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub samples: usize,
    pub decay: Decay,
    pub wavevector: Wavevector,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let o = ProtocolOptions::default();
        IntegratorConfig { rtol: o.rtol, atol: o.atol, samples: o.samples, decay: o.decay, wavevector: o.wavevector }
    }
}

impl IntegratorConfig {
    pub fn options(&self) -> ProtocolOptions {
        ProtocolOptions { decay: self.decay, wavevector: self.wavevector, rtol: self.rtol, atol: self.atol, samples: self.samples }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Protocol perturbed by tolerance tables and sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<SweepProtocol>,
    /// Separations of a merit curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi12: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<SweepAxis>,
    /// Relative deviations, or variances in λ₀² for the position axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_range: Option<[f64; 2]>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub mode: DisorderMode,
}

fn default_samples() -> usize {
    100
}

impl SweepConfig {
    pub fn table_spec(&self, seed: u64) -> TableSpec {
        let d = TableSpec::default();
        TableSpec {
            thresholds: self.thresholds.clone().unwrap_or(d.thresholds),
            max_deviation: self.max_deviation.unwrap_or(d.max_deviation),
            variance_range: self.variance_range.map_or(d.variance_range, |[a, b]| (a, b)),
            samples: self.samples,
            seed,
            mode: self.mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub p_success: Vec<f64>,
    pub ops: usize,
    /// Initial chain length; defaults to 3 × ops so the chain never empties.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<usize>,
    /// Largest chain whose explicit state-vector checks are run.
    #[serde(default = "default_check_qubits")]
    pub check_qubits: usize,
}

fn default_check_qubits() -> usize {
    5
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a scenario file, or the `[config]` table of a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let result = match value.get("config") {
            Some(toml::Value::Table(cfg)) if value.contains_key("version") => {
                let cfg: ScenarioConfig = cfg.clone().try_into()?;
                cfg.validate().map(|_| cfg)
            }
            _ => Self::parse(&text),
        };
        result.with_context(|| format!("in {}", path.display()))
    }

    pub fn prefix(&self) -> &str {
        self.output_prefix.as_deref().unwrap_or(&self.name)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        match &self.geometry {
            Some(g) => g.build(),
            None => bail!("scenario `{}` needs a [geometry] section", self.name),
        }
    }

    pub fn drive(&self) -> Result<&DriveConfig> {
        self.drive.as_ref().with_context(|| format!("scenario `{}` needs a [drive] section", self.name))
    }

    pub fn sweep(&self) -> Result<&SweepConfig> {
        self.sweep.as_ref().with_context(|| format!("scenario `{}` needs a [sweep] section", self.name))
    }

    pub fn cluster(&self) -> Result<&ClusterConfig> {
        self.cluster.as_ref().with_context(|| format!("scenario `{}` needs a [cluster] section", self.name))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            bail!("name must not be empty");
        }
        let mut values: Vec<(&str, f64)> = vec![("integrator.rtol", self.integrator.rtol), ("integrator.atol", self.integrator.atol)];
        if let Some(g) = &self.geometry {
            values.extend([("geometry.alpha", g.alpha)]);
            values.extend(g.xi12.map(|v| ("geometry.xi12", v)));
            values.extend(g.r.map(|v| ("geometry.r", v)));
            values.extend(g.lambda0.map(|v| ("geometry.lambda0", v)));
            g.xi12()?;
        }
        if let Some(d) = &self.drive {
            values.extend(d.e_mu.map(|v| ("drive.e_mu", v)));
            values.extend(d.e_nu.map(|v| ("drive.e_nu", v)));
            values.extend(d.omega_delta.map(|v| ("drive.omega_delta", v)));
            values.extend(d.detuning_offset.map(|v| ("drive.detuning_offset", v)));
            values.extend(d.t_end.map(|v| ("drive.t_end", v)));
        }
        if let Some(s) = &self.sweep {
            let lists = [("sweep.xi12", &s.xi12), ("sweep.values", &s.values), ("sweep.thresholds", &s.thresholds)];
            for (key, list) in lists {
                values.extend(list.iter().flatten().map(|&v| (key, v)));
            }
            values.extend(s.max_deviation.map(|v| ("sweep.max_deviation", v)));
            values.extend(s.variance_range.iter().flatten().map(|&v| ("sweep.variance_range", v)));
        }
        if let Some(c) = &self.cluster {
            values.extend(c.p_success.iter().map(|&v| ("cluster.p_success", v)));
        }
        if let Some((key, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
            bail!("{key} = {v} is not a finite number");
        }
        if !(self.integrator.rtol > 0.0 && self.integrator.atol > 0.0) {
            bail!("integrator tolerances must be > 0");
        }
        if self.integrator.samples < 2 {
            bail!("integrator.samples must be >= 2");
        }
        if let Some(t) = self.drive.as_ref().and_then(|d| d.t_end) {
            if t <= 0.0 {
                bail!("drive.t_end must be > 0");
            }
        }
        Ok(())
    }
}
