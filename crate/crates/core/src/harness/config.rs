use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::SteadyOptions;
use crate::director::ConstraintPolicy;
use crate::error::{Error, Result};
use crate::flow::PhysicalParams;
use crate::mesh::{Grid, GridSpec};
use crate::solver::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    PerturbedEquilibrium,
    DirectorRelaxation,
    CoupledDecay,
    SteadyNlevp,
    CustomCheckpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Omitted: `0.25 h_min^2 / max(nu, gamma)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default = "one")]
    pub output_every: usize,
    /// Stop once `E <= stop_energy_ratio * E(0)`; 0 disables.
    #[serde(default = "default_stop")]
    pub stop_energy_ratio: f64,
}

fn one() -> usize {
    1
}

fn default_stop() -> f64 {
    1e-16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub perturbation_amplitude: f64,
    /// Max-norm of the initial velocity.
    #[serde(default)]
    pub velocity_amplitude: f64,
    /// State file for `custom_checkpoint`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Eigenvalues requested for the spectral oracle.
    #[serde(default = "default_k")]
    pub spectrum_k: usize,
    #[serde(default)]
    pub steady: SteadyOptions,
}

fn default_k() -> usize {
    6
}

fn default_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Divergence bound after projection; also the steady-state target.
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub grid: GridSpec,
    #[serde(default)]
    pub params: PhysicalParams,
    pub time: TimeConfig,
    #[serde(default)]
    pub policy: ConstraintPolicy,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub scheme: Scheme,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        // checkpoint paths are relative to the config file
        if let (Some(cp), Some(dir)) = (&cfg.scenario.checkpoint, path.parent()) {
            if cp.is_relative() {
                cfg.scenario.checkpoint = Some(dir.join(cp));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid)
    }

    pub fn dt(&self) -> f64 {
        self.time.dt.unwrap_or_else(|| {
            let h = (self.grid.lx / self.grid.nx as f64).min(self.grid.ly / self.grid.ny as f64);
            0.25 * h * h / self.params.nu.max(self.params.gamma)
        })
    }

    /// Number of steps to reach `t_end` (the last step may overshoot by
    /// less than one `dt`).
    pub fn n_steps(&self) -> usize {
        (self.time.t_end / self.dt() - 1e-9).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid)?;
        self.params.validate()?;
        self.policy.validate()?;
        let dt = self.dt();
        if !(dt.is_finite() && dt >= 1e-12) {
            return Err(Error::InvalidTimeStep { dt });
        }
        if !(self.time.t_end > dt) {
            return Err(Error::Config(format!("t_end = {} must exceed dt = {dt}", self.time.t_end)));
        }
        if self.time.output_every == 0 {
            return Err(Error::Config("output_every must be at least 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidTolerance(self.tol));
        }
        if !(self.scheme.cg_tol.is_finite() && self.scheme.cg_tol > 0.0) {
            return Err(Error::InvalidTolerance(self.scheme.cg_tol));
        }
        for (name, v) in [
            ("perturbation_amplitude", self.scenario.perturbation_amplitude),
            ("velocity_amplitude", self.scenario.velocity_amplitude),
            ("stop_energy_ratio", self.time.stop_energy_ratio),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be finite and nonnegative")));
            }
        }
        if self.scenario.kind == ScenarioKind::CustomCheckpoint && self.scenario.checkpoint.is_none() {
            return Err(Error::Config("custom_checkpoint needs scenario.checkpoint".into()));
        }
        Ok(())
    }

    /// Canonical form: every default resolved, fixed field order.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.time.dt = Some(self.dt());
        serde_json::to_string(&c).expect("config serialises")
    }

    /// Git-style blob hash of the canonical form.
    pub fn content_hash(&self) -> String {
        let body = self.canonical();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(body.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[grid]
nx = 16
ny = 16
lx = 1.0
ly = 1.0
m = 2

[time]
t_end = 0.1

[scenario]
kind = "perturbed_equilibrium"
perturbation_amplitude = 0.05
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ScenarioConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.params, PhysicalParams::default());
        assert_eq!(c.tol, 1e-10);
        assert!((c.dt() - 0.25 / 256.0).abs() < 1e-15);
        assert_eq!(c.time.output_every, 1);
        assert_eq!(c.n_steps(), 103);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = BASE.replace("t_end = 0.1", "t_end = 0.1\nt_edn = 3");
        assert!(matches!(ScenarioConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = format!("{BASE}\n[params]\nnu = 1.0\nlamda = 2.0\n");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
        let bad = BASE.replace("perturbed_equilibrium", "perturbed");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn invariants_checked() {
        let bad = BASE.replace("t_end = 0.1", "t_end = 0.1\ndt = 0.5");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
        let bad = BASE.replace("t_end = 0.1", "t_end = 0.1\noutput_every = 0");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
        let bad = BASE.replace("nx = 16", "nx = 3");
        assert!(matches!(ScenarioConfig::from_toml_str(&bad), Err(Error::GridTooCoarse { .. })));
        let bad = BASE.replace("perturbed_equilibrium", "custom_checkpoint");
        assert!(ScenarioConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn hash_tracks_semantic_changes_only() {
        let a = ScenarioConfig::from_toml_str(BASE).unwrap();
        let reordered = ScenarioConfig::from_toml_str(&BASE.replace("nx = 16\nny = 16", "ny = 16\nnx = 16")).unwrap();
        assert_eq!(a.content_hash(), reordered.content_hash());
        // spelling out the default explicitly is not a change
        let explicit = ScenarioConfig::from_toml_str(&BASE.replace("t_end = 0.1", &format!("t_end = 0.1\ndt = {:?}", a.dt()))).unwrap();
        assert_eq!(a.content_hash(), explicit.content_hash());
        let b = ScenarioConfig::from_toml_str(&BASE.replace("0.05", "0.06")).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        let mut c = a.clone();
        c.scenario.seed = 1;
        assert_ne!(a.content_hash(), c.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }

    #[test]
    fn toml_round_trip() {
        let a = ScenarioConfig::from_toml_str(BASE).unwrap();
        let b = ScenarioConfig::from_toml_str(&a.to_toml_string()).unwrap();
        assert_eq!(a, b);
    }
}
