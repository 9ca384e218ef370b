//! Experiment configuration: a single TOML document with committed presets.
//!
//! Validation is total: every invalid field yields a named [`Error::Config`]
//! before any work starts, so a run never leaves partial outputs behind.

use crate::error::{Error, Result};
use crate::grid::{build_detectors, build_grid, build_timegrid, DetectorGeometry, Grid2D, TimeGrid};
use crate::phantom::{head_phantom, PhantomSpec};
use serde::{Deserialize, Serialize};

/// Grid block of the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub n: usize,
    pub rho: f64,
    pub center: [f64; 2],
}

/// Time block: `dt` drives the table runs, `sweep_dt` the end-time sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeConfig {
    pub dt: f64,
    #[serde(default)]
    pub sweep_dt: Option<f64>,
    pub t_end: Vec<f64>,
}

/// Phantom block: the committed head phantom or an explicit Gaussian list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomConfig {
    Head,
    Gaussians { list: Vec<GaussianEntry> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianEntry {
    pub center: [f64; 2],
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub levels: Vec<f64>,
    pub seed: u64,
    /// Independent noise realizations per level (seeded deterministically).
    #[serde(default = "one")]
    pub realizations: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsConfig {
    pub a: f64,
    pub b: f64,
}

/// The eight battery columns; a run may select a subset.
pub const ALL_COLUMNS: [&str; 8] = [
    "f_inf_n", "f_t_n", "g_inf_d", "g_t_d", "f_inf_d", "f_t_d", "f_inf_mix", "f_t_mix",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub phantom: PhantomConfig,
    pub noise: NoiseConfig,
    pub weights: WeightsConfig,
    /// Battery columns to run; defaults to all eight.
    #[serde(default)]
    pub reconstructors: Option<Vec<String>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&text)
    }

    /// Named validation of every field; nothing runs unless this passes.
    pub fn validate(&self) -> Result<()> {
        if self.grid.n < 2 {
            return Err(Error::Config(format!("grid.n must be >= 2, got {}", self.grid.n)));
        }
        if !(self.grid.rho > 0.0) {
            return Err(Error::Config(format!("grid.rho must be > 0, got {}", self.grid.rho)));
        }
        if self.time.t_end.is_empty() {
            return Err(Error::Config("time.t_end must list at least one end time".into()));
        }
        for &t in &self.time.t_end {
            if t < 2.0 * self.grid.rho {
                return Err(Error::Config(format!(
                    "end time {t} below the diameter {} of the detector disk",
                    2.0 * self.grid.rho
                )));
            }
        }
        for &dt in
            std::iter::once(&self.time.dt).chain(self.time.sweep_dt.iter())
        {
            if !(dt > 0.0) || dt >= self.time.t_end[0] {
                return Err(Error::Config(format!("time step {dt} outside (0, T)")));
            }
        }
        for &lvl in &self.noise.levels {
            if lvl < 0.0 {
                return Err(Error::Config(format!("noise level {lvl} is negative")));
            }
        }
        if self.noise.realizations == 0 {
            return Err(Error::Config("noise.realizations must be >= 1".into()));
        }
        if let PhantomConfig::Gaussians { list } = &self.phantom {
            for g in list {
                if !(g.width > 0.0) {
                    return Err(Error::Config(format!("gaussian width {} must be > 0", g.width)));
                }
            }
        }
        if let Some(cols) = &self.reconstructors {
            for c in cols {
                if !ALL_COLUMNS.contains(&c.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown reconstructor '{c}' (expected one of {ALL_COLUMNS:?})"
                    )));
                }
            }
            let needs_mix = cols.iter().any(|c| c.ends_with("mix"));
            if needs_mix && self.weights.b == 0.0 {
                return Err(Error::Config("mixed reconstruction needs weights.b != 0".into()));
            }
        } else if self.weights.b == 0.0 {
            return Err(Error::Config("weights.b must be nonzero for the full battery".into()));
        }
        // the phantom must fit the support constraint of its grid
        self.phantom_spec().validate_support(self.grid.rho, self.grid.center).map_err(|e| {
            Error::Config(format!("phantom does not fit the detector disk: {e}"))
        })?;
        Ok(())
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        match &self.phantom {
            PhantomConfig::Head => head_phantom(),
            PhantomConfig::Gaussians { list } => PhantomSpec::gaussians(
                list.iter().map(|g| (g.center, g.width, g.amplitude)).collect(),
            ),
        }
    }

    pub fn build_grid(&self) -> Result<Grid2D> {
        build_grid(self.grid.n, self.grid.rho, self.grid.center)
    }

    pub fn build_detectors(&self) -> Result<DetectorGeometry> {
        let g = self.build_grid()?;
        build_detectors(g.rho, g.center, g.dx)
    }

    pub fn table_timegrid(&self) -> Result<TimeGrid> {
        build_timegrid(self.time.t_end[0], self.time.dt)
    }

    pub fn sweep_dt(&self) -> f64 {
        self.time.sweep_dt.unwrap_or(self.time.dt)
    }

    pub fn columns(&self) -> Vec<String> {
        match &self.reconstructors {
            Some(c) => c.clone(),
            None => ALL_COLUMNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Committed presets. `paper-defaults` mirrors the reference experiment
/// configuration (expensive); `desk-scale` bounds the full pipeline to
/// laptop-friendly runtimes.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = match name {
        "paper-defaults" => include_str!("../presets/paper-defaults.toml"),
        "desk-scale" => include_str!("../presets/desk-scale.toml"),
        _ => {
            return Err(Error::Config(format!(
                "unknown preset '{name}' (available: paper-defaults, desk-scale)"
            )))
        }
    };
    ExperimentConfig::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        let p = preset("paper-defaults").unwrap();
        assert_eq!(p.grid.n, 257);
        assert_eq!(p.time.dt, 1e-4);
        assert_eq!(p.time.t_end, vec![2.0, 4.0, 6.0, 8.0]);
        assert_eq!(p.weights.a, 1.0);
        assert_eq!(p.weights.b, 0.1);
        assert_eq!(p.noise.levels, vec![0.0, 0.2, 0.4]);
        let d = preset("desk-scale").unwrap();
        assert_eq!(d.grid.n, 129);
        assert_eq!(d.time.dt, 1e-3);
        assert!(preset("nope").is_err());
    }

    #[test]
    fn rejects_short_end_time() {
        let mut cfg = preset("desk-scale").unwrap();
        cfg.time.t_end = vec![1.0];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_fields() {
        let mut cfg = preset("desk-scale").unwrap();
        cfg.noise.levels = vec![-0.1];
        assert!(cfg.validate().is_err());
        let mut cfg = preset("desk-scale").unwrap();
        cfg.grid.n = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = preset("desk-scale").unwrap();
        cfg.reconstructors = Some(vec!["f_t_q".into()]);
        assert!(cfg.validate().is_err());
        let mut cfg = preset("desk-scale").unwrap();
        cfg.weights.b = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn gaussian_phantom_config_round_trip() {
        let text = r#"
[grid]
n = 65
rho = 1.0
center = [0.0, 0.0]

[time]
dt = 0.002
t_end = [2.0]

[phantom]
kind = "gaussians"
list = [{ center = [0.18, 0.05], width = 0.16, amplitude = 1.0 }]

[noise]
levels = [0.0]
seed = 7

[weights]
a = 1.0
b = 0.1
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert!(cfg.phantom_spec().is_gaussian_only());
        assert_eq!(cfg.columns().len(), 8);
    }
}
