//! Toolkit config file (TOML). Every section is optional; command-line flags
//! override individual values.

use std::path::{Path, PathBuf};

use safety_bounds::odd::OddSpec;
use safety_bounds::simulator::ScaleLaw;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolkitConfig {
    pub odd: Option<OddSpec>,
    pub target: Option<TargetSection>,
    pub plan: Option<PlanSection>,
    #[serde(default)]
    pub paths: PathsSection,
    pub simulation: Option<SimulationSection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub epsilon: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub alpha: Option<f64>,
    /// Binomial share, Poisson share.
    pub split: Option<[f64; 2]>,
    pub miss_threshold: Option<f64>,
    pub rate_threshold: Option<f64>,
    /// Alternative used for both tests unless overridden.
    pub alternative: Option<f64>,
    pub miss_alternative: Option<f64>,
    pub rate_alternative: Option<f64>,
    pub power_goal: Option<f64>,
    pub combine: Option<String>,
    pub weight_trials: Option<f64>,
    pub weight_km: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub frame_log: Option<PathBuf>,
    pub segments: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub model: Option<String>,
    pub q: Option<Vec<f64>>,
    pub rho: Option<f64>,
    pub scale: Option<ScaleLaw>,
    pub late_q: Option<f64>,
    pub sessions: Option<u64>,
    pub seed: Option<u64>,
    pub phase_offset: Option<bool>,
    pub false_trigger_prob: Option<f64>,
    pub max_approaches: Option<u64>,
}

impl ToolkitConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: shown.clone(),
            reason: e.to_string(),
        })?;
        let mut cfg: ToolkitConfig = toml::from_str(&text).map_err(|e| CliError::Config {
            path: shown,
            reason: e.to_string(),
        })?;
        // relative data paths are taken relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.paths.frame_log,
            &mut cfg.paths.segments,
            &mut cfg.paths.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load_optional(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

/// ODD used by `simulate` when the config has none: 15 m/s, 10 Hz,
/// c = 34 m, mu = 0.8, which leaves 13 guaranteed updates in the buffer.
pub fn demo_odd() -> OddSpec {
    OddSpec {
        route_length_km: 1000.0,
        speed: 15.0,
        perception_frequency: 10.0,
        brake_threshold: 34.0,
        surface_friction: 0.8,
        obstacle_intensity_prior: Some(1.0),
    }
}
