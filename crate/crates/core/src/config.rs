//! Run configuration, loaded from TOML. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::degrade::PipelineConfig;
use crate::error::{Error, Result};
use crate::sde::{NoiseSchedule, ScheduleShape};

pub const DEFAULT_STEPS: usize = 100;
/// Stationary noise level on the 0-255 intensity scale.
pub const DEFAULT_LAMBDA_255: f64 = 50.0;
pub const DEFAULT_PATCH_SIZE: usize = 256;
pub const DEFAULT_TERMINAL_DECAY: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub steps: usize,
    /// On the 0-255 scale; images are handled in `[0, 1]`.
    pub lambda: f64,
    pub terminal_decay: f64,
    pub shape: ScheduleShape,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            lambda: DEFAULT_LAMBDA_255,
            terminal_decay: DEFAULT_TERMINAL_DECAY,
            shape: ScheduleShape::default(),
        }
    }
}

impl ScheduleConfig {
    pub fn lambda_unit(&self) -> f64 {
        self.lambda / 255.0
    }

    pub fn build(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::build(self.steps, self.lambda_unit(), self.terminal_decay, self.shape)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RestoreMode {
    #[default]
    Posterior,
    ReverseSde,
}

impl std::str::FromStr for RestoreMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "posterior" => Ok(Self::Posterior),
            "reverse-sde" => Ok(Self::ReverseSde),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RestoreConfig {
    pub mode: RestoreMode,
    /// Std of the per-step error added to the oracle's noise estimate.
    pub perturb_sigma: f64,
    pub clamp_x0: bool,
}

impl Default for RestoreConfig {
    fn default() -> Self {
        Self {
            mode: RestoreMode::Posterior,
            perturb_sigma: 0.0,
            clamp_x0: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; per-image streams are keyed by `(seed, sorted index)`.
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub patch_size: usize,
    /// Center-crop inputs to `patch_size` before degrading.
    pub crop_to_patch: bool,
    pub schedule: ScheduleConfig,
    pub pipeline: PipelineConfig,
    pub restore: RestoreConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            patch_size: DEFAULT_PATCH_SIZE,
            crop_to_patch: false,
            schedule: ScheduleConfig::default(),
            pipeline: PipelineConfig::default(),
            restore: RestoreConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.pipeline.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.pipeline.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.build()?;
        self.pipeline.validate()?;
        if self.patch_size == 0 {
            return Err(Error::Config("patch_size must be positive".into()));
        }
        if !(self.restore.perturb_sigma >= 0.0 && self.restore.perturb_sigma.is_finite()) {
            return Err(Error::Config("restore.perturb_sigma must be nonnegative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.schedule.steps, 100);
        assert_eq!(cfg.schedule.lambda, 50.0);
        assert_eq!(cfg.schedule.lambda_unit(), 50.0 / 255.0);
        assert_eq!(cfg.patch_size, 256);
        assert_eq!(cfg.pipeline.phases.len(), 3);
        assert!(cfg.pipeline.shuffle_within_phase);
        assert!(cfg.pipeline.final_resize_back);
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let cfg = RunConfig::from_toml_str(
            r#"
            seed = 9
            [schedule]
            steps = 10
            shape = "uniform"
            [pipeline]
            shuffle_within_phase = false
            [[pipeline.phases]]
            [pipeline.phases.noise]
            probability = 1.0
            sigma = [0.01, 0.02]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.pipeline.seed, 9);
        assert_eq!(cfg.schedule.steps, 10);
        assert_eq!(cfg.pipeline.phases.len(), 1);
        assert!(cfg.pipeline.phases[0].blur.is_none());
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
        assert!(RunConfig::from_toml_str("[schedule]\nsteps = 0").is_err());
        assert!(RunConfig::from_toml_str("[pipeline]\nseed = 3").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set_seed(17);
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    }
}
