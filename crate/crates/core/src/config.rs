//! Run configuration: flat `key = value` text, `#` comments, no sections.
//!
//! Values resolve in order file, then `SLITSIM_<KEY>` environment variables,
//! then explicit overrides (command-line flags). Keys left unset take their
//! defaults, several of which are derived from other keys. The config hash
//! is the SHA-256 of the canonical text, which lists every resolved key in
//! sorted order.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::calibration::CalibrationSettings;
use crate::forcefield::{Experiment, PhysicsParams, SlitLayout};
use crate::integrator::StepController;
use crate::montecarlo::Binning;
use crate::setup::Simulation;
use crate::trajectory::Limits;

pub const ENV_PREFIX: &str = "SLITSIM_";

pub const KEYS: [&str; 21] = [
    "coarse_n",
    "delta_max",
    "detector_distance",
    "emitter_distance",
    "h0",
    "h_min",
    "kappa",
    "mirror_lower",
    "n_samples",
    "particle_diameter",
    "refine_tol",
    "safety",
    "seed",
    "shrink_near",
    "slit_half_height",
    "slit_offset",
    "t_max",
    "v0",
    "x_escape",
    "y_max",
    "y_min",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` set twice")]
    Duplicate(String),
    #[error("`{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("`seed` is required")]
    MissingSeed,
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Unresolved key/value pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            if raw.values.contains_key(k) {
                return Err(ConfigError::Duplicate(k.to_string()));
            }
            raw.set(k, v)?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies `SLITSIM_<KEY>` variables for known keys; other variables are ignored.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            if let Some(name) = k.as_ref().strip_prefix(ENV_PREFIX) {
                let key = name.to_ascii_lowercase();
                if KEYS.contains(&key.as_str()) {
                    self.set(&key, v.as_ref())?;
                }
            }
        }
        Ok(())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.values
            .get(key)
            .map(|v| {
                v.parse().map_err(|_| ConfigError::BadValue {
                    key: key.to_string(),
                    value: v.clone(),
                })
            })
            .transpose()
    }

    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let d = PhysicsParams::default();
        let params = PhysicsParams {
            kappa: self.get("kappa")?.unwrap_or(d.kappa),
            v0: self.get("v0")?.unwrap_or(d.v0),
            emitter_distance: self.get("emitter_distance")?.unwrap_or(d.emitter_distance),
            detector_distance: self.get("detector_distance")?.unwrap_or(d.detector_distance),
            particle_diameter: self.get("particle_diameter")?.unwrap_or(d.particle_diameter),
        };
        params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let slit_offset = self.get("slit_offset")?.unwrap_or(1.0);
        let slit_half_height = self.get("slit_half_height")?.unwrap_or(0.5);
        let base = Simulation::with_defaults(params, slit_offset, slit_half_height);
        let ctrl = StepController {
            h0: self.get("h0")?.unwrap_or(base.ctrl.h0),
            h_min: self.get("h_min")?.unwrap_or(base.ctrl.h_min),
            shrink_near: self.get("shrink_near")?.unwrap_or(base.ctrl.shrink_near),
            delta_max: self.get("delta_max")?.unwrap_or(base.ctrl.delta_max),
            safety: self.get("safety")?.unwrap_or(base.ctrl.safety),
        };
        let limits = Limits {
            x_escape: self.get("x_escape")?.unwrap_or(base.limits.x_escape),
            t_max: self.get("t_max")?.unwrap_or(base.limits.t_max),
        };
        let reach = slit_offset + 10.0 * slit_half_height;
        let cfg = RunConfig {
            sim: Simulation { ctrl, limits, ..base },
            y_min: self.get("y_min")?.unwrap_or(-reach),
            y_max: self.get("y_max")?.unwrap_or(reach),
            n_samples: self.get("n_samples")?.unwrap_or(10_000),
            seed: self.get("seed")?.ok_or(ConfigError::MissingSeed)?,
            calibration: CalibrationSettings {
                coarse_n: self.get("coarse_n")?.unwrap_or(CalibrationSettings::default().coarse_n),
                refine_tol: self
                    .get("refine_tol")?
                    .unwrap_or(CalibrationSettings::default().refine_tol),
            },
            mirror_lower: self.get("mirror_lower")?.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub sim: Simulation,
    pub y_min: f64,
    pub y_max: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub calibration: CalibrationSettings,
    /// Obtain P₂ by reflecting the P₁ run instead of simulating it.
    pub mirror_lower: bool,
}

impl RunConfig {
    /// Defaults with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        let mut raw = RawConfig::default();
        raw.set("seed", &seed.to_string()).unwrap();
        raw.resolve().expect("defaults are valid")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        SlitLayout::material_intervals(Experiment::Both, self.sim.slit_offset, self.sim.slit_half_height)
            .map_err(|e| invalid(&e))?;
        self.sim.ctrl.validate().map_err(|e| invalid(&e))?;
        let l = self.sim.limits;
        if !(l.x_escape > self.sim.params.emitter_distance && l.t_max > 0.0) {
            return Err(ConfigError::Invalid(
                "x_escape must exceed emitter_distance and t_max must be positive".into(),
            ));
        }
        self.binning().map_err(|e| invalid(&e))?;
        if self.n_samples == 0 {
            return Err(ConfigError::Invalid("n_samples must be positive".into()));
        }
        let c = self.calibration;
        if c.coarse_n < 360 || c.refine_tol.is_nan() || c.refine_tol <= 0.0 {
            return Err(ConfigError::Invalid(
                "coarse_n must be >= 360 and refine_tol positive".into(),
            ));
        }
        Ok(())
    }

    pub fn binning(&self) -> Result<Binning, crate::montecarlo::RunError> {
        Binning::new(self.y_min, self.y_max, self.sim.params.particle_diameter)
    }

    /// Every key with its resolved value, in sorted key order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let p = &self.sim.params;
        let c = &self.sim.ctrl;
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        map.insert("coarse_n", self.calibration.coarse_n.to_string());
        map.insert("delta_max", c.delta_max.to_string());
        map.insert("detector_distance", p.detector_distance.to_string());
        map.insert("emitter_distance", p.emitter_distance.to_string());
        map.insert("h0", c.h0.to_string());
        map.insert("h_min", c.h_min.to_string());
        map.insert("kappa", p.kappa.to_string());
        map.insert("mirror_lower", self.mirror_lower.to_string());
        map.insert("n_samples", self.n_samples.to_string());
        map.insert("particle_diameter", p.particle_diameter.to_string());
        map.insert("refine_tol", self.calibration.refine_tol.to_string());
        map.insert("safety", c.safety.to_string());
        map.insert("seed", self.seed.to_string());
        map.insert("shrink_near", c.shrink_near.to_string());
        map.insert("slit_half_height", self.sim.slit_half_height.to_string());
        map.insert("slit_offset", self.sim.slit_offset.to_string());
        map.insert("t_max", self.sim.limits.t_max.to_string());
        map.insert("v0", p.v0.to_string());
        map.insert("x_escape", self.sim.limits.x_escape.to_string());
        map.insert("y_max", self.y_max.to_string());
        map.insert("y_min", self.y_min.to_string());
        map.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn canonical_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_defaults() {
        let cfg = RawConfig::parse("# comment\nseed = 42\n").unwrap().resolve().unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.sim, Simulation::paper_like());
        assert_eq!((cfg.y_min, cfg.y_max), (-6.0, 6.0));
        assert!(cfg.mirror_lower);
        assert_eq!(cfg, RunConfig::with_seed(42));
    }

    #[test]
    fn derived_defaults_follow_inputs() {
        let cfg = RawConfig::parse("seed=1\nemitter_distance=20\nslit_half_height=0.25 # inline\n")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(cfg.sim.limits.x_escape, 60.0);
        assert_eq!(cfg.sim.ctrl.h0, 0.02);
        assert_eq!(cfg.sim.ctrl.delta_max, 0.0125);
        assert_eq!(cfg.y_max, 3.5);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(RawConfig::parse("seed 1"), Err(ConfigError::Syntax { line: 1 }));
        assert_eq!(
            RawConfig::parse("colour = 1"),
            Err(ConfigError::UnknownKey("colour".into()))
        );
        assert_eq!(
            RawConfig::parse("seed=1\nseed=2"),
            Err(ConfigError::Duplicate("seed".into()))
        );
        assert_eq!(
            RawConfig::parse("kappa = 1").unwrap().resolve(),
            Err(ConfigError::MissingSeed)
        );
        assert!(matches!(
            RawConfig::parse("seed = x").unwrap().resolve(),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            RawConfig::parse("seed = 1\nslit_offset = -1").unwrap().resolve(),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            RawConfig::parse("seed = 1\nn_samples = 0").unwrap().resolve(),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn env_overrides_file() {
        let mut raw = RawConfig::parse("seed = 1\nkappa = 0.001").unwrap();
        raw.apply_env([("SLITSIM_KAPPA", "0"), ("SLITSIM_UNRELATED", "x"), ("PATH", "/bin")])
            .unwrap();
        assert_eq!(raw.resolve().unwrap().sim.params.kappa, 0.0);
    }

    #[test]
    fn hash_tracks_resolved_values() {
        let a = RawConfig::parse("seed = 1").unwrap().resolve().unwrap();
        let b = RawConfig::parse("seed=1\nkappa=0.005\n# same\n")
            .unwrap()
            .resolve()
            .unwrap();
        let c = RawConfig::parse("seed = 2").unwrap().resolve().unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 64);
        assert_eq!(a.entries().len(), KEYS.len());
    }

    #[test]
    fn canonical_text_reparses_to_same_config() {
        let a = RawConfig::parse("seed = 9\nkappa = 0.003\nh0 = 0.002")
            .unwrap()
            .resolve()
            .unwrap();
        let b = RawConfig::parse(&a.canonical_text()).unwrap().resolve().unwrap();
        assert_eq!(a, b);
    }
}
