//! JSON run configuration: parsing, cross-field validation, and emission.
//!
//! Unknown keys are rejected everywhere. `parse(emit(config))` returns an
//! equal config, since defaults are materialized on parse.

use serde::{Deserialize, Serialize};

use crate::delay::DelayModel;
use crate::engine::{CommSchedule, TrainConfig};
use crate::objectives::{self, GradientNoise, Objective};
use crate::{Error, Result};

/// Which objective to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    NoisyQuadratic,
    Logistic,
    TinyMlp,
}

/// Objective section: `{"kind", "dimension", "noise": {"M","C"},
/// "data_seed", "n_points"}`. Dataset-backed kinds require `data_seed` and
/// `n_points`; `noise` applies to the noisy quadratic only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    pub dimension: usize,
    #[serde(default)]
    pub noise: GradientNoise,
    #[serde(default)]
    pub data_seed: Option<u64>,
    #[serde(default)]
    pub n_points: Option<usize>,
}

impl ObjectiveConfig {
    pub fn build(&self) -> Result<Objective> {
        match self.kind {
            ObjectiveKind::NoisyQuadratic => {
                Objective::noisy_quadratic(self.dimension, self.noise)
            }
            ObjectiveKind::Logistic | ObjectiveKind::TinyMlp => {
                if self.noise != GradientNoise::NONE {
                    return Err(Error::Config(
                        "noise applies to the noisy_quadratic kind only".into(),
                    ));
                }
                let seed = self.data_seed.ok_or_else(|| {
                    Error::Config("dataset-backed objectives require data_seed".into())
                })?;
                let n = self.n_points.ok_or_else(|| {
                    Error::Config("dataset-backed objectives require n_points".into())
                })?;
                match self.kind {
                    ObjectiveKind::Logistic => {
                        let data = objectives::logistic_clusters(self.dimension, n, seed)?;
                        Objective::logistic(data)
                    }
                    ObjectiveKind::TinyMlp => {
                        let data = objectives::mlp_regression(n, seed)?;
                        Objective::tiny_mlp(self.dimension, data)
                    }
                    ObjectiveKind::NoisyQuadratic => unreachable!(),
                }
            }
        }
    }
}

/// Top-level run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullConfig {
    pub objective: ObjectiveConfig,
    pub delay: DelayModel,
    pub train: TrainConfig,
}

impl FullConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: FullConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field validation: builds the objective and checks the training
    /// section against it and the delay model.
    pub fn validate(&self) -> Result<()> {
        let obj = self.objective.build().map_err(config_err)?;
        self.train.validate(&obj, &self.delay).map_err(config_err)?;
        // the scaling table must cover the configured worker count
        self.delay.comm_delay(self.train.workers).map_err(config_err)?;
        Ok(())
    }

    /// Materializes the runnable triple.
    pub fn build(&self) -> Result<(Objective, DelayModel, TrainConfig)> {
        self.validate()?;
        Ok((self.objective.build()?, self.delay.clone(), self.train.clone()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// Seed assignment across sweep children.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// All children run with the base seed.
    #[default]
    Shared,
    /// Child `i` runs with `base seed + i`.
    PerRun,
}

/// Sweep section: vary one axis over a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// One of: `tau`, `lr`, `workers`, `batch_size`, `d0`.
    pub axis: String,
    pub values: Vec<f64>,
    #[serde(default)]
    pub seed_policy: SeedPolicy,
    /// Loss targets reported as time-to-target columns in the summary.
    #[serde(default)]
    pub target_losses: Vec<f64>,
}

/// Sweep configuration: a base run plus the axis to vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: FullConfig,
    pub sweep: SweepSpec,
}

impl SweepConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: SweepConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep.values must be nonempty".into()));
        }
        for &v in &self.sweep.values {
            self.child(v, 0)?;
        }
        Ok(())
    }

    /// Config of the child at `value`, with `index` applied per the seed
    /// policy.
    pub fn child(&self, value: f64, index: usize) -> Result<FullConfig> {
        let mut cfg = self.base.clone();
        apply_axis(&mut cfg, &self.sweep.axis, value)?;
        if self.sweep.seed_policy == SeedPolicy::PerRun {
            cfg.train.seed = cfg.train.seed.wrapping_add(index as u64);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn as_positive_int(axis: &str, value: f64) -> Result<u64> {
    if value.fract() != 0.0 || !(value >= 1.0) || value > u32::MAX as f64 {
        return Err(Error::Config(format!(
            "sweep axis `{axis}` needs a positive integer, got {value}"
        )));
    }
    Ok(value as u64)
}

fn apply_axis(cfg: &mut FullConfig, axis: &str, value: f64) -> Result<()> {
    match axis {
        "tau" => match &mut cfg.train.schedule {
            CommSchedule::Fixed { tau } => *tau = as_positive_int(axis, value)? as u32,
            CommSchedule::Adacomm(_) => {
                return Err(Error::Config(
                    "sweeping tau requires a fixed schedule in the base config".into(),
                ))
            }
        },
        "lr" => {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config("sweep axis `lr` needs a positive value".into()));
            }
            cfg.train.lr.initial = value;
        }
        "workers" => cfg.train.workers = as_positive_int(axis, value)? as u32,
        "batch_size" => cfg.train.batch_size = as_positive_int(axis, value)? as u32,
        "d0" => {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::Config("sweep axis `d0` needs a value >= 0".into()));
            }
            cfg.delay.d0 = value;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown sweep axis `{other}` (expected tau, lr, workers, batch_size, or d0)"
            )))
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adacomm::AdaMode;

    const MINIMAL: &str = r#"{
        "objective": {"kind": "noisy_quadratic", "dimension": 4, "noise": {"M": 0.0, "C": 1.0}},
        "delay": {"y_dist": {"type": "constant", "y": 1.0}, "d0": 4.0, "scaling": {"type": "constant"}},
        "train": {
            "workers": 4,
            "lr": {"initial": 0.05},
            "schedule": {"type": "adacomm", "t0": 100.0, "tau0": 16},
            "stop": {"max_seconds": 500.0},
            "seed": 42
        }
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = FullConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.train.batch_size, 1);
        assert_eq!(cfg.train.lr.decay_factor, 0.1);
        match &cfg.train.schedule {
            CommSchedule::Adacomm(a) => {
                assert_eq!(a.gamma, 0.5);
                assert_eq!(a.slack, 0);
                assert_eq!(a.mode, AdaMode::LrCoupledApprox);
                assert!(a.defer_lr_decay);
                assert_eq!(a.tau_max, 100);
            }
            _ => panic!("expected adaptive schedule"),
        }
    }

    #[test]
    fn bad_gamma_rejected() {
        let json = MINIMAL.replace(r#""tau0": 16"#, r#""tau0": 16, "gamma": 1.5"#);
        let err = FullConfig::from_json(&json).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gamma") && msg.contains("must be in (0,1)"), "{msg}");
    }

    #[test]
    fn zero_tau0_rejected() {
        let json = MINIMAL.replace(r#""tau0": 16"#, r#""tau0": 0"#);
        assert!(FullConfig::from_json(&json).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = MINIMAL.replace(r#""seed": 42"#, r#""seed": 42, "bogus": 1"#);
        let err = FullConfig::from_json(&json).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn round_trip() {
        let cfg = FullConfig::from_json(MINIMAL).unwrap();
        let emitted = cfg.to_json();
        let again = FullConfig::from_json(&emitted).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn dataset_kind_requirements() {
        let json = MINIMAL
            .replace(r#""kind": "noisy_quadratic""#, r#""kind": "logistic""#)
            .replace(r#""noise": {"M": 0.0, "C": 1.0}"#, r#""data_seed": 7"#);
        let err = FullConfig::from_json(&json).unwrap_err();
        assert!(err.to_string().contains("n_points"), "{err}");

        let ok = MINIMAL
            .replace(r#""kind": "noisy_quadratic""#, r#""kind": "logistic""#)
            .replace(
                r#""noise": {"M": 0.0, "C": 1.0}"#,
                r#""data_seed": 7, "n_points": 32"#,
            );
        FullConfig::from_json(&ok).unwrap();
    }

    #[test]
    fn batch_larger_than_dataset_rejected() {
        let json = MINIMAL
            .replace(r#""kind": "noisy_quadratic""#, r#""kind": "logistic""#)
            .replace(
                r#""noise": {"M": 0.0, "C": 1.0}"#,
                r#""data_seed": 7, "n_points": 8"#,
            )
            .replace(r#""workers": 4,"#, r#""workers": 4, "batch_size": 9,"#);
        let err = FullConfig::from_json(&json).unwrap_err();
        assert!(err.to_string().contains("dataset size"), "{err}");
    }

    fn sweep_json(axis: &str, values: &str) -> String {
        format!(
            r#"{{"base": {}, "sweep": {{"axis": "{axis}", "values": {values}, "target_losses": [1.0]}}}}"#,
            MINIMAL.replace(
                r#""schedule": {"type": "adacomm", "t0": 100.0, "tau0": 16}"#,
                r#""schedule": {"type": "fixed", "tau": 1}"#
            )
        )
    }

    #[test]
    fn sweep_axis_application() {
        let sweep = SweepConfig::from_json(&sweep_json("tau", "[1, 4, 16]")).unwrap();
        let child = sweep.child(16.0, 2).unwrap();
        assert_eq!(child.train.schedule, CommSchedule::Fixed { tau: 16 });
        assert_eq!(child.train.seed, 42); // shared policy

        let err = SweepConfig::from_json(&sweep_json("tau", "[1.5]")).unwrap_err();
        assert!(err.to_string().contains("positive integer"), "{err}");

        let err = SweepConfig::from_json(&sweep_json("volume", "[1]")).unwrap_err();
        assert!(err.to_string().contains("unknown sweep axis"), "{err}");
    }

    #[test]
    fn per_run_seed_policy() {
        let json = sweep_json("lr", "[0.01, 0.05]")
            .replace(r#""target_losses": [1.0]"#, r#""target_losses": [], "seed_policy": "per_run""#);
        let sweep = SweepConfig::from_json(&json).unwrap();
        assert_eq!(sweep.child(0.01, 0).unwrap().train.seed, 42);
        assert_eq!(sweep.child(0.05, 1).unwrap().train.seed, 43);
    }
}
