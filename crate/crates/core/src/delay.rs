//! Stochastic runtime model for local-update training rounds.
//!
//! A round is `tau` local steps on each of `m` workers followed by one
//! all-node model exchange: its duration is the slowest worker's summed
//! step times plus the communication delay. Per-step compute times are
//! i.i.d. across workers and steps; the communication delay is
//! deterministic, `d0 * s(m)` for a configurable scaling `s`. Monte-Carlo
//! estimators here assign one derived substream per sample index, so
//! results depend only on `(seed, n_samples)`.

use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::rng::{substream, STREAM_MC};
use crate::{Error, Result};

/// Distribution of a single local-step compute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ComputeDist {
    Constant { y: f64 },
    Exponential { mean: f64 },
    /// Minimum time `shift` plus an exponential tail with mean `mean`;
    /// the overall mean is `shift + mean`. A pragmatic straggler model
    /// beyond the constant/exponential pair.
    ShiftedExponential { shift: f64, mean: f64 },
}

impl ComputeDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ComputeDist::Constant { y } => y > 0.0 && y.is_finite(),
            ComputeDist::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            ComputeDist::ShiftedExponential { shift, mean } => {
                shift >= 0.0 && mean > 0.0 && shift.is_finite() && mean.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("y_dist", "step-time parameters must be positive"))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ComputeDist::Constant { y } => y,
            ComputeDist::Exponential { mean } => mean,
            ComputeDist::ShiftedExponential { shift, mean } => shift + mean,
        }
    }

    /// True when every draw is the same value, enabling closed forms.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, ComputeDist::Constant { .. })
    }

    pub fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match *self {
            ComputeDist::Constant { y } => y,
            ComputeDist::Exponential { mean } => Exp::new(1.0 / mean).unwrap().sample(rng),
            ComputeDist::ShiftedExponential { shift, mean } => {
                shift + Exp::new(1.0 / mean).unwrap().sample(rng)
            }
        }
    }
}

/// How the communication delay grows with the worker count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CommScaling {
    /// Delay independent of the worker count.
    Constant,
    /// Reduction-tree broadcast: `2 * log2(m)`.
    Log2Tree,
    /// All-to-one: proportional to `m`.
    Linear,
    /// Explicit `(workers, factor)` table.
    Custom { table: Vec<(u32, f64)> },
}

impl CommScaling {
    pub fn factor(&self, workers: u32) -> Result<f64> {
        if workers == 0 {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        match self {
            CommScaling::Constant => Ok(1.0),
            CommScaling::Log2Tree => Ok(2.0 * (workers as f64).log2()),
            CommScaling::Linear => Ok(workers as f64),
            CommScaling::Custom { table } => table
                .iter()
                .find(|(m, _)| *m == workers)
                .map(|(_, s)| *s)
                .ok_or_else(|| {
                    Error::invalid("scaling", format!("no table entry for {} workers", workers))
                }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let CommScaling::Custom { table } = self {
            if table.is_empty() {
                return Err(Error::invalid("scaling", "custom table must be nonempty"));
            }
            if table.iter().any(|(_, s)| !(*s >= 0.0) || !s.is_finite()) {
                return Err(Error::invalid("scaling", "custom factors must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Compute-time distribution plus communication-delay parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayModel {
    #[serde(rename = "y_dist")]
    pub compute: ComputeDist,
    /// Seconds per inter-node communication before scaling.
    pub d0: f64,
    pub scaling: CommScaling,
}

impl DelayModel {
    pub fn validate(&self) -> Result<()> {
        self.compute.validate()?;
        self.scaling.validate()?;
        if !(self.d0 >= 0.0 && self.d0.is_finite()) {
            return Err(Error::invalid("d0", "must be a nonnegative finite scalar"));
        }
        Ok(())
    }

    /// Communication delay of one averaging round: `d0 * s(m)`.
    pub fn comm_delay(&self, workers: u32) -> Result<f64> {
        Ok(self.d0 * self.scaling.factor(workers)?)
    }

    /// One draw of a full round: slowest worker's `tau` summed step times,
    /// plus the communication delay.
    pub fn sample_round_time(&self, workers: u32, tau: u32, rng: &mut ChaCha12Rng) -> Result<f64> {
        if workers == 0 || tau == 0 {
            return Err(Error::invalid("workers/tau", "must be >= 1"));
        }
        let comm = self.comm_delay(workers)?;
        let mut slowest = f64::NEG_INFINITY;
        for _ in 0..workers {
            let mut total = 0.0;
            for _ in 0..tau {
                total += self.compute.sample(rng);
            }
            slowest = slowest.max(total);
        }
        Ok(slowest + comm)
    }

    /// Expected time per iteration (round time over `tau`). Closed form for
    /// constant step times; Monte-Carlo otherwise, with per-iteration
    /// samples retained for dispersion estimates.
    pub fn expected_iteration_time(
        &self,
        workers: u32,
        tau: u32,
        n_samples: usize,
        seed: u64,
    ) -> Result<RuntimeStats> {
        if workers == 0 || tau == 0 {
            return Err(Error::invalid("workers/tau", "must be >= 1"));
        }
        let comm = self.comm_delay(workers)?;
        if self.compute.is_deterministic() {
            let round = tau as f64 * self.compute.mean() + comm;
            return Ok(RuntimeStats {
                mean_round_time: round,
                mean_iteration_time: round / tau as f64,
                samples: None,
            });
        }
        if n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be >= 1"));
        }
        let samples = self.iteration_time_samples(workers, tau, n_samples, seed)?;
        let mean_iter = samples.iter().sum::<f64>() / n_samples as f64;
        Ok(RuntimeStats {
            mean_round_time: mean_iter * tau as f64,
            mean_iteration_time: mean_iter,
            samples: Some(samples),
        })
    }

    /// Empirical distribution of the per-iteration time.
    pub fn runtime_tail(
        &self,
        workers: u32,
        tau: u32,
        n_samples: usize,
        seed: u64,
    ) -> Result<EmpiricalCdf> {
        if n_samples < 1000 {
            return Err(Error::invalid("n_samples", "runtime_tail needs at least 1000 samples"));
        }
        EmpiricalCdf::from_samples(self.iteration_time_samples(workers, tau, n_samples, seed)?)
    }

    fn iteration_time_samples(
        &self,
        workers: u32,
        tau: u32,
        n_samples: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let mut samples = Vec::with_capacity(n_samples);
        for j in 0..n_samples {
            let mut rng = substream(seed, STREAM_MC, j as u64, 0);
            samples.push(self.sample_round_time(workers, tau, &mut rng)? / tau as f64);
        }
        Ok(samples)
    }
}

/// Runtime summary for one `(workers, tau)` configuration.
#[derive(Debug, Clone)]
pub struct RuntimeStats {
    pub mean_round_time: f64,
    pub mean_iteration_time: f64,
    /// Per-iteration Monte-Carlo samples; `None` for closed-form results.
    pub samples: Option<Vec<f64>>,
}

impl RuntimeStats {
    /// Standard error of the per-iteration mean (zero for closed forms).
    pub fn stderr(&self) -> f64 {
        match &self.samples {
            None => 0.0,
            Some(s) => {
                let n = s.len() as f64;
                let mean = self.mean_iteration_time;
                let var = s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            }
        }
    }

    /// Per-iteration quantile; degenerate configurations return the mean.
    pub fn percentile(&self, q: f64) -> f64 {
        match &self.samples {
            None => self.mean_iteration_time,
            Some(s) => {
                let mut sorted = s.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                nearest_rank(&sorted, q)
            }
        }
    }
}

/// Sorted empirical distribution of per-iteration times.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "must be nonempty"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("runtime sample"));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Nearest-rank quantile, `q` in (0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        nearest_rank(&self.sorted, q)
    }

    /// Fraction of samples `<= x`.
    pub fn prob_le(&self, x: f64) -> f64 {
        let idx = self.sorted.partition_point(|&v| v <= x);
        idx as f64 / self.sorted.len() as f64
    }

    pub fn as_sorted_slice(&self) -> &[f64] {
        &self.sorted
    }
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let q = q.clamp(f64::MIN_POSITIVE, 1.0);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.saturating_sub(1).min(sorted.len() - 1)]
}

/// Per-iteration speed of `tau`-step rounds relative to averaging every
/// step, under constant compute time and delay with ratio
/// `alpha = delay / step_time`: `(1 + alpha) / (1 + alpha / tau)`.
pub fn speedup_ratio(alpha: f64, tau: u32) -> f64 {
    (1.0 + alpha) / (1.0 + alpha / tau as f64)
}

/// `sum_{i=1..m} 1/i`, the closed-form mean of the maximum of `m` unit-mean
/// exponentials. Kept public as a cross-check oracle for the Monte-Carlo
/// estimators.
pub fn harmonic_number(m: u32) -> f64 {
    (1..=m).map(|i| 1.0 / i as f64).sum()
}
