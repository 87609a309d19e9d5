//! Adaptive communication-period controller.
//!
//! Training wall-clock time is divided into intervals of length `t0`. At
//! the first synchronization past each interval boundary the controller
//! re-selects the communication period from the ratio of current to
//! initial training loss (optionally coupled to the learning-rate ratio),
//! anchored to the initial period `tau0`. A saturation rule multiplies the
//! period by `gamma` instead whenever the formula stops shrinking it, so
//! the emitted sequence never increases.

use serde::{Deserialize, Serialize};

use crate::delay::DelayModel;
use crate::engine::{run_pasgd, CommSchedule, TrainConfig};
use crate::objectives::Objective;
use crate::trace::Branch;
use crate::{Error, Result};

/// Period-update rule variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaMode {
    /// Loss ratio only; assumes a fixed learning rate.
    Basic,
    /// Full cubic learning-rate coupling. Reacts violently to step decays
    /// (a 10x lr drop multiplies the candidate by ~31.6), which is why it
    /// is not the default; selecting it emits a run warning.
    LrCoupledExact,
    /// Linear learning-rate coupling via the local-smoothness
    /// approximation `lr * L ~ 1`. The default.
    LrCoupledApprox,
}

/// Controller configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaCommConfig {
    /// Checkpoint interval in simulated seconds.
    pub t0: f64,
    /// Initial communication period (typically chosen by grid search).
    pub tau0: u32,
    /// Saturation decay factor in (0, 1).
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Slack on the "candidate must shrink the period" comparison.
    #[serde(default)]
    pub slack: u32,
    #[serde(default = "default_mode")]
    pub mode: AdaMode,
    /// Postpone scheduled learning-rate decays until the period reaches 1.
    #[serde(default = "default_true")]
    pub defer_lr_decay: bool,
    /// Hard cap on emitted periods.
    #[serde(default = "default_tau_max")]
    pub tau_max: u32,
}

fn default_gamma() -> f64 {
    AdaCommConfig::DEFAULT_GAMMA
}

fn default_mode() -> AdaMode {
    AdaMode::LrCoupledApprox
}

fn default_true() -> bool {
    true
}

fn default_tau_max() -> u32 {
    AdaCommConfig::DEFAULT_TAU_MAX
}

impl AdaCommConfig {
    pub const DEFAULT_GAMMA: f64 = 0.5;
    pub const DEFAULT_TAU_MAX: u32 = 100;

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::invalid("t0", "must be a positive finite number of seconds"));
        }
        if self.tau0 < 1 {
            return Err(Error::invalid("tau0", "must be >= 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid("gamma", "must be in (0,1)"));
        }
        if self.tau_max < 1 {
            return Err(Error::invalid("tau_max", "must be >= 1"));
        }
        if self.tau0 > self.tau_max {
            return Err(Error::invalid("tau0", "must not exceed tau_max"));
        }
        Ok(())
    }

    /// Whether a scheduled learning-rate decay should be postponed while the
    /// period is still above 1.
    pub fn should_defer_lr_decay(&self, current_tau: u32) -> bool {
        self.defer_lr_decay && current_tau > 1
    }
}

/// Mutable controller state across checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaCommState {
    /// Index of the last interval boundary processed.
    pub interval: u64,
    pub tau_prev: u32,
    pub initial_loss: f64,
    pub initial_lr: f64,
    /// Wall-clock time of the next checkpoint.
    pub next_checkpoint: f64,
}

/// Outcome of one checkpoint decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauDecision {
    pub interval: u64,
    pub f_ratio: f64,
    pub lr_ratio: f64,
    pub candidate: u32,
    pub branch: Branch,
    pub tau: u32,
}

impl AdaCommState {
    pub fn new(cfg: &AdaCommConfig, initial_loss: f64, initial_lr: f64) -> Result<Self> {
        cfg.validate()?;
        if !(initial_loss > 0.0 && initial_loss.is_finite()) {
            return Err(Error::invalid("initial_loss", "must be positive and finite"));
        }
        if !(initial_lr > 0.0 && initial_lr.is_finite()) {
            return Err(Error::invalid("initial_lr", "must be positive and finite"));
        }
        Ok(Self {
            interval: 0,
            tau_prev: cfg.tau0,
            initial_loss,
            initial_lr,
            next_checkpoint: cfg.t0,
        })
    }

    pub fn checkpoint_due(&self, wall_clock: f64) -> bool {
        wall_clock >= self.next_checkpoint
    }

    /// Decides the period for the interval starting at `wall_clock`.
    ///
    /// The candidate is `ceil(sqrt(ratio) * tau0)` where `ratio` is the
    /// loss ratio, scaled by the learning-rate ratio per [`AdaMode`]. The
    /// candidate is taken only when `candidate + slack < tau_prev`;
    /// otherwise the previous period is multiplied by `gamma` (rounded
    /// half-up, floored at 1).
    pub fn next_tau(
        &mut self,
        cfg: &AdaCommConfig,
        loss_now: f64,
        lr_now: f64,
        wall_clock: f64,
    ) -> Result<TauDecision> {
        if !(loss_now > 0.0 && loss_now.is_finite()) {
            return Err(Error::invalid("loss_now", "must be positive and finite"));
        }
        if !(lr_now > 0.0 && lr_now.is_finite()) {
            return Err(Error::invalid("lr_now", "must be positive and finite"));
        }
        let f_ratio = loss_now / self.initial_loss;
        let lr_ratio = self.initial_lr / lr_now;
        let scaled = match cfg.mode {
            AdaMode::Basic => f_ratio,
            AdaMode::LrCoupledExact => lr_ratio.powi(3) * f_ratio,
            AdaMode::LrCoupledApprox => lr_ratio * f_ratio,
        };
        let raw = scaled.sqrt() * cfg.tau0 as f64;
        let candidate = raw.ceil().max(1.0).min(u32::MAX as f64) as u32;
        let (branch, tau) = if candidate.saturating_add(cfg.slack) < self.tau_prev {
            (Branch::Formula, candidate)
        } else {
            let decayed = (cfg.gamma * self.tau_prev as f64).round().max(1.0) as u32;
            (Branch::Gamma, decayed)
        };
        let tau = tau.min(cfg.tau_max);

        self.interval = (wall_clock / cfg.t0).floor() as u64;
        self.next_checkpoint = cfg.t0 * (self.interval + 1) as f64;
        self.tau_prev = tau;
        Ok(TauDecision {
            interval: self.interval,
            f_ratio,
            lr_ratio,
            candidate,
            branch,
            tau,
        })
    }
}

/// Closed-form minimizer of the error-runtime bound over the (continuous)
/// communication period at horizon `t`:
/// `sqrt(2 * (initial_loss - min_loss) * delay / (lr^3 * lipschitz^2 * noise_var * t))`.
pub fn optimal_tau(
    initial_loss: f64,
    min_loss: f64,
    delay: f64,
    lr: f64,
    lipschitz: f64,
    noise_var: f64,
    horizon: f64,
) -> Result<f64> {
    for (name, v) in [
        ("delay", delay),
        ("lr", lr),
        ("lipschitz", lipschitz),
        ("noise_var", noise_var),
        ("horizon", horizon),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(name, "must be positive and finite"));
        }
    }
    if !(initial_loss > min_loss) {
        return Err(Error::invalid("initial_loss", "must exceed min_loss"));
    }
    Ok((2.0 * (initial_loss - min_loss) * delay / (lr.powi(3) * lipschitz * lipschitz * noise_var * horizon))
        .sqrt())
}

/// Picks the initial period by running each candidate for `budget_seconds`
/// of simulated time and keeping the lowest final loss. Ties and
/// near-ties resolve toward the smaller period; candidates that diverge
/// are skipped.
pub fn grid_search_tau0(
    candidates: &[u32],
    budget_seconds: f64,
    base: &TrainConfig,
    obj: &Objective,
    dm: &DelayModel,
) -> Result<u32> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidates", "must be nonempty"));
    }
    if !(budget_seconds > 0.0) {
        return Err(Error::invalid("budget_seconds", "must be positive"));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(u32, f64)> = None;
    for &tau in &sorted {
        if tau == 0 {
            return Err(Error::invalid("candidates", "periods must be >= 1"));
        }
        let mut cfg = base.clone();
        cfg.schedule = CommSchedule::Fixed { tau };
        cfg.stop.max_seconds = Some(budget_seconds);
        cfg.stop.max_iterations = None;
        let trace = run_pasgd(&cfg, obj, dm)?;
        if trace.diverged {
            continue;
        }
        let Some(loss) = trace.final_loss() else { continue };
        match best {
            Some((_, best_loss)) if loss >= best_loss => {}
            _ => best = Some((tau, loss)),
        }
    }
    best.map(|(tau, _)| tau).ok_or(Error::AllCandidatesDiverged)
}
