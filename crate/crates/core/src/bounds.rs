//! Closed-form convergence bounds and schedule conditions.
//!
//! The central quantity is a bound on the smallest expected squared
//! gradient norm reachable within a wall-clock budget: a transient term
//! that shrinks with the budget plus a noise floor that grows with the
//! communication period. Also here: the asymptotic conditions a joint
//! learning-rate/period schedule must satisfy to converge, the weighted
//! gradient-norm statistic those conditions control, and a fixed-rate
//! bound for arbitrary period sequences.

use serde::{Deserialize, Serialize};

use crate::trace::TraceRecord;
use crate::{Error, Result};

/// Constants entering the bounds. `step_time`/`comm_delay` describe the
/// constant-delay runtime model; plugging in expectations of a stochastic
/// model makes the results heuristic approximations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Loss at the common starting point.
    pub initial_loss: f64,
    /// Lower bound of the objective.
    pub min_loss: f64,
    /// Smoothness constant of the gradient.
    pub lipschitz: f64,
    /// Additive gradient-variance bound (JSON key `C`).
    pub noise_var: f64,
    /// Multiplicative gradient-variance slope (JSON key `M`).
    pub noise_slope: f64,
    pub workers: u32,
    /// Seconds per local step.
    pub step_time: f64,
    /// Seconds per averaging round.
    pub comm_delay: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_loss > self.min_loss) {
            return Err(Error::invalid("initial_loss", "must exceed min_loss"));
        }
        if !(self.lipschitz >= 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::invalid("lipschitz", "must be a nonnegative finite scalar"));
        }
        if !(self.noise_var >= 0.0 && self.noise_slope >= 0.0) {
            return Err(Error::invalid("noise", "variance constants must be >= 0"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        if !(self.step_time > 0.0 && self.step_time.is_finite()) {
            return Err(Error::invalid("step_time", "must be positive and finite"));
        }
        if !(self.comm_delay >= 0.0 && self.comm_delay.is_finite()) {
            return Err(Error::invalid("comm_delay", "must be >= 0 and finite"));
        }
        Ok(())
    }
}

/// Bound on the minimal expected squared gradient norm within `horizon`
/// seconds at communication period `tau`:
///
/// `2*(F1 - Finf)/(lr*T) * (Y + D/tau) + lr*L*C/m + lr^2*L^2*C*(tau - 1)`.
///
/// `tau` is treated as continuous so the minimizer can be probed; integer
/// callers pass whole values.
pub fn error_runtime_bound(p: &BoundParams, lr: f64, tau: f64, horizon: f64) -> Result<f64> {
    p.validate()?;
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid("lr", "must be positive and finite"));
    }
    if !(tau >= 1.0) {
        return Err(Error::invalid("tau", "must be >= 1"));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    let transient = 2.0 * (p.initial_loss - p.min_loss) / (lr * horizon)
        * (p.step_time + p.comm_delay / tau);
    Ok(transient + bound_floor(p, lr, tau))
}

/// The budget-independent residual of the bound:
/// `lr*L*C/m + lr^2*L^2*C*(tau - 1)`.
pub fn bound_floor(p: &BoundParams, lr: f64, tau: f64) -> f64 {
    let el = lr * p.lipschitz;
    lr * p.lipschitz * p.noise_var / p.workers as f64 + el * el * p.noise_var * (tau - 1.0)
}

/// Wall-clock horizon at which the bounds for two periods cross, found by
/// bisection on their difference. Returns `None` when no crossing exists
/// in a sign-changing bracket.
pub fn crossover_time(p: &BoundParams, lr: f64, tau_a: f64, tau_b: f64) -> Result<Option<f64>> {
    let diff = |t: f64| -> Result<f64> {
        Ok(error_runtime_bound(p, lr, tau_a, t)? - error_runtime_bound(p, lr, tau_b, t)?)
    };
    let mut lo = 1e-9;
    let mut hi = 1.0;
    let f_lo = diff(lo)?;
    // expand until the sign flips (the difference is monotone in 1/t)
    let mut f_hi = diff(hi)?;
    let mut expansions = 0;
    while f_lo.signum() == f_hi.signum() {
        hi *= 10.0;
        f_hi = diff(hi)?;
        expansions += 1;
        if expansions > 60 {
            return Ok(None);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = diff(mid)?;
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / hi < 1e-12 {
            break;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Learning-rate family `lr_r = coef / (r+1)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrFamily {
    pub coef: f64,
    pub exponent: f64,
}

/// Communication-period family across rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TauFamily {
    Constant { value: f64 },
    /// `tau_r = coef / (r+1)^exponent`.
    Power { coef: f64, exponent: f64 },
    /// Any sequence confined to `[1, upper]`, e.g. a nonincreasing
    /// controller output.
    Bounded { upper: f64 },
}

/// Verdict for the three summability conditions of a joint schedule:
/// `sum lr*tau` must diverge while `sum lr^2*tau` and `sum lr^3*tau^2`
/// stay finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub sum_lr_tau_diverges: bool,
    pub sum_lr2_tau_converges: bool,
    pub sum_lr3_tau2_converges: bool,
}

impl ConditionReport {
    pub fn pass(&self) -> bool {
        self.sum_lr_tau_diverges && self.sum_lr2_tau_converges && self.sum_lr3_tau2_converges
    }
}

/// Analytic check of the three conditions via series-exponent tests.
///
/// For power families the term `lr_r^a * tau_r^b` behaves like
/// `(r+1)^-(a*p + b*q)`, which sums finitely iff the exponent exceeds 1.
/// For bounded periods the verdicts reduce to the plain learning-rate
/// tests, since `1 <= tau_r <= upper` sandwiches every term.
pub fn check_adaptive_conditions(lr: &LrFamily, tau: &TauFamily) -> Result<ConditionReport> {
    if !(lr.coef > 0.0 && lr.coef.is_finite()) || !(lr.exponent >= 0.0) {
        return Err(Error::invalid("lr family", "need coef > 0 and exponent >= 0"));
    }
    let p = lr.exponent;
    let (q, bounded_ok) = match *tau {
        TauFamily::Constant { value } => {
            if !(value >= 1.0 && value.is_finite()) {
                return Err(Error::invalid("tau family", "constant period must be >= 1"));
            }
            (0.0, false)
        }
        TauFamily::Power { coef, exponent } => {
            if !(coef >= 1.0 && coef.is_finite()) || !(exponent >= 0.0) {
                return Err(Error::invalid("tau family", "need coef >= 1 and exponent >= 0"));
            }
            (exponent, false)
        }
        TauFamily::Bounded { upper } => {
            if !(upper >= 1.0 && upper.is_finite()) {
                return Err(Error::invalid("tau family", "bound must be >= 1"));
            }
            (0.0, true)
        }
    };
    // Exponents of 1/(r+1) in each summand; `bounded_ok` collapses q to 0
    // on both sides of the sandwich, which is already encoded by q = 0.
    let _ = bounded_ok;
    let e1 = p + q;
    let e2 = 2.0 * p + q;
    let e3 = 3.0 * p + 2.0 * q;
    Ok(ConditionReport {
        sum_lr_tau_diverges: e1 <= 1.0,
        sum_lr2_tau_converges: e2 > 1.0,
        sum_lr3_tau2_converges: e3 > 1.0,
    })
}

/// Partial sums of the three condition series for explicit finite
/// schedules — a diagnostic, not a convergence verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialSums {
    pub sum_lr_tau: f64,
    pub sum_lr2_tau: f64,
    pub sum_lr3_tau2: f64,
}

pub fn partial_sums(lr_seq: &[f64], tau_seq: &[f64]) -> Result<PartialSums> {
    if lr_seq.is_empty() || lr_seq.len() != tau_seq.len() {
        return Err(Error::invalid(
            "sequences",
            "lr and tau sequences must be nonempty and of equal length",
        ));
    }
    if lr_seq.iter().chain(tau_seq).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("sequences", "entries must be positive and finite"));
    }
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    for (&lr, &tau) in lr_seq.iter().zip(tau_seq) {
        s1 += lr * tau;
        s2 += lr * lr * tau;
        s3 += lr * lr * lr * tau * tau;
    }
    Ok(PartialSums {
        sum_lr_tau: s1,
        sum_lr2_tau: s2,
        sum_lr3_tau2: s3,
    })
}

/// The lr*tau-weighted average of recorded squared gradient norms — the
/// statistic the schedule conditions drive to zero. Evaluated at
/// synchronization points, each record standing in for its whole round;
/// see [`weighted_grad_stat_dense`] for the per-iteration variant.
pub fn weighted_grad_stat(records: &[TraceRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("trace", "must be nonempty"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for r in records {
        let w = r.lr_used * r.tau_used as f64;
        num += w * r.grad_norm_sq;
        den += w;
    }
    Ok(num / den)
}

/// Per-iteration variant: `dense` holds the squared gradient norm of the
/// virtual averaged model at every local iteration (see the engine's
/// dense-tracking option); each is weighted by its round's learning rate.
pub fn weighted_grad_stat_dense(records: &[TraceRecord], dense: &[f64]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("trace", "must be nonempty"));
    }
    let total: u64 = records.last().map(|r| r.iteration).unwrap_or(0);
    if dense.len() as u64 != total {
        return Err(Error::invalid(
            "dense",
            format!("expected {} per-iteration entries, got {}", total, dense.len()),
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut k = 0usize;
    for r in records {
        for _ in 0..r.tau_used {
            num += r.lr_used * dense[k];
            k += 1;
        }
        den += r.lr_used * r.tau_used as f64;
    }
    Ok(num / den)
}

/// Fixed-learning-rate bound for an arbitrary period sequence over
/// `total_iterations = sum(tau_seq)` iterations:
///
/// `2*(F1 - Finf)/(lr*K) + lr*L*C/m + lr^2*L^2*C*(sum tau^2 / sum tau - 1)`.
pub fn simplified_fixed_lr_bound(
    p: &BoundParams,
    lr: f64,
    tau_seq: &[u32],
    total_iterations: u64,
) -> Result<f64> {
    p.validate()?;
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid("lr", "must be positive and finite"));
    }
    if tau_seq.is_empty() || tau_seq.contains(&0) {
        return Err(Error::invalid("tau_seq", "must be nonempty with periods >= 1"));
    }
    let sum: u64 = tau_seq.iter().map(|&t| t as u64).sum();
    if sum != total_iterations {
        return Err(Error::invalid(
            "total_iterations",
            format!("must equal sum(tau_seq) = {}", sum),
        ));
    }
    let sum_sq: f64 = tau_seq.iter().map(|&t| (t as f64) * (t as f64)).sum();
    let el = lr * p.lipschitz;
    Ok(2.0 * (p.initial_loss - p.min_loss) / (lr * total_iterations as f64)
        + lr * p.lipschitz * p.noise_var / p.workers as f64
        + el * el * p.noise_var * (sum_sq / sum as f64 - 1.0))
}
