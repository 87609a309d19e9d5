//! Run traces: one record per synchronization, plus controller events.
//!
//! Traces serialize to CSV with a fixed column order and shortest
//! round-trip float formatting, so identical runs produce byte-identical
//! files.

use std::fmt::Write as _;

use crate::objectives::ModelVector;

/// One synchronization point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub wall_clock: f64,
    /// Local iterations completed so far (sum of tau over rounds).
    pub iteration: u64,
    pub round: u64,
    pub tau_used: u32,
    pub lr_used: f64,
    /// Full deterministic loss of the averaged model.
    pub train_loss: f64,
    /// Squared gradient norm of the averaged model.
    pub grad_norm_sq: f64,
}

/// Which branch of the period-update rule produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// The loss-ratio formula, taken when its value shrinks the period.
    Formula,
    /// The saturation fallback: multiply the previous period by gamma.
    Gamma,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Formula => "formula",
            Branch::Gamma => "gamma",
        }
    }
}

/// One adaptive-controller checkpoint decision.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaCommEvent {
    pub wall_clock: f64,
    pub interval: u64,
    pub f_ratio: f64,
    pub lr_ratio: f64,
    pub candidate: u32,
    pub branch: Branch,
    pub tau_out: u32,
}

/// Full output of a simulated run.
#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub events: Vec<AdaCommEvent>,
    pub diverged: bool,
    /// Human-readable reason when `diverged` is set.
    pub divergence: Option<String>,
    pub warnings: Vec<String>,
    /// Per-local-iteration squared gradient norm of the virtual averaged
    /// model, populated only when dense tracking is enabled.
    pub dense_grad_norm_sq: Option<Vec<f64>>,
    pub final_model: Option<ModelVector>,
}

pub const TRACE_CSV_HEADER: &str =
    "wall_clock,iteration,round,tau_used,lr_used,train_loss,grad_norm_sq";
pub const EVENTS_CSV_HEADER: &str =
    "wall_clock,interval,f_ratio,lr_ratio,candidate,branch,tau_out";

impl RunTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.wall_clock, r.iteration, r.round, r.tau_used, r.lr_used, r.train_loss, r.grad_norm_sq
            )
            .expect("write to string");
        }
        out
    }

    pub fn events_to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(EVENTS_CSV_HEADER);
        out.push('\n');
        for e in &self.events {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.wall_clock,
                e.interval,
                e.f_ratio,
                e.lr_ratio,
                e.candidate,
                e.branch.as_str(),
                e.tau_out
            )
            .expect("write to string");
        }
        out
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.train_loss)
    }

    /// Wall-clock time of the first record at or below `target` loss.
    pub fn time_to_loss(&self, target: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.train_loss <= target)
            .map(|r| r.wall_clock)
    }

    /// Mean loss over the trailing `tail_frac` fraction of records.
    pub fn plateau_loss(&self, tail_frac: f64) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        let n = self.records.len();
        let k = ((n as f64 * tail_frac).ceil() as usize).clamp(1, n);
        let tail = &self.records[n - k..];
        Some(tail.iter().map(|r| r.train_loss).sum::<f64>() / k as f64)
    }

    /// Communication periods in round order.
    pub fn tau_sequence(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.tau_used).collect()
    }
}
