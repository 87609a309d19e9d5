//! The training simulator: `m` virtual workers run `tau` local SGD steps
//! per round, the models are averaged, and simulated wall-clock time
//! advances by the slowest worker's compute time plus the communication
//! delay.
//!
//! Determinism contract: worker `i` in round `r` draws gradients from the
//! substream `(seed, STREAM_GRAD, i, r)` and compute times from
//! `(seed, STREAM_DELAY, i, r)`, so a trace depends only on the config and
//! seed, never on execution order.

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::adacomm::{AdaCommConfig, AdaCommState, AdaMode};
use crate::delay::DelayModel;
use crate::objectives::{ModelVector, Objective};
use crate::rng::{substream, STREAM_DELAY, STREAM_GRAD, STREAM_INIT};
use crate::trace::{AdaCommEvent, RunTrace, TraceRecord};
use crate::{Error, Result};

/// A run is flagged divergent once the loss exceeds this value.
pub const DIVERGENCE_LOSS: f64 = 1e6;

/// Momentum configuration for local updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Momentum {
    /// Plain SGD steps.
    None,
    /// Heavy-ball on each worker; buffers persist across rounds. This keeps
    /// stale pre-averaging history in the buffer and is kept as the naive
    /// baseline variant.
    Local { beta: f64 },
    /// Global heavy-ball on the per-round accumulated update, with local
    /// heavy-ball buffers cleared at every round start.
    Block { beta_global: f64, beta_local: f64 },
}

impl Momentum {
    fn validate(&self) -> Result<()> {
        let betas: &[f64] = match self {
            Momentum::None => &[],
            Momentum::Local { beta } => std::slice::from_ref(beta),
            Momentum::Block { beta_global, beta_local } => {
                return check_betas(&[*beta_global, *beta_local]);
            }
        };
        check_betas(betas)
    }

    fn local_beta(&self) -> Option<f64> {
        match self {
            Momentum::None => None,
            Momentum::Local { beta } => Some(*beta),
            Momentum::Block { beta_local, .. } => Some(*beta_local),
        }
    }
}

fn check_betas(betas: &[f64]) -> Result<()> {
    for &b in betas {
        if !(0.0..1.0).contains(&b) {
            return Err(Error::invalid("momentum", "beta must satisfy 0 <= beta < 1"));
        }
    }
    Ok(())
}

/// Fixed communication period or the adaptive controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CommSchedule {
    Fixed { tau: u32 },
    Adacomm(AdaCommConfig),
}

/// When a scheduled decay fires: at an absolute local-iteration count, or
/// after a number of epochs (converted via the dataset size).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayTrigger {
    Iteration(u64),
    Epoch(f64),
}

/// Step-decay learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub initial: f64,
    /// Multiplier applied at each trigger (default 0.1).
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
    #[serde(default)]
    pub decay_at: Vec<DecayTrigger>,
}

fn default_decay_factor() -> f64 {
    0.1
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self {
            initial: lr,
            decay_factor: 0.1,
            decay_at: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.initial > 0.0 && self.initial.is_finite()) {
            return Err(Error::invalid("lr.initial", "must be positive and finite"));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return Err(Error::invalid("lr.decay_factor", "must be in (0,1)"));
        }
        for t in &self.decay_at {
            match *t {
                DecayTrigger::Iteration(iteration) if iteration == 0 => {
                    return Err(Error::invalid("lr.decay_at", "iteration must be >= 1"));
                }
                DecayTrigger::Epoch(epoch) if !(epoch > 0.0 && epoch.is_finite()) => {
                    return Err(Error::invalid("lr.decay_at", "epoch must be positive"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Resolves triggers to ascending iteration thresholds. Epoch triggers
    /// need a dataset: one epoch is `n / (workers * batch)` iterations.
    fn thresholds(&self, obj: &Objective, workers: u32, batch: u32) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(self.decay_at.len());
        for t in &self.decay_at {
            match *t {
                DecayTrigger::Iteration(iteration) => out.push(iteration),
                DecayTrigger::Epoch(epoch) => {
                    let n = obj.n_points().ok_or_else(|| {
                        Error::invalid(
                            "lr.decay_at",
                            "epoch triggers need a dataset-backed objective",
                        )
                    })?;
                    let per_epoch = n as f64 / (workers as f64 * batch as f64);
                    out.push((epoch * per_epoch).ceil().max(1.0) as u64);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// Run termination: simulated seconds and/or local-iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopRule {
    #[serde(default)]
    pub max_seconds: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<u64>,
}

impl StopRule {
    pub fn seconds(s: f64) -> Self {
        Self {
            max_seconds: Some(s),
            max_iterations: None,
        }
    }

    fn validate(&self) -> Result<()> {
        match (self.max_seconds, self.max_iterations) {
            (None, None) => Err(Error::invalid("stop", "set max_seconds and/or max_iterations")),
            (Some(s), _) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::invalid("stop.max_seconds", "must be positive and finite"))
            }
            (_, Some(0)) => Err(Error::invalid("stop.max_iterations", "must be >= 1")),
            _ => Ok(()),
        }
    }

    fn reached(&self, wall: f64, iterations: u64) -> bool {
        self.max_seconds.is_some_and(|t| wall >= t)
            || self.max_iterations.is_some_and(|k| iterations >= k)
    }
}

/// Initial model placement, shared by all workers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitSpec {
    Zeros,
    /// Every coordinate set to `value`.
    Uniform { value: f64 },
    /// I.i.d. Gaussian coordinates drawn from the init substream.
    Gaussian { std: f64 },
}

impl InitSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            InitSpec::Uniform { value } if !value.is_finite() => {
                Err(Error::invalid("init.value", "must be finite"))
            }
            InitSpec::Gaussian { std } if !(std > 0.0 && std.is_finite()) => {
                Err(Error::invalid("init.std", "must be positive and finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self, dim: usize, seed: u64) -> ModelVector {
        match *self {
            InitSpec::Zeros => ModelVector::zeros(dim),
            InitSpec::Uniform { value } => {
                ModelVector::new(vec![value; dim]).expect("finite init value")
            }
            InitSpec::Gaussian { std } => {
                use rand_distr::{Distribution, StandardNormal};
                let mut rng = substream(seed, STREAM_INIT, 0, 0);
                let values = (0..dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        std * z
                    })
                    .collect();
                ModelVector::new(values).expect("finite gaussian init")
            }
        }
    }
}

/// Parameters of the smoothness/noise conditions checked before a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrConditionParams {
    pub lipschitz: f64,
    /// Gradient-variance slope (JSON key `M`).
    #[serde(rename = "M", default)]
    pub noise_slope: f64,
}

/// Full simulator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub workers: u32,
    #[serde(default = "default_batch_size")]
    pub batch_size: u32,
    pub lr: LrSchedule,
    #[serde(default = "default_momentum")]
    pub momentum: Momentum,
    pub schedule: CommSchedule,
    pub stop: StopRule,
    #[serde(default = "default_init")]
    pub init: InitSpec,
    pub seed: u64,
    /// Evaluate the virtual averaged model after every local step and record
    /// its squared gradient norm. Costs a full-gradient evaluation per
    /// iteration; intended for small models.
    #[serde(default)]
    pub dense_grad_tracking: bool,
    /// When set, the learning-rate conditions are checked at the start and
    /// after every period/lr change; violations are recorded as warnings.
    #[serde(default)]
    pub lr_condition: Option<LrConditionParams>,
}

fn default_batch_size() -> u32 {
    1
}

fn default_momentum() -> Momentum {
    Momentum::None
}

fn default_init() -> InitSpec {
    InitSpec::Gaussian { std: 1.0 }
}

impl TrainConfig {
    pub fn fixed(workers: u32, batch_size: u32, lr: f64, tau: u32, max_seconds: f64, seed: u64) -> Self {
        Self {
            workers,
            batch_size,
            lr: LrSchedule::constant(lr),
            momentum: Momentum::None,
            schedule: CommSchedule::Fixed { tau },
            stop: StopRule::seconds(max_seconds),
            init: InitSpec::Gaussian { std: 1.0 },
            seed,
            dense_grad_tracking: false,
            lr_condition: None,
        }
    }

    pub fn validate(&self, obj: &Objective, dm: &DelayModel) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::invalid("workers", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        if let Some(n) = obj.n_points() {
            if self.batch_size as usize > n {
                return Err(Error::invalid(
                    "batch_size",
                    format!("exceeds dataset size {}", n),
                ));
            }
        }
        self.lr.validate()?;
        self.momentum.validate()?;
        self.stop.validate()?;
        self.init.validate()?;
        match &self.schedule {
            CommSchedule::Fixed { tau } if *tau == 0 => {
                return Err(Error::invalid("tau", "must be >= 1"));
            }
            CommSchedule::Fixed { .. } => {}
            CommSchedule::Adacomm(cfg) => cfg.validate()?,
        }
        dm.validate()?;
        Ok(())
    }
}

/// Per-worker state between synchronizations.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerState {
    pub x: ModelVector,
    pub momentum_buffer: ModelVector,
    /// Substream identifier: the worker's index.
    pub stream_id: u32,
}

impl WorkerState {
    pub fn new(x: ModelVector, stream_id: u32) -> Self {
        let dim = x.dim();
        Self {
            x,
            momentum_buffer: ModelVector::zeros(dim),
            stream_id,
        }
    }
}

/// One local SGD step: draw a stochastic gradient and move against it,
/// through the heavy-ball buffer when momentum is active.
pub fn local_step(
    worker: &mut WorkerState,
    obj: &Objective,
    lr: f64,
    batch_size: u32,
    momentum: &Momentum,
    rng: &mut ChaCha12Rng,
) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::invalid("lr", "must be positive"));
    }
    let g = obj.stochastic_gradient(&worker.x, batch_size, rng)?;
    if !g.is_finite() {
        return Err(Error::NonFinite("stochastic gradient"));
    }
    match momentum.local_beta() {
        None => {
            for (xi, gi) in worker.x.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *xi -= lr * gi;
            }
        }
        Some(beta) => {
            let buf = worker.momentum_buffer.as_mut_slice();
            for ((xi, bi), gi) in worker.x.as_mut_slice().iter_mut().zip(buf).zip(g.as_slice()) {
                *bi = beta * *bi + gi;
                *xi -= lr * *bi;
            }
        }
    }
    Ok(())
}

/// Arithmetic mean over workers, accumulated in worker-index order and
/// divided by the count. The reduction order is part of the contract:
/// reproducing it reproduces the result bit-for-bit.
pub fn average_models(workers: &[WorkerState]) -> Result<ModelVector> {
    let first = workers.first().ok_or_else(|| Error::invalid("workers", "must be nonempty"))?;
    let dim = first.x.dim();
    let mut sum = vec![0.0; dim];
    for w in workers {
        if w.x.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: w.x.dim(),
            });
        }
        for (s, &xi) in sum.iter_mut().zip(w.x.as_slice()) {
            *s += xi;
        }
    }
    let inv = workers.len() as f64;
    for s in &mut sum {
        *s /= inv;
    }
    Ok(ModelVector::from_raw(sum))
}

/// Global heavy-ball step on the accumulated per-round update:
/// `buf <- beta_global * buf + accumulated`, `model <- round_start - lr * buf`.
/// Returns `(new_buffer, new_model)`.
pub fn block_momentum_round(
    global_buf: &ModelVector,
    round_start: &ModelVector,
    accumulated: &ModelVector,
    beta_global: f64,
    lr: f64,
) -> Result<(ModelVector, ModelVector)> {
    let dim = round_start.dim();
    if global_buf.dim() != dim || accumulated.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: global_buf.dim().max(accumulated.dim()),
        });
    }
    let mut buf = Vec::with_capacity(dim);
    let mut model = Vec::with_capacity(dim);
    for i in 0..dim {
        let b = beta_global * global_buf.as_slice()[i] + accumulated.as_slice()[i];
        buf.push(b);
        model.push(round_start.as_slice()[i] - lr * b);
    }
    Ok((ModelVector::from_raw(buf), ModelVector::from_raw(model)))
}

/// Reports the two learning-rate conditions for `tau`-step rounds. `basic`
/// ignores the variance slope; `refined` includes it and the worker count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrConditionReport {
    pub basic_lhs: f64,
    pub basic_holds: bool,
    pub refined_lhs: f64,
    pub refined_holds: bool,
}

impl LrConditionReport {
    pub fn all_hold(&self) -> bool {
        self.basic_holds && self.refined_holds
    }
}

/// Evaluates `lr*L + lr^2*L^2*tau*(tau-1) <= 1` and
/// `lr^2*L^2*(tau-1)*(2*M + tau) + lr*L*(M/m + 1) <= 1`.
pub fn validate_lr(lr: f64, lipschitz: f64, tau: u32, noise_slope: f64, workers: u32) -> LrConditionReport {
    let el = lr * lipschitz;
    let el2 = el * el;
    let t = tau as f64;
    let basic_lhs = el + el2 * t * (t - 1.0);
    let refined_lhs =
        el2 * (t - 1.0) * (2.0 * noise_slope + t) + el * (noise_slope / workers as f64 + 1.0);
    LrConditionReport {
        basic_lhs,
        basic_holds: basic_lhs <= 1.0,
        refined_lhs,
        refined_holds: refined_lhs <= 1.0,
    }
}

/// Runs the simulator. The trace carries one record per synchronization;
/// on divergence (non-finite loss, loss above [`DIVERGENCE_LOSS`], or a
/// non-finite gradient) it is truncated and flagged.
pub fn run_pasgd(cfg: &TrainConfig, obj: &Objective, dm: &DelayModel) -> Result<RunTrace> {
    cfg.validate(obj, dm)?;
    let dim = obj.dimension();
    let comm = dm.comm_delay(cfg.workers)?;
    let mut model = cfg.init.build(dim, cfg.seed);
    let mut workers: Vec<WorkerState> = (0..cfg.workers)
        .map(|i| WorkerState::new(model.clone(), i))
        .collect();
    let mut global_buf = ModelVector::zeros(dim);

    let mut trace = RunTrace::default();
    if cfg.dense_grad_tracking {
        trace.dense_grad_norm_sq = Some(Vec::new());
    }

    let mut lr = cfg.lr.initial;
    let mut pending_decays: std::collections::VecDeque<u64> = cfg
        .lr
        .thresholds(obj, cfg.workers, cfg.batch_size)?
        .into();

    let initial_loss = obj.loss(&model)?;
    let (mut tau, ada_cfg, mut ada_state) = match &cfg.schedule {
        CommSchedule::Fixed { tau } => (*tau, None, None),
        CommSchedule::Adacomm(acfg) => {
            if !(initial_loss > 0.0) {
                return Err(Error::invalid(
                    "init",
                    "adaptive schedule needs a positive initial loss",
                ));
            }
            if acfg.mode == AdaMode::LrCoupledExact {
                trace.warnings.push(
                    "lr_coupled_exact reacts cubically to lr decays and can push the period \
                     to divergence-prone values; lr_coupled_approx is the recommended mode"
                        .to_string(),
                );
            }
            (acfg.tau0, Some(*acfg), Some(AdaCommState::new(acfg, initial_loss, lr)?))
        }
    };

    let check_lr_conditions = |trace: &mut RunTrace, lr: f64, tau: u32| {
        if let Some(p) = &cfg.lr_condition {
            let report = validate_lr(lr, p.lipschitz, tau, p.noise_slope, cfg.workers);
            if !report.all_hold() {
                trace.warnings.push(format!(
                    "lr condition violated at lr={lr} tau={tau}: basic lhs {:.6} {} 1, refined lhs {:.6} {} 1",
                    report.basic_lhs,
                    if report.basic_holds { "<=" } else { ">" },
                    report.refined_lhs,
                    if report.refined_holds { "<=" } else { ">" },
                ));
            }
        }
    };
    check_lr_conditions(&mut trace, lr, tau);

    let defer_decays = ada_cfg.is_some_and(|c| c.defer_lr_decay);
    let mut wall = 0.0_f64;
    let mut iterations = 0_u64;
    let mut round = 0_u64;

    while !cfg.stop.reached(wall, iterations) {
        round += 1;

        // Scheduled decays fire at round starts, unless the adaptive
        // schedule defers them to period-1 checkpoints.
        if !defer_decays {
            let mut changed = false;
            while pending_decays.front().is_some_and(|&th| th <= iterations) {
                pending_decays.pop_front();
                lr *= cfg.lr.decay_factor;
                changed = true;
            }
            if changed {
                check_lr_conditions(&mut trace, lr, tau);
            }
        }

        let round_start = model.clone();
        if matches!(cfg.momentum, Momentum::Block { .. }) {
            for w in &mut workers {
                w.momentum_buffer = ModelVector::zeros(dim);
            }
        }

        // Local updates, step-major so dense tracking can observe the
        // virtual averaged model after every iteration. Each worker owns
        // its substream, so the loop order does not affect results.
        let mut grad_rngs: Vec<ChaCha12Rng> = (0..cfg.workers)
            .map(|i| substream(cfg.seed, STREAM_GRAD, i as u64, round))
            .collect();
        let mut failed: Option<String> = None;
        'steps: for _ in 0..tau {
            for (w, rng) in workers.iter_mut().zip(&mut grad_rngs) {
                if let Err(e) = local_step(w, obj, lr, cfg.batch_size, &cfg.momentum, rng) {
                    failed = Some(format!("round {round}: {e}"));
                    break 'steps;
                }
            }
            if let Some(dense) = trace.dense_grad_norm_sq.as_mut() {
                let avg = average_models(&workers)?;
                dense.push(obj.full_gradient(&avg)?.norm_sq());
            }
        }
        if let Some(reason) = failed {
            trace.diverged = true;
            trace.divergence = Some(reason);
            break;
        }

        // Wall-clock advance: slowest worker's summed step times plus the
        // communication delay.
        let mut slowest = f64::NEG_INFINITY;
        for i in 0..cfg.workers {
            let mut rng = substream(cfg.seed, STREAM_DELAY, i as u64, round);
            let mut total = 0.0;
            for _ in 0..tau {
                total += dm.compute.sample(&mut rng);
            }
            slowest = slowest.max(total);
        }
        wall += slowest + comm;
        iterations += tau as u64;

        // Synchronize.
        let avg = average_models(&workers)?;
        let new_model = match cfg.momentum {
            Momentum::Block { beta_global, .. } => {
                // Same recursion as `block_momentum_round`, anchored on the
                // averaged model so that beta_global = 0 reproduces plain
                // averaging exactly: model = avg - lr*beta*buf_prev and
                // buf = beta*buf_prev + (start - avg)/lr.
                let mut buf = Vec::with_capacity(dim);
                let mut next = Vec::with_capacity(dim);
                let scale = lr * beta_global;
                for i in 0..dim {
                    let accumulated =
                        (round_start.as_slice()[i] - avg.as_slice()[i]) / lr;
                    next.push(avg.as_slice()[i] - scale * global_buf.as_slice()[i]);
                    buf.push(beta_global * global_buf.as_slice()[i] + accumulated);
                }
                global_buf = ModelVector::from_raw(buf);
                ModelVector::from_raw(next)
            }
            _ => avg,
        };
        model = new_model;
        for w in &mut workers {
            w.x = model.clone();
        }

        let loss = obj.loss(&model)?;
        let grad_norm_sq = if loss.is_finite() {
            obj.full_gradient(&model)?.norm_sq()
        } else {
            f64::NAN
        };
        trace.records.push(TraceRecord {
            wall_clock: wall,
            iteration: iterations,
            round,
            tau_used: tau,
            lr_used: lr,
            train_loss: loss,
            grad_norm_sq,
        });
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            trace.diverged = true;
            trace.divergence = Some(format!("round {round}: loss {loss} exceeds {DIVERGENCE_LOSS}"));
            break;
        }

        // Adaptive checkpoint: re-select the period, then release at most
        // one deferred decay once the period has reached 1.
        if let (Some(acfg), Some(state)) = (&ada_cfg, &mut ada_state) {
            if state.checkpoint_due(wall) {
                let decision = state.next_tau(acfg, loss, lr, wall)?;
                trace.events.push(AdaCommEvent {
                    wall_clock: wall,
                    interval: decision.interval,
                    f_ratio: decision.f_ratio,
                    lr_ratio: decision.lr_ratio,
                    candidate: decision.candidate,
                    branch: decision.branch,
                    tau_out: decision.tau,
                });
                let mut changed = decision.tau != tau;
                tau = decision.tau;
                if defer_decays
                    && !acfg.should_defer_lr_decay(tau)
                    && pending_decays.front().is_some_and(|&th| th <= iterations)
                {
                    pending_decays.pop_front();
                    lr *= cfg.lr.decay_factor;
                    changed = true;
                }
                if changed {
                    check_lr_conditions(&mut trace, lr, tau);
                }
            }
        }
    }

    trace.final_model = Some(model);
    Ok(trace)
}
