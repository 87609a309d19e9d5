//! Browser demo bindings: three interactive views over the core crate,
//! exchanging JSON strings so the page stays framework-free.
//!
//! Build for the web with `wasm-pack build --target web --out-dir www/pkg`
//! and serve `www/`. The JSON layer is plain Rust, so the whole surface is
//! also testable natively.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use pasgd::adacomm::{optimal_tau, AdaCommConfig, AdaMode};
use pasgd::bounds::{bound_floor, error_runtime_bound, BoundParams};
use pasgd::delay::{speedup_ratio, CommScaling, ComputeDist, DelayModel};
use pasgd::engine::{run_pasgd, CommSchedule, InitSpec, TrainConfig};
use pasgd::objectives::{GradientNoise, Objective};

// ---------------------------------------------------------------------
// bound curves
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct BoundRequest {
    f1: f64,
    lr: f64,
    lipschitz: f64,
    noise_c: f64,
    workers: u32,
    step_time: f64,
    comm_delay: f64,
    taus: Vec<u32>,
    t_min: f64,
    t_max: f64,
    points: usize,
}

#[derive(Serialize)]
struct BoundCurve {
    tau: u32,
    floor: f64,
    points: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct BoundResponse {
    curves: Vec<BoundCurve>,
    tau_star: f64,
}

fn bound_curves_impl(request: &str) -> Result<String, String> {
    let req: BoundRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if !(req.t_min > 0.0 && req.t_max > req.t_min) || req.points < 2 {
        return Err("need 0 < t_min < t_max and points >= 2".into());
    }
    let params = BoundParams {
        initial_loss: req.f1,
        min_loss: 0.0,
        lipschitz: req.lipschitz,
        noise_var: req.noise_c,
        noise_slope: 0.0,
        workers: req.workers,
        step_time: req.step_time,
        comm_delay: req.comm_delay,
    };
    let ratio = (req.t_max / req.t_min).ln();
    let mut curves = Vec::new();
    for &tau in &req.taus {
        if tau == 0 {
            return Err("tau values must be >= 1".into());
        }
        let mut points = Vec::with_capacity(req.points);
        for k in 0..req.points {
            let t = req.t_min * (ratio * k as f64 / (req.points - 1) as f64).exp();
            let b = error_runtime_bound(&params, req.lr, tau as f64, t)
                .map_err(|e| e.to_string())?;
            points.push([t, b]);
        }
        curves.push(BoundCurve {
            tau,
            floor: bound_floor(&params, req.lr, tau as f64),
            points,
        });
    }
    let tau_star = optimal_tau(
        req.f1,
        0.0,
        req.comm_delay.max(f64::MIN_POSITIVE),
        req.lr,
        req.lipschitz,
        req.noise_c,
        req.t_max,
    )
    .map_err(|e| e.to_string())?;
    serde_json::to_string(&BoundResponse { curves, tau_star }).map_err(|e| e.to_string())
}

/// Error-runtime bound curves over a wall-clock grid, plus the closed-form
/// optimal period at the largest budget.
#[wasm_bindgen]
pub fn bound_curves(request: &str) -> Result<String, JsError> {
    bound_curves_impl(request).map_err(|e| JsError::new(&e))
}

// ---------------------------------------------------------------------
// runtime distributions
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct RuntimeRequest {
    /// "constant" | "exponential" | "shifted_exponential"
    dist: String,
    mean: f64,
    #[serde(default)]
    shift: f64,
    workers: u32,
    d0: f64,
    /// "constant" | "log2_tree" | "linear"
    #[serde(default = "default_scaling")]
    scaling: String,
    taus: Vec<u32>,
    samples: usize,
    seed: u64,
}

fn default_scaling() -> String {
    "constant".into()
}

#[derive(Serialize)]
struct RuntimeCurve {
    tau: u32,
    mean: f64,
    p50: f64,
    p99: f64,
    speedup: f64,
    /// Decimated empirical distribution: per-iteration time vs cumulative
    /// probability.
    cdf: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct RuntimeResponse {
    alpha: f64,
    curves: Vec<RuntimeCurve>,
}

fn runtime_tail_impl(request: &str) -> Result<String, String> {
    let req: RuntimeRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let compute = match req.dist.as_str() {
        "constant" => ComputeDist::Constant { y: req.mean },
        "exponential" => ComputeDist::Exponential { mean: req.mean },
        "shifted_exponential" => ComputeDist::ShiftedExponential {
            shift: req.shift,
            mean: req.mean,
        },
        other => return Err(format!("unknown dist `{other}`")),
    };
    let scaling = match req.scaling.as_str() {
        "constant" => CommScaling::Constant,
        "log2_tree" => CommScaling::Log2Tree,
        "linear" => CommScaling::Linear,
        other => return Err(format!("unknown scaling `{other}`")),
    };
    let dm = DelayModel {
        compute,
        d0: req.d0,
        scaling,
    };
    dm.validate().map_err(|e| e.to_string())?;
    let samples = req.samples.clamp(1000, 200_000);
    let alpha = dm.comm_delay(req.workers).map_err(|e| e.to_string())? / dm.compute.mean();
    let mut curves = Vec::new();
    let mut base_mean = None;
    for &tau in &req.taus {
        let cdf = dm
            .runtime_tail(req.workers, tau, samples, req.seed)
            .map_err(|e| e.to_string())?;
        let sorted = cdf.as_sorted_slice();
        let n = sorted.len();
        let keep = 256.min(n);
        let mut pts = Vec::with_capacity(keep);
        for k in 0..keep {
            let idx = ((k as f64 + 0.5) / keep as f64 * n as f64) as usize;
            let idx = idx.min(n - 1);
            pts.push([sorted[idx], (idx + 1) as f64 / n as f64]);
        }
        let mean = cdf.mean();
        let base = *base_mean.get_or_insert(mean);
        curves.push(RuntimeCurve {
            tau,
            mean,
            p50: cdf.quantile(0.5),
            p99: cdf.quantile(0.99),
            speedup: base / mean,
            cdf: pts,
        });
    }
    serde_json::to_string(&RuntimeResponse { alpha, curves }).map_err(|e| e.to_string())
}

/// Monte-Carlo per-iteration runtime distributions for a list of
/// communication periods, with means, tail quantiles, and the measured
/// speedup relative to the first listed period.
#[wasm_bindgen]
pub fn runtime_tail(request: &str) -> Result<String, JsError> {
    runtime_tail_impl(request).map_err(|e| JsError::new(&e))
}

// ---------------------------------------------------------------------
// training simulation
// ---------------------------------------------------------------------

#[derive(Deserialize)]
struct SimulateRequest {
    dimension: usize,
    noise_m: f64,
    noise_c: f64,
    workers: u32,
    lr: f64,
    step_time: f64,
    d0: f64,
    taus: Vec<u32>,
    #[serde(default)]
    adacomm: Option<AdaRequest>,
    max_seconds: f64,
    seed: u64,
}

#[derive(Deserialize)]
struct AdaRequest {
    t0: f64,
    tau0: u32,
    #[serde(default = "default_gamma")]
    gamma: f64,
}

fn default_gamma() -> f64 {
    0.5
}

#[derive(Serialize)]
struct SimRun {
    label: String,
    diverged: bool,
    /// Wall-clock seconds vs training loss at each synchronization.
    points: Vec<[f64; 2]>,
    /// Communication period per synchronization.
    taus: Vec<u32>,
}

#[derive(Serialize)]
struct SimulateResponse {
    runs: Vec<SimRun>,
}

fn simulate_tradeoff_impl(request: &str) -> Result<String, String> {
    let req: SimulateRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.dimension == 0 || req.dimension > 1000 {
        return Err("dimension must be in 1..=1000".into());
    }
    if !(req.max_seconds > 0.0 && req.max_seconds <= 1e6) {
        return Err("max_seconds must be in (0, 1e6]".into());
    }
    let obj = Objective::noisy_quadratic(
        req.dimension,
        GradientNoise {
            m: req.noise_m,
            c: req.noise_c,
        },
    )
    .map_err(|e| e.to_string())?;
    let dm = DelayModel {
        compute: ComputeDist::Constant { y: req.step_time },
        d0: req.d0,
        scaling: CommScaling::Constant,
    };
    let base = |tau: u32| {
        let mut c = TrainConfig::fixed(req.workers, 1, req.lr, tau, req.max_seconds, req.seed);
        c.init = InitSpec::Gaussian { std: 1.0 };
        c
    };
    let mut runs = Vec::new();
    let mut push_run = |label: String, cfg: &TrainConfig| -> Result<(), String> {
        let trace = run_pasgd(cfg, &obj, &dm).map_err(|e| e.to_string())?;
        runs.push(SimRun {
            label,
            diverged: trace.diverged,
            points: trace
                .records
                .iter()
                .map(|r| [r.wall_clock, r.train_loss])
                .collect(),
            taus: trace.tau_sequence(),
        });
        Ok(())
    };
    for &tau in &req.taus {
        if tau == 0 || tau > 256 {
            return Err("tau values must be in 1..=256".into());
        }
        push_run(format!("tau = {tau}"), &base(tau))?;
    }
    if let Some(ada) = &req.adacomm {
        let mut cfg = base(ada.tau0.max(1));
        cfg.schedule = CommSchedule::Adacomm(AdaCommConfig {
            t0: ada.t0,
            tau0: ada.tau0.max(1),
            gamma: ada.gamma,
            slack: 0,
            mode: AdaMode::LrCoupledApprox,
            defer_lr_decay: true,
            tau_max: 256,
        });
        push_run("adaptive".into(), &cfg)?;
    }
    serde_json::to_string(&SimulateResponse { runs }).map_err(|e| e.to_string())
}

/// Loss-versus-wall-clock traces for fixed communication periods and an
/// optional adaptive run, on the noisy quadratic.
#[wasm_bindgen]
pub fn simulate_tradeoff(request: &str) -> Result<String, JsError> {
    simulate_tradeoff_impl(request).map_err(|e| JsError::new(&e))
}

/// Closed-form speedup of tau-step rounds for a ratio slider.
#[wasm_bindgen]
pub fn speedup_value(alpha: f64, tau: u32) -> f64 {
    speedup_ratio(alpha, tau.max(1))
}
