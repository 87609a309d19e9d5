//! Command-line front end: simulation runs, parameter sweeps, runtime and
//! bound tables, schedule checks. Every CSV written to disk is paired with
//! a `<file>.manifest.json` snapshot sufficient to reproduce it.
//!
//! Exit codes: 0 success, 2 configuration error, 3 divergence, 4 internal
//! error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pasgd::adacomm::{grid_search_tau0, optimal_tau};
use pasgd::bounds::{bound_floor, check_adaptive_conditions, error_runtime_bound, BoundParams, LrFamily, TauFamily};
use pasgd::config::{FullConfig, SweepConfig};
use pasgd::delay::{speedup_ratio, CommScaling, ComputeDist, DelayModel};
use pasgd::engine::{run_pasgd, CommSchedule};
use pasgd::trace::RunTrace;

mod manifest;
use manifest::Manifest;

#[derive(Parser)]
#[command(name = "pasgd", version, about = "Periodic-averaging local-update SGD simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a JSON config and write the trace CSV.
    Simulate(SimulateArgs),
    /// Run one simulation per value of a swept parameter and summarize.
    Sweep(SweepArgs),
    /// Closed-form per-iteration times and speedups for constant delays.
    Speedup(SpeedupArgs),
    /// Monte-Carlo per-iteration runtime statistics for a delay model.
    Runtime(RuntimeArgs),
    /// Error-runtime bound as a function of the wall-clock budget.
    Bound(BoundArgs),
    /// Closed-form optimal communication period and its integer neighbors.
    OptTau(OptTauArgs),
    /// Convergence-condition verdicts for a rate family.
    CheckConditions(CheckConditionsArgs),
    /// Grid-search the initial communication period.
    GridTau0(GridTau0Args),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Trace CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Controller-events CSV (default: `<out stem>.events.csv` when the
    /// schedule is adaptive).
    #[arg(long)]
    events: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep configuration (`base` config plus `sweep` section).
    #[arg(long)]
    config: PathBuf,
    /// Summary CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Also write each child's trace CSV into this directory.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Override the base config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SpeedupArgs {
    /// Communication/computation ratio (delay over step time).
    #[arg(long)]
    alpha: f64,
    /// Communication periods, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    tau: Vec<u32>,
    #[arg(long, default_value_t = 1)]
    workers: u32,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Constant,
    Exponential,
    ShiftedExponential,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Constant,
    Log2Tree,
    Linear,
}

#[derive(Args)]
struct RuntimeArgs {
    #[arg(long, value_enum)]
    dist: DistArg,
    /// Mean of the step-time distribution (exponential part for shifted).
    #[arg(long)]
    mean: f64,
    /// Minimum step time for the shifted-exponential distribution.
    #[arg(long, default_value_t = 0.0)]
    shift: f64,
    #[arg(long)]
    workers: u32,
    /// Seconds per inter-node communication before scaling.
    #[arg(long)]
    d0: f64,
    #[arg(long, value_enum, default_value_t = ScalingArg::Constant)]
    scaling: ScalingArg,
    #[arg(long, value_delimiter = ',', required = true)]
    tau: Vec<u32>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundCommon {
    /// Loss at the starting point.
    #[arg(long)]
    f1: f64,
    /// Lower bound of the objective.
    #[arg(long, default_value_t = 0.0)]
    f_inf: f64,
    #[arg(long)]
    lr: f64,
    #[arg(long)]
    lipschitz: f64,
    /// Additive gradient-variance bound.
    #[arg(long)]
    noise_c: f64,
    /// Multiplicative gradient-variance slope.
    #[arg(long, default_value_t = 0.0)]
    noise_m: f64,
    #[arg(long)]
    workers: u32,
    /// Seconds per local step (constant model).
    #[arg(long, default_value_t = 1.0)]
    step_time: f64,
    /// Seconds per averaging round (constant model).
    #[arg(long, default_value_t = 0.0)]
    comm_delay: f64,
    /// Derive step_time/comm_delay from a delay-model JSON file instead.
    /// A stochastic model substitutes expectations, which makes the
    /// output approximate; the manifest records this.
    #[arg(long)]
    delay_config: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    common: BoundCommon,
    #[arg(long, value_delimiter = ',', required = true)]
    tau: Vec<u32>,
    #[arg(long)]
    t_min: f64,
    #[arg(long)]
    t_max: f64,
    /// Number of log-spaced budget points.
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptTauArgs {
    #[command(flatten)]
    common: BoundCommon,
    /// Wall-clock budget the period is optimized for.
    #[arg(long)]
    horizon: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum TauFamilyArg {
    Constant,
    Power,
    Bounded,
}

#[derive(Args)]
struct CheckConditionsArgs {
    /// Learning-rate family lr_r = coef / (r+1)^exponent.
    #[arg(long)]
    lr_coef: f64,
    #[arg(long)]
    lr_exponent: f64,
    #[arg(long, value_enum)]
    tau_family: TauFamilyArg,
    /// Constant period value (family = constant).
    #[arg(long)]
    tau_value: Option<f64>,
    /// Period family tau_r = coef / (r+1)^exponent (family = power).
    #[arg(long)]
    tau_coef: Option<f64>,
    #[arg(long)]
    tau_exponent: Option<f64>,
    /// Upper bound on the period sequence (family = bounded).
    #[arg(long)]
    tau_upper: Option<f64>,
}

#[derive(Args)]
struct GridTau0Args {
    /// JSON run configuration providing the objective, delay model, and
    /// training parameters.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    candidates: Vec<u32>,
    /// Simulated seconds per candidate run.
    #[arg(long)]
    budget: f64,
    #[arg(long)]
    seed: Option<u64>,
}

/// Error classes mapped to exit codes.
enum CliError {
    Config(String),
    Divergence(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Divergence(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<pasgd::Error> for CliError {
    fn from(e: pasgd::Error) -> Self {
        match &e {
            pasgd::Error::Config(_)
            | pasgd::Error::Invalid { .. }
            | pasgd::Error::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            pasgd::Error::AllCandidatesDiverged | pasgd::Error::NonFinite(_) => {
                CliError::Divergence(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Speedup(args) => cmd_speedup(args),
        Command::Runtime(args) => cmd_runtime(args),
        Command::Bound(args) => cmd_bound(args),
        Command::OptTau(args) => cmd_opt_tau(args),
        Command::CheckConditions(args) => cmd_check_conditions(args),
        Command::GridTau0(args) => cmd_grid_tau0(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn read_config(path: &Path) -> CliResult<FullConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(FullConfig::from_json(&text)?)
}

fn write_output(path: Option<&Path>, csv: &str, manifest: &Manifest) -> CliResult<()> {
    match path {
        Some(p) => {
            std::fs::write(p, csv)?;
            manifest.write_for(p)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let mut cfg = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    let (obj, dm, train) = cfg.build()?;
    let trace = run_pasgd(&train, &obj, &dm)?;
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }

    std::fs::write(&args.out, trace.to_csv())?;
    let mut outputs = vec![args.out.display().to_string()];
    let events_path = match (&args.events, &cfg.train.schedule) {
        (Some(p), _) => Some(p.clone()),
        (None, CommSchedule::Adacomm(_)) => Some(args.out.with_extension("events.csv")),
        (None, CommSchedule::Fixed { .. }) => None,
    };
    if let Some(p) = &events_path {
        std::fs::write(p, trace.events_to_csv())?;
        outputs.push(p.display().to_string());
    }
    Manifest::new()
        .seed(cfg.train.seed)
        .config(cfg.to_json_value())
        .outputs(outputs)
        .write_for(&args.out)?;

    if trace.diverged {
        return Err(CliError::Divergence(
            trace.divergence.unwrap_or_else(|| "run diverged".into()),
        ));
    }
    println!(
        "{} synchronizations, final loss {}",
        trace.records.len(),
        trace.final_loss().map_or("n/a".into(), |l| l.to_string())
    );
    Ok(())
}

enum ChildOutcome {
    Done(RunTrace),
    Failed(String),
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut sweep = SweepConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        sweep.base.train.seed = seed;
    }
    if let Some(dir) = &args.trace_dir {
        std::fs::create_dir_all(dir)?;
    }

    // children run concurrently; each owns its outputs, the summary is
    // assembled afterward in value order
    let values = sweep.sweep.values.clone();
    let outcomes: Vec<ChildOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, &value)| {
                let sweep = &sweep;
                scope.spawn(move || match sweep.child(value, i) {
                    Err(e) => ChildOutcome::Failed(e.to_string()),
                    Ok(cfg) => match cfg.build().and_then(|(obj, dm, train)| {
                        run_pasgd(&train, &obj, &dm)
                    }) {
                        Ok(trace) => ChildOutcome::Done(trace),
                        Err(e) => ChildOutcome::Failed(e.to_string()),
                    },
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep child")).collect()
    });

    let targets = &sweep.sweep.target_losses;
    let mut csv = String::from("value,final_loss");
    for t in targets {
        write!(csv, ",time_to_{t}").expect("write to string");
    }
    csv.push_str(",diverged\n");
    let mut outputs = vec![args.out.display().to_string()];
    for (i, (value, outcome)) in values.iter().zip(&outcomes).enumerate() {
        match outcome {
            ChildOutcome::Failed(reason) => {
                eprintln!("warning: child {value} failed: {reason}");
                write!(csv, "{value},NA").expect("write to string");
                for _ in targets {
                    csv.push_str(",NA");
                }
                csv.push_str(",error\n");
            }
            ChildOutcome::Done(trace) => {
                write!(
                    csv,
                    "{value},{}",
                    trace.final_loss().map_or("NA".into(), |l| l.to_string())
                )
                .expect("write to string");
                for &t in targets {
                    match trace.time_to_loss(t) {
                        Some(s) => write!(csv, ",{s}").expect("write to string"),
                        None => csv.push_str(",NA"),
                    }
                }
                writeln!(csv, ",{}", trace.diverged).expect("write to string");
                if let Some(dir) = &args.trace_dir {
                    let path = dir.join(format!("{}_{}.csv", sweep.sweep.axis, value));
                    std::fs::write(&path, trace.to_csv())?;
                    let child_cfg = sweep.child(*value, i).expect("validated child");
                    Manifest::new()
                        .seed(child_cfg.train.seed)
                        .config(child_cfg.to_json_value())
                        .outputs(vec![path.display().to_string()])
                        .write_for(&path)?;
                    outputs.push(path.display().to_string());
                }
            }
        }
    }
    std::fs::write(&args.out, &csv)?;
    Manifest::new()
        .seed(sweep.base.train.seed)
        .config(serde_json::to_value(&sweep).expect("sweep serializes"))
        .outputs(outputs)
        .write_for(&args.out)?;
    println!("{} runs summarized to {}", values.len(), args.out.display());
    Ok(())
}

const RUNTIME_CSV_HEADER: &str = "m,tau,alpha,mean_time,stderr,p50,p99";

fn cmd_speedup(args: SpeedupArgs) -> CliResult<()> {
    if !(args.alpha >= 0.0 && args.alpha.is_finite()) {
        return Err(CliError::Config("alpha must be >= 0".into()));
    }
    if args.tau.contains(&0) {
        return Err(CliError::Config("tau values must be >= 1".into()));
    }
    let mut csv = format!("{RUNTIME_CSV_HEADER}\n");
    for &tau in &args.tau {
        // per-iteration time in units of the step time: 1 + alpha/tau
        let time = 1.0 + args.alpha / tau as f64;
        writeln!(csv, "{},{tau},{},{time},0,{time},{time}", args.workers, args.alpha)
            .expect("write to string");
        eprintln!("tau={tau}: speedup over per-step averaging = {}", speedup_ratio(args.alpha, tau));
    }
    let manifest = Manifest::new()
        .config(serde_json::json!({
            "subcommand": "speedup", "alpha": args.alpha, "tau": args.tau, "workers": args.workers,
        }))
        .outputs(path_list(&args.out));
    write_output(args.out.as_deref(), &csv, &manifest)
}

fn cmd_runtime(args: RuntimeArgs) -> CliResult<()> {
    let compute = match args.dist {
        DistArg::Constant => ComputeDist::Constant { y: args.mean },
        DistArg::Exponential => ComputeDist::Exponential { mean: args.mean },
        DistArg::ShiftedExponential => ComputeDist::ShiftedExponential {
            shift: args.shift,
            mean: args.mean,
        },
    };
    let dm = DelayModel {
        compute,
        d0: args.d0,
        scaling: match args.scaling {
            ScalingArg::Constant => CommScaling::Constant,
            ScalingArg::Log2Tree => CommScaling::Log2Tree,
            ScalingArg::Linear => CommScaling::Linear,
        },
    };
    dm.validate()?;
    let alpha = dm.comm_delay(args.workers)? / dm.compute.mean();
    let mut csv = format!("{RUNTIME_CSV_HEADER}\n");
    for &tau in &args.tau {
        let stats = dm.expected_iteration_time(args.workers, tau, args.samples, args.seed)?;
        writeln!(
            csv,
            "{},{tau},{alpha},{},{},{},{}",
            args.workers,
            stats.mean_iteration_time,
            stats.stderr(),
            stats.percentile(0.5),
            stats.percentile(0.99),
        )
        .expect("write to string");
    }
    let manifest = Manifest::new()
        .seed(args.seed)
        .samples(args.samples)
        .config(serde_json::json!({
            "subcommand": "runtime", "delay": dm, "workers": args.workers, "tau": args.tau,
        }))
        .outputs(path_list(&args.out));
    write_output(args.out.as_deref(), &csv, &manifest)
}

/// Resolves the runtime constants for the bound commands, either from
/// explicit flags or a delay-model file (expectations, flagged
/// approximate when the model is stochastic).
fn resolve_bound_params(common: &BoundCommon) -> CliResult<(BoundParams, bool)> {
    let (step_time, comm_delay, approximate) = match &common.delay_config {
        None => (common.step_time, common.comm_delay, false),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let dm: DelayModel = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(e.to_string()))?;
            dm.validate()?;
            let approx = !dm.compute.is_deterministic();
            (dm.compute.mean(), dm.comm_delay(common.workers)?, approx)
        }
    };
    let p = BoundParams {
        initial_loss: common.f1,
        min_loss: common.f_inf,
        lipschitz: common.lipschitz,
        noise_var: common.noise_c,
        noise_slope: common.noise_m,
        workers: common.workers,
        step_time,
        comm_delay,
    };
    p.validate()?;
    if approximate {
        eprintln!(
            "note: stochastic step-time model; using expected values, results are approximate"
        );
    }
    Ok((p, approximate))
}

fn cmd_bound(args: BoundArgs) -> CliResult<()> {
    let (p, approximate) = resolve_bound_params(&args.common)?;
    if !(args.t_min > 0.0 && args.t_max > args.t_min) || args.points < 2 {
        return Err(CliError::Config(
            "need 0 < t_min < t_max and at least 2 points".into(),
        ));
    }
    let ratio = (args.t_max / args.t_min).ln();
    let mut csv = String::from("tau,t,bound\n");
    for &tau in &args.tau {
        if tau == 0 {
            return Err(CliError::Config("tau values must be >= 1".into()));
        }
        eprintln!("tau={tau}: floor = {}", bound_floor(&p, args.common.lr, tau as f64));
        for k in 0..args.points {
            let t = args.t_min * (ratio * k as f64 / (args.points - 1) as f64).exp();
            let b = error_runtime_bound(&p, args.common.lr, tau as f64, t)?;
            writeln!(csv, "{tau},{t},{b}").expect("write to string");
        }
    }
    let manifest = Manifest::new()
        .config(serde_json::json!({
            "subcommand": "bound", "params": p, "lr": args.common.lr, "tau": args.tau,
            "t_min": args.t_min, "t_max": args.t_max, "points": args.points,
        }))
        .approximate(approximate)
        .outputs(path_list(&args.out));
    write_output(args.out.as_deref(), &csv, &manifest)
}

fn cmd_opt_tau(args: OptTauArgs) -> CliResult<()> {
    let (p, _) = resolve_bound_params(&args.common)?;
    let tau_star = optimal_tau(
        p.initial_loss,
        p.min_loss,
        p.comm_delay,
        args.common.lr,
        p.lipschitz,
        p.noise_var,
        args.horizon,
    )?;
    println!("tau_star = {tau_star}");
    let mut neighbors: Vec<u32> = vec![
        tau_star.floor().max(1.0) as u32,
        tau_star.ceil().max(1.0) as u32,
        tau_star.round().max(1.0) as u32,
    ];
    neighbors.sort_unstable();
    neighbors.dedup();
    for tau in neighbors {
        let b = error_runtime_bound(&p, args.common.lr, tau as f64, args.horizon)?;
        println!("tau={tau}: bound at horizon {} = {b}", args.horizon);
    }
    Ok(())
}

fn cmd_check_conditions(args: CheckConditionsArgs) -> CliResult<()> {
    let lr = LrFamily {
        coef: args.lr_coef,
        exponent: args.lr_exponent,
    };
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| CliError::Config(format!("missing --{flag} for this tau family")))
    };
    let tau = match args.tau_family {
        TauFamilyArg::Constant => TauFamily::Constant {
            value: need(args.tau_value, "tau-value")?,
        },
        TauFamilyArg::Power => TauFamily::Power {
            coef: need(args.tau_coef, "tau-coef")?,
            exponent: need(args.tau_exponent, "tau-exponent")?,
        },
        TauFamilyArg::Bounded => TauFamily::Bounded {
            upper: need(args.tau_upper, "tau-upper")?,
        },
    };
    let report = check_adaptive_conditions(&lr, &tau)?;
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!("condition                        verdict");
    println!("sum lr*tau diverges              {}", verdict(report.sum_lr_tau_diverges));
    println!("sum lr^2*tau converges           {}", verdict(report.sum_lr2_tau_converges));
    println!("sum lr^3*tau^2 converges         {}", verdict(report.sum_lr3_tau2_converges));
    println!("overall                          {}", verdict(report.pass()));
    Ok(())
}

fn cmd_grid_tau0(args: GridTau0Args) -> CliResult<()> {
    let mut cfg = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    let (obj, dm, train) = cfg.build()?;
    let tau0 = grid_search_tau0(&args.candidates, args.budget, &train, &obj, &dm)?;
    println!("tau0 = {tau0}");
    Ok(())
}

fn path_list(out: &Option<PathBuf>) -> Vec<String> {
    out.iter().map(|p| p.display().to_string()).collect()
}
