//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `--nocapture` to see them). Tolerances are pinned
//! in the assertions.

use pasgd::adacomm::{grid_search_tau0, optimal_tau, AdaCommConfig, AdaMode};
use pasgd::bounds::{
    bound_floor, check_adaptive_conditions, crossover_time, error_runtime_bound,
    simplified_fixed_lr_bound, BoundParams, LrFamily, TauFamily,
};
use pasgd::delay::{harmonic_number, speedup_ratio, CommScaling, ComputeDist, DelayModel};
use pasgd::engine::{run_pasgd, CommSchedule, InitSpec, Momentum, TrainConfig};
use pasgd::objectives::{
    logistic_clusters, mlp_regression, GradientNoise, ModelVector, Objective,
};
use pasgd::rng::{substream, STREAM_DELAY, STREAM_GRAD, STREAM_INIT, STREAM_MC};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn pass(n: u32, what: &str) {
    println!("PASS criterion {n}: {what}");
}

// ---------------------------------------------------------------------
// 1. speedup formula
// ---------------------------------------------------------------------

#[test]
fn criterion_01_speedup_formula() {
    for tau in [1u32, 2, 5, 10, 100] {
        let expect = 1.9 / (1.0 + 0.9 / tau as f64);
        assert!(
            (speedup_ratio(0.9, tau) - expect).abs() <= 1e-12,
            "tau={tau}"
        );
    }
    // saturation toward 1 + alpha
    assert!((speedup_ratio(0.9, 1_000_000_000) - 1.9).abs() < 1e-6);
    pass(1, "speedup ratio matches (1+a)/(1+a/tau) to 1e-12, limit 1.9");
}

// ---------------------------------------------------------------------
// 2. straggler analytics
// ---------------------------------------------------------------------

/// Batched means: estimate a statistic per batch and aggregate, giving a
/// standard error that is honest for quantiles too.
fn batch_stats(dm: &DelayModel, tau: u32, n_batches: u64, per_batch: usize, stat: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let mut vals = Vec::new();
    for b in 0..n_batches {
        let cdf = dm.runtime_tail(16, tau, per_batch, 9000 + b).unwrap();
        vals.push(stat(cdf.as_sorted_slice()));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn criterion_02_straggler_analytics() {
    let dm = DelayModel {
        compute: ComputeDist::Exponential { mean: 1.0 },
        d0: 1.0,
        scaling: CommScaling::Constant,
    };
    let oracle = harmonic_number(16) + 1.0;
    let sync = dm.expected_iteration_time(16, 1, 100_000, 77).unwrap();
    assert!(
        (sync.mean_iteration_time - oracle).abs() / oracle < 0.02,
        "sync mean {} vs harmonic oracle {oracle}",
        sync.mean_iteration_time
    );

    let p99 = |s: &[f64]| s[(0.99 * s.len() as f64).ceil() as usize - 1];
    let mean_stat = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (m1, se_m1) = batch_stats(&dm, 1, 10, 10_000, mean_stat);
    let (m10, se_m10) = batch_stats(&dm, 10, 10, 10_000, mean_stat);
    let gap = m1 - m10;
    let se = (se_m1 * se_m1 + se_m10 * se_m10).sqrt();
    assert!(gap > 3.0 * se, "mean gap {gap} vs 3se {}", 3.0 * se);

    let (q1, se_q1) = batch_stats(&dm, 1, 10, 10_000, p99);
    let (q10, se_q10) = batch_stats(&dm, 10, 10, 10_000, p99);
    let qgap = q1 - q10;
    let qse = (se_q1 * se_q1 + se_q10 * se_q10).sqrt();
    assert!(qgap > 3.0 * qse, "p99 gap {qgap} vs 3se {}", 3.0 * qse);
    pass(2, "sync mean = H16 + 1 within 2%; tau=10 mean and p99 lower at 3 sigma");
}

// ---------------------------------------------------------------------
// 3. variance reduction of averaged step times
// ---------------------------------------------------------------------

#[test]
fn criterion_03_erlang_variance_reduction() {
    let dm = DelayModel {
        compute: ComputeDist::Exponential { mean: 1.0 },
        d0: 0.0,
        scaling: CommScaling::Constant,
    };
    for tau in [5u32, 10] {
        let s = dm.expected_iteration_time(1, tau, 100_000, 55).unwrap();
        let samples = s.samples.unwrap();
        let mean = s.mean_iteration_time;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (samples.len() - 1) as f64;
        let expect = 1.0 / tau as f64;
        assert!(
            (var - expect).abs() / expect < 0.05,
            "tau={tau}: var {var} vs {expect}"
        );
    }
    pass(3, "variance of the averaged step time is y^2/tau within 5%");
}

// ---------------------------------------------------------------------
// 4. bound curves: floors, crossover, ordering
// ---------------------------------------------------------------------

fn reference_bound_params() -> BoundParams {
    BoundParams {
        initial_loss: 1.0,
        min_loss: 0.0,
        lipschitz: 1.0,
        noise_var: 1.0,
        noise_slope: 0.0,
        workers: 16,
        step_time: 1.0,
        comm_delay: 1.0,
    }
}

#[test]
fn criterion_04_bound_curves() {
    let p = reference_bound_params();
    assert!((bound_floor(&p, 0.08, 1.0) - 0.005).abs() <= 1e-12);
    assert!((bound_floor(&p, 0.08, 10.0) - 0.0626).abs() <= 1e-12);

    let t = crossover_time(&p, 0.08, 1.0, 10.0).unwrap().unwrap();
    let analytic = 390.625;
    assert!((t - analytic).abs() / analytic <= 0.01, "crossover {t}");

    for frac in [0.1, 0.5, 0.9] {
        let before = frac * t;
        assert!(
            error_runtime_bound(&p, 0.08, 10.0, before).unwrap()
                < error_runtime_bound(&p, 0.08, 1.0, before).unwrap(),
            "tau=10 should win before the crossover at {before}"
        );
        let after = t / frac;
        assert!(
            error_runtime_bound(&p, 0.08, 10.0, after).unwrap()
                > error_runtime_bound(&p, 0.08, 1.0, after).unwrap(),
            "tau=1 should win after the crossover at {after}"
        );
    }
    pass(4, "floors 0.005 / 0.0626 exact; crossover ~390.6; ordering flips");
}

// ---------------------------------------------------------------------
// 5. closed-form optimal period vs brute force
// ---------------------------------------------------------------------

#[test]
fn criterion_05_optimal_tau_matches_brute_force() {
    let mut rng = substream(1234, STREAM_MC, 0, 0);
    for trial in 0..20 {
        let p = BoundParams {
            initial_loss: 0.5 + 4.5 * rng.random::<f64>(),
            min_loss: 0.0,
            lipschitz: 0.5 + 1.5 * rng.random::<f64>(),
            noise_var: 0.2 + 3.8 * rng.random::<f64>(),
            noise_slope: 0.0,
            workers: [4u32, 8, 16][(rng.random::<f64>() * 3.0) as usize % 3],
            step_time: 0.5 + 1.5 * rng.random::<f64>(),
            comm_delay: 0.5 + 7.5 * rng.random::<f64>(),
        };
        let lr = 0.02 + 0.28 * rng.random::<f64>();
        let horizon = 50.0 * (1000.0f64).powf(rng.random::<f64>());

        // brute-force oracle over integer periods
        let mut argmin = 1u32;
        let mut best = f64::INFINITY;
        for tau in 1..=1000u32 {
            let b = error_runtime_bound(&p, lr, tau as f64, horizon).unwrap();
            if b < best {
                best = b;
                argmin = tau;
            }
        }
        let tau_star = optimal_tau(
            p.initial_loss,
            p.min_loss,
            p.comm_delay,
            lr,
            p.lipschitz,
            p.noise_var,
            horizon,
        )
        .unwrap();
        let rounded = tau_star.round().clamp(1.0, 1000.0) as i64;
        assert!(
            (rounded - argmin as i64).abs() <= 1,
            "trial {trial}: tau* {tau_star} (round {rounded}) vs argmin {argmin}"
        );
    }
    pass(5, "rounded closed-form minimizer within 1 of brute-force argmin, 20 trials");
}

// ---------------------------------------------------------------------
// 6. gradient oracle: finite differences, unbiasedness, variance law
// ---------------------------------------------------------------------

fn finite_difference_gradient(obj: &Objective, x: &ModelVector) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.dim());
    let v = x.as_slice();
    for i in 0..x.dim() {
        let h = 1e-6 * (1.0 + v[i].abs());
        let mut plus = v.to_vec();
        plus[i] += h;
        let mut minus = v.to_vec();
        minus[i] -= h;
        let fp = obj.loss(&ModelVector::new(plus).unwrap()).unwrap();
        let fm = obj.loss(&ModelVector::new(minus).unwrap()).unwrap();
        g.push((fp - fm) / (2.0 * h));
    }
    g
}

#[test]
fn criterion_06_gradient_oracle() {
    let kinds: Vec<(&str, Objective)> = vec![
        (
            "noisy_quadratic",
            Objective::noisy_quadratic(6, GradientNoise { m: 0.5, c: 1.0 }).unwrap(),
        ),
        (
            "logistic",
            Objective::logistic(logistic_clusters(4, 16, 3).unwrap()).unwrap(),
        ),
        (
            "tiny_mlp",
            Objective::tiny_mlp(13, mlp_regression(12, 5).unwrap()).unwrap(),
        ),
    ];
    // finite differences at 10 random points per kind
    for (name, obj) in &kinds {
        let mut rng = substream(606, STREAM_MC, 1, 0);
        for _ in 0..10 {
            let x = ModelVector::new(
                (0..obj.dimension())
                    .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                    .collect(),
            )
            .unwrap();
            let exact = obj.full_gradient(&x).unwrap();
            let fd = finite_difference_gradient(obj, &x);
            let num = exact
                .as_slice()
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
            assert!(num / den <= 1e-5, "{name}: rel err {}", num / den);
        }
    }

    // unbiasedness at 3 sigma, 1e5 draws per kind
    for (name, obj) in &kinds {
        let d = obj.dimension();
        let x = ModelVector::new((0..d).map(|i| 0.4 - 0.07 * i as f64).collect()).unwrap();
        let exact = obj.full_gradient(&x).unwrap();
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        let mut rng = substream(607, STREAM_MC, 2, 0);
        let n = 100_000;
        for _ in 0..n {
            let g = obj.stochastic_gradient(&x, 2, &mut rng).unwrap();
            for (i, &gi) in g.as_slice().iter().enumerate() {
                sum[i] += gi;
                sum_sq[i] += gi * gi;
            }
        }
        for i in 0..d {
            let mean = sum[i] / n as f64;
            let var = (sum_sq[i] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - exact.as_slice()[i]).abs() <= 3.0 * se + 1e-12,
                "{name} coord {i} biased"
            );
        }
    }

    // variance law on the noisy quadratic, batch 1, 1e5 draws
    let obj = Objective::noisy_quadratic(6, GradientNoise { m: 0.5, c: 1.0 }).unwrap();
    let x = ModelVector::new(vec![0.6, -0.4, 0.2, 0.0, 0.8, -0.2]).unwrap();
    let expect = 0.5 * x.norm_sq() + 1.0;
    let exact = obj.full_gradient(&x).unwrap();
    let mut rng = substream(608, STREAM_MC, 3, 0);
    let n = 100_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let g = obj.stochastic_gradient(&x, 1, &mut rng).unwrap();
        acc += g
            .as_slice()
            .iter()
            .zip(exact.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    let emp = acc / n as f64;
    assert!(
        (emp - expect).abs() / expect < 0.05,
        "variance law: {emp} vs {expect}"
    );
    pass(6, "finite differences <= 1e-5; unbiased at 3 sigma; variance law within 5%");
}

// ---------------------------------------------------------------------
// 7/8 shared: the independent straight-line sync-SGD oracle
// ---------------------------------------------------------------------

/// Straight-line reimplementation of the averaged update for the noisy
/// quadratic: per round, every worker takes `tau` plain SGD steps on its
/// own gradient substream, post-step models are summed in worker order and
/// divided by the count, and the wall clock advances by the slowest
/// worker's summed step times plus the delay. Shares only the substream
/// derivation with the engine.
struct OracleRecord {
    wall_clock: f64,
    iteration: u64,
    train_loss: f64,
    grad_norm_sq: f64,
}

#[allow(clippy::too_many_arguments)]
fn sync_oracle_noisy_quadratic(
    dim: usize,
    noise: GradientNoise,
    workers: u32,
    tau: u32,
    lr: f64,
    init_std: f64,
    compute: ComputeDist,
    comm: f64,
    max_seconds: f64,
    seed: u64,
) -> Vec<OracleRecord> {
    let mut init_rng = substream(seed, STREAM_INIT, 0, 0);
    let mut x: Vec<f64> = (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut init_rng);
            init_std * z
        })
        .collect();
    let mut records = Vec::new();
    let mut wall = 0.0;
    let mut iterations = 0u64;
    let mut round = 0u64;
    while wall < max_seconds {
        round += 1;
        let mut sum = vec![0.0; dim];
        for i in 0..workers {
            let mut rng = substream(seed, STREAM_GRAD, i as u64, round);
            let mut xi = x.clone();
            for _ in 0..tau {
                let gsq: f64 = xi.iter().map(|v| v * v).sum();
                let sigma = ((noise.m * gsq + noise.c) / dim as f64).sqrt();
                for v in xi.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let g = *v + sigma * z;
                    *v -= lr * g;
                }
            }
            for (s, v) in sum.iter_mut().zip(&xi) {
                *s += v;
            }
        }
        for s in sum.iter_mut() {
            *s /= workers as f64;
        }
        x = sum;
        let mut slowest = f64::NEG_INFINITY;
        for i in 0..workers {
            let mut rng = substream(seed, STREAM_DELAY, i as u64, round);
            let mut total = 0.0;
            for _ in 0..tau {
                total += compute.sample(&mut rng);
            }
            slowest = slowest.max(total);
        }
        wall += slowest + comm;
        iterations += tau as u64;
        let gsq: f64 = x.iter().map(|v| v * v).sum();
        records.push(OracleRecord {
            wall_clock: wall,
            iteration: iterations,
            train_loss: 0.5 * gsq,
            grad_norm_sq: gsq,
        });
    }
    records
}

#[test]
fn criterion_07_engine_equivalences() {
    let noise = GradientNoise { m: 0.0, c: 1.0 };
    let obj = Objective::noisy_quadratic(6, noise).unwrap();
    let compute = ComputeDist::Exponential { mean: 1.0 };
    let dm = DelayModel {
        compute,
        d0: 2.0,
        scaling: CommScaling::Constant,
    };
    let mut cfg = TrainConfig::fixed(4, 1, 0.05, 1, 150.0, 21);
    cfg.init = InitSpec::Gaussian { std: 1.0 };

    let trace = run_pasgd(&cfg, &obj, &dm).unwrap();
    let oracle = sync_oracle_noisy_quadratic(
        6, noise, 4, 1, 0.05, 1.0, compute, 2.0, 150.0, 21,
    );
    assert_eq!(trace.records.len(), oracle.len());
    for (r, o) in trace.records.iter().zip(&oracle) {
        assert_eq!(r.wall_clock.to_bits(), o.wall_clock.to_bits());
        assert_eq!(r.iteration, o.iteration);
        assert_eq!(r.train_loss.to_bits(), o.train_loss.to_bits());
        assert_eq!(r.grad_norm_sq.to_bits(), o.grad_norm_sq.to_bits());
    }

    // block momentum with zero betas collapses to plain averaging
    let mut block = cfg.clone();
    block.momentum = Momentum::Block {
        beta_global: 0.0,
        beta_local: 0.0,
    };
    let block_trace = run_pasgd(&block, &obj, &dm).unwrap();
    assert_eq!(trace.to_csv(), block_trace.to_csv());

    // determinism: same seed identical, different seed not
    let again = run_pasgd(&cfg, &obj, &dm).unwrap();
    assert_eq!(trace.to_csv(), again.to_csv());
    let mut other = cfg.clone();
    other.seed = 22;
    assert_ne!(trace.to_csv(), run_pasgd(&other, &obj, &dm).unwrap().to_csv());
    pass(7, "tau=1 trace bit-identical to the straight-line oracle; block beta=0 collapses; deterministic");
}

// ---------------------------------------------------------------------
// 8. desk-scale error-runtime trade-off
// ---------------------------------------------------------------------

/// Trade-off scenario: 10-dim noisy quadratic with a state-dependent
/// noise component (slope 25, floor 1), 4 workers, unit step time, delay
/// 4, lr 0.05, 2000 simulated seconds. The slope makes local-update drift
/// feed gradient noise, so larger periods pay a real plateau penalty; with
/// a purely additive noise model the averaged trajectory of this quadratic
/// would be distribution-identical for every period.
fn tradeoff_scenario() -> (Objective, DelayModel) {
    let obj = Objective::noisy_quadratic(10, GradientNoise { m: 25.0, c: 1.0 }).unwrap();
    let dm = DelayModel {
        compute: ComputeDist::Constant { y: 1.0 },
        d0: 4.0,
        scaling: CommScaling::Constant,
    };
    (obj, dm)
}

fn tradeoff_config(tau: u32, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::fixed(4, 1, 0.05, tau, 2000.0, seed);
    c.init = InitSpec::Gaussian { std: 1.0 };
    c
}

const TRADEOFF_SEEDS: [u64; 5] = [42, 1, 2, 3, 4];
const LOOSE_TARGET: f64 = 1.0;

#[test]
fn criterion_08_error_runtime_tradeoff() {
    let (obj, dm) = tradeoff_scenario();

    // golden traces, committed: regenerate and compare byte-for-byte
    let t1 = run_pasgd(&tradeoff_config(1, 42), &obj, &dm).unwrap();
    let t16 = run_pasgd(&tradeoff_config(16, 42), &obj, &dm).unwrap();
    assert_eq!(t1.to_csv(), include_str!("golden/tradeoff_tau1.csv"));
    assert_eq!(t16.to_csv(), include_str!("golden/tradeoff_tau16.csv"));

    // cross-check the tau=1 golden against the independent oracle
    let oracle = sync_oracle_noisy_quadratic(
        10,
        GradientNoise { m: 25.0, c: 1.0 },
        4,
        1,
        0.05,
        1.0,
        ComputeDist::Constant { y: 1.0 },
        4.0,
        2000.0,
        42,
    );
    assert_eq!(t1.records.len(), oracle.len());
    for (r, o) in t1.records.iter().zip(&oracle) {
        assert_eq!(r.train_loss.to_bits(), o.train_loss.to_bits());
        assert_eq!(r.wall_clock.to_bits(), o.wall_clock.to_bits());
    }

    // fixed-seed assertions: time to the loose target, plateau ordering
    let time1 = t1.time_to_loss(LOOSE_TARGET).unwrap();
    let time16 = t16.time_to_loss(LOOSE_TARGET).unwrap();
    assert!(
        time16 < 0.6 * time1,
        "time-to-target: tau16 {time16}s vs 0.6 * tau1 {time1}s"
    );

    // at 20% of the budget the large period is still ahead
    let at = |trace: &pasgd::trace::RunTrace, t: f64| {
        trace
            .records
            .iter()
            .take_while(|r| r.wall_clock <= t)
            .last()
            .unwrap()
            .train_loss
    };
    assert!(at(&t16, 400.0) < at(&t1, 400.0), "tau=16 should lead at 20% of the budget");
    let p1 = t1.plateau_loss(0.25).unwrap();
    let p16 = t16.plateau_loss(0.25).unwrap();
    assert!(p1 < p16, "plateaus: tau1 {p1} vs tau16 {p16}");

    // the plateau gap must dominate run-to-run noise across seeds
    let gaps: Vec<f64> = TRADEOFF_SEEDS
        .iter()
        .map(|&s| {
            let a = run_pasgd(&tradeoff_config(1, s), &obj, &dm).unwrap();
            let b = run_pasgd(&tradeoff_config(16, s), &obj, &dm).unwrap();
            b.plateau_loss(0.25).unwrap() - a.plateau_loss(0.25).unwrap()
        })
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let sd = (gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>()
        / (gaps.len() - 1) as f64)
        .sqrt();
    assert!(mean >= 3.0 * sd, "plateau gap {mean} vs 3 * seed sd {}", 3.0 * sd);
    pass(8, "golden traces match; tau=16 reaches the loose target in <0.6x the time; tau=1 plateau lower, gap >= 3x seed noise");
}

// ---------------------------------------------------------------------
// 9. adaptive schedule win-win
// ---------------------------------------------------------------------

#[test]
fn criterion_09_adaptive_schedule_win_win() {
    let (obj, dm) = tradeoff_scenario();
    let ada_config = |tau0: u32, seed: u64| {
        let mut c = tradeoff_config(16, seed);
        c.schedule = CommSchedule::Adacomm(AdaCommConfig {
            t0: 100.0,
            tau0,
            gamma: 0.5,
            slack: 0,
            mode: AdaMode::LrCoupledApprox,
            defer_lr_decay: true,
            tau_max: 100,
        });
        c
    };

    // plateau comparison over the seed set, long tail window: the two
    // runs see independent noise, so single-trace plateau estimates carry
    // over 10% noise; seed-averaging brings the comparison inside 5%
    let mut sync_plateaus = Vec::new();
    let mut ada_plateaus = Vec::new();
    let mut seed42 = None;
    for &seed in &TRADEOFF_SEEDS {
        let sync = run_pasgd(&tradeoff_config(1, seed), &obj, &dm).unwrap();
        let tau0 =
            grid_search_tau0(&[1, 4, 16], 100.0, &tradeoff_config(16, seed), &obj, &dm).unwrap();
        let ada = run_pasgd(&ada_config(tau0, seed), &obj, &dm).unwrap();
        assert!(!ada.diverged);
        let taus = ada.tau_sequence();
        assert!(
            taus.windows(2).all(|w| w[1] <= w[0]),
            "seed {seed}: emitted period sequence must be nonincreasing: {taus:?}"
        );
        sync_plateaus.push(sync.plateau_loss(0.5).unwrap());
        ada_plateaus.push(ada.plateau_loss(0.5).unwrap());
        if seed == 42 {
            seed42 = Some((sync, ada, tau0));
        }
    }
    let sync_mean = sync_plateaus.iter().sum::<f64>() / sync_plateaus.len() as f64;
    let ada_mean = ada_plateaus.iter().sum::<f64>() / ada_plateaus.len() as f64;
    assert!(
        (ada_mean - sync_mean).abs() / sync_mean <= 0.05,
        "final plateaus: adaptive {ada_mean} vs sync {sync_mean}"
    );

    // time-to-(sync plateau * 1.05) at the scenario seed
    let (sync, ada, tau0) = seed42.unwrap();
    assert!(tau0 > 1, "grid search should pick a multi-step period, got {tau0}");
    let target = sync_mean * 1.05;
    let t_ada = ada.time_to_loss(target).unwrap();
    let t_sync = sync.time_to_loss(target).unwrap();
    assert!(
        t_ada <= 0.7 * t_sync,
        "time to near-sync plateau: adaptive {t_ada}s vs sync {t_sync}s"
    );
    pass(9, "adaptive schedule reaches the sync plateau zone in <=0.7x the time, matches the floor within 5%, periods nonincreasing");
}

// ---------------------------------------------------------------------
// 10. schedule condition checker
// ---------------------------------------------------------------------

#[test]
fn criterion_10_schedule_conditions() {
    // lr ~ 1/(r+1) with bounded periods: all three conditions hold
    let r = check_adaptive_conditions(
        &LrFamily { coef: 1.0, exponent: 1.0 },
        &TauFamily::Bounded { upper: 32.0 },
    )
    .unwrap();
    assert!(r.sum_lr_tau_diverges);
    assert!(r.sum_lr2_tau_converges);
    assert!(r.sum_lr3_tau2_converges);
    assert!(r.pass());

    // constant lr, constant tau: fails (the square series diverges)
    let r = check_adaptive_conditions(
        &LrFamily { coef: 0.05, exponent: 0.0 },
        &TauFamily::Constant { value: 8.0 },
    )
    .unwrap();
    assert!(!r.sum_lr2_tau_converges);
    assert!(!r.pass());

    // constant-period reduction equals the plain two-series SGD test
    for p in [0.0, 0.25, 0.5, 0.6, 0.75, 1.0, 1.25] {
        let r = check_adaptive_conditions(
            &LrFamily { coef: 1.0, exponent: p },
            &TauFamily::Constant { value: 4.0 },
        )
        .unwrap();
        let plain_sgd = p <= 1.0 && 2.0 * p > 1.0;
        assert_eq!(r.pass(), plain_sgd, "exponent {p}");
    }
    pass(10, "1/(r+1) lr with bounded periods passes; constant/constant fails; constant-period verdicts match plain SGD");
}

// ---------------------------------------------------------------------
// 11. fixed-lr bound identity
// ---------------------------------------------------------------------

#[test]
fn criterion_11_fixed_lr_bound_identity() {
    let mut rng = substream(4321, STREAM_MC, 0, 0);
    for trial in 0..10 {
        let p = BoundParams {
            initial_loss: 0.5 + 4.5 * rng.random::<f64>(),
            min_loss: 0.0,
            lipschitz: 0.5 + 1.5 * rng.random::<f64>(),
            noise_var: 0.2 + 3.8 * rng.random::<f64>(),
            noise_slope: 0.0,
            workers: 1 + (rng.random::<f64>() * 16.0) as u32,
            step_time: 0.5 + 1.5 * rng.random::<f64>(),
            comm_delay: 0.1 + 7.9 * rng.random::<f64>(),
        };
        let lr = 0.02 + 0.18 * rng.random::<f64>();
        let tau = 1 + (rng.random::<f64>() * 39.0) as u32;
        let rounds = 1 + (rng.random::<f64>() * 59.0) as usize;
        let seq = vec![tau; rounds];
        let k = tau as u64 * rounds as u64;
        let via_seq = simplified_fixed_lr_bound(&p, lr, &seq, k).unwrap();
        let horizon = k as f64 * (p.step_time + p.comm_delay / tau as f64);
        let via_time = error_runtime_bound(&p, lr, tau as f64, horizon).unwrap();
        assert!(
            (via_seq - via_time).abs() <= 1e-12 * via_seq.abs().max(1.0),
            "trial {trial}: {via_seq} vs {via_time}"
        );
    }
    pass(11, "iteration-count bound equals the wall-clock bound under the runtime substitution, 10 trials");
}
