//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails. Select criteria by number:
//! `cargo test --release --test acceptance -- 5 6 7`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use proxsvrg::data::{write_trace, TraceFormat};
use proxsvrg::optimizers::reduced_variance_gradient;
use proxsvrg::theory::{
    check_cone_condition, contraction_convex, contraction_nonconvex, epochs_needed, modified_rsc,
    statistical_tolerance_convex, statistical_tolerance_nonconvex, RscParams,
};
use proxsvrg::{
    component_gradient, constrained_prox, full_gradient, smoothness_bound, subspace_compatibility, Dataset64,
    Error, GroupMap, LossKind, Problem64, Regularizer, SubspaceModel, Trace64,
};
use proxsvrg::data::Covariance;
use proxsvrg_bench::commands::{phase_study, run_experiment};
use proxsvrg_bench::config::{ExperimentConfig, ProblemKind, SolverName};
use proxsvrg_bench::fit::fit_decay;
use proxsvrg_bench::runner::{compute_reference, smooth_gradient, SolverRun};
use proxsvrg_bench::setup::build_instance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIT_START: f64 = 5.0;
const FIT_END: f64 = 50.0;
const GAP_FLOOR: f64 = 1e-12;

// criterion 1
const LINEAR_DECAY: f64 = 0.99;
const LASSO_TARGET_GAP: f64 = 1e-8;
const LASSO_PASSES: f64 = 100.0;
// criterion 3
const PHASE_THRESHOLD: f64 = 0.995;
// criterion 4
const NONCONVEX_TARGET_GAP: f64 = 1e-6;
const NONCONVEX_PASSES: usize = 200;
const CORRECTED_BETA: f64 = 1.0 / 2048.0;
const SCAD_BETA: f64 = 1.0 / 4096.0;
// criterion 5
const VARIANCE_SLACK: f64 = 1e-9;
// criterion 6
const PROX_ARG_TOL: f64 = 1e-6;
const PROX_OBJ_TOL: f64 = 1e-10;
// criterion 7
const EXPANSION_SLACK: f64 = 1e-9;
// criterion 9
const FD_REL_TOL: f64 = 1e-5;
const UNBIASED_TOL: f64 = 1e-12;
// criterion 10
const CONSTANT_REL_TOL: f64 = 1e-12;
// criterion 11
const SEPARATION: f64 = 10.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

type Check = Result<Outcome, String>;

/// How to re-execute a recorded run.
#[derive(Clone)]
enum Job {
    Run(ExperimentConfig),
    Phase(ExperimentConfig),
}

struct Replay {
    label: String,
    job: Job,
    traces: Vec<(String, Vec<u8>)>,
}

fn trace_bytes(trace: &Trace64) -> Vec<u8> {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("trace.csv");
    write_trace(trace, &path, TraceFormat::Csv).expect("trace written");
    std::fs::read(path).expect("trace read")
}

fn run_traces(runs: &[SolverRun]) -> Vec<(String, Vec<u8>)> {
    runs.iter()
        .filter_map(|r| r.trace.as_ref().map(|t| (r.solver.to_string(), trace_bytes(t))))
        .collect()
}

fn execute(job: &Job) -> Result<Vec<(String, Vec<u8>)>, String> {
    let e = |e: proxsvrg_bench::BenchError| e.to_string();
    Ok(match job {
        Job::Run(cfg) => run_traces(&run_experiment(cfg).map_err(e)?.runs),
        Job::Phase(cfg) => {
            let res = phase_study(cfg).map_err(e)?;
            res.rows
                .iter()
                .zip(&res.traces)
                .filter_map(|(row, t)| t.as_ref().map(|t| (format!("r={}", row.r), trace_bytes(t))))
                .collect()
        }
    })
}

#[derive(Default)]
struct Suite {
    replays: Vec<Replay>,
    /// Grid-selected step sizes on the first lasso instance.
    tuned: Option<BTreeMap<SolverName, f64>>,
    /// Final runs of the baseline comparison by solver seed.
    baseline: BTreeMap<u64, Vec<SolverRun>>,
}

/// The lasso instance of the sparsity experiments.
fn lasso(r: usize, data_seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemKind::Lasso,
        n: 2500,
        p: 5000,
        r,
        b: 0.0,
        noise: 1.0,
        data_seed: Some(data_seed),
        seed: data_seed,
        epochs: 100,
        ..ExperimentConfig::default()
    }
}

fn decay(run: &SolverRun) -> Option<f64> {
    run.trace
        .as_ref()
        .and_then(|t| fit_decay(&t.records, FIT_START, FIT_END, GAP_FLOOR))
        .map(|f| f.factor)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("none".into(), |v| format!("{v:.4e}"))
}

impl Suite {
    fn record(&mut self, label: impl Into<String>, job: Job, traces: Vec<(String, Vec<u8>)>) {
        self.replays.push(Replay { label: label.into(), job, traces });
    }

    fn experiment(&mut self, label: &str, cfg: ExperimentConfig) -> Result<Vec<SolverRun>, String> {
        let exp = run_experiment(&cfg).map_err(|e| format!("{label}: {e}"))?;
        self.record(label, Job::Run(cfg), run_traces(&exp.runs));
        Ok(exp.runs)
    }

    /// Five solvers on the lasso instance of criterion 1 at solver seed
    /// `seed`. Seed 1 grid-tunes the constant-rate solvers over the full
    /// 100-pass budget; the other seeds reuse those steps.
    fn baseline_runs(&mut self, seed: u64) -> Result<Vec<SolverRun>, String> {
        if let Some(r) = self.baseline.get(&seed) {
            return Ok(r.clone());
        }
        let mut cfg = lasso(50, 1);
        cfg.seed = seed;
        let inst = build_instance(&cfg).map_err(|e| e.to_string())?;
        cfg.rda_gamma = smoothness_bound(inst.problem.loss(), inst.problem.dataset()).max;
        let mut runs = Vec::new();
        match &self.tuned {
            Some(tuned) => cfg.betas = tuned.clone(),
            None if seed == 1 => {
                let grid = ExperimentConfig {
                    solvers: vec![SolverName::Svrg, SolverName::Sag, SolverName::CompositeGradient],
                    grid: true,
                    ..cfg.clone()
                };
                runs = self.experiment("lasso r=50 grid-tuned", grid)?;
                let tuned: BTreeMap<_, _> = runs.iter().map(|r| (r.solver, r.beta)).collect();
                if !tuned.contains_key(&SolverName::Svrg) {
                    return Err("svrg diverged at every grid rate".into());
                }
                cfg.betas = tuned.clone();
                self.tuned = Some(tuned);
            }
            None => {
                self.baseline_runs(1)?;
                cfg.betas = self.tuned.clone().unwrap();
            }
        }
        // the decaying schedule starts from the tuned SVRG step
        cfg.betas.insert(SolverName::Sgd, cfg.betas[&SolverName::Svrg]);
        cfg.solvers = if runs.is_empty() {
            SolverName::ALL.to_vec()
        } else {
            vec![SolverName::Sgd, SolverName::Rda]
        };
        runs.extend(self.experiment(&format!("lasso r=50 solver seed {seed}"), cfg)?);
        self.baseline.insert(seed, runs.clone());
        Ok(runs)
    }

    fn tuned_svrg(&mut self) -> Result<f64, String> {
        if self.tuned.is_none() {
            self.baseline_runs(1)?;
        }
        Ok(self.tuned.as_ref().unwrap()[&SolverName::Svrg])
    }

    fn c1(&mut self) -> Check {
        let runs = self.baseline_runs(1)?;
        let svrg = runs.iter().find(|r| r.solver == SolverName::Svrg).unwrap();
        let trace = svrg.trace.as_ref().ok_or("svrg did not complete")?;
        let factor = decay(svrg);
        let hit = trace
            .records
            .iter()
            .find(|r| r.passes <= LASSO_PASSES && r.gap.is_some_and(|g| g <= LASSO_TARGET_GAP));
        let pass = factor.is_some_and(|f| f < LINEAR_DECAY) && hit.is_some();
        Ok(Outcome::new(
            pass,
            format!(
                "beta {:e} (grid), decay {} (< {LINEAR_DECAY}), gap <= {LASSO_TARGET_GAP:e} at pass {}",
                svrg.beta,
                fmt_opt(factor),
                hit.map_or("never".into(), |r| r.passes.to_string())
            ),
        ))
    }

    fn c2(&mut self) -> Check {
        let beta = self.tuned_svrg()?;
        let mut wins = 0;
        let mut parts = Vec::new();
        for seed in 1..=5 {
            let mut f = Vec::new();
            for r in [50, 100] {
                let mut cfg = lasso(r, seed);
                cfg.betas.insert(SolverName::Svrg, beta);
                let runs = self.experiment(&format!("lasso r={r} seed {seed}"), cfg)?;
                f.push(decay(&runs[0]));
            }
            let ok = matches!((f[0], f[1]), (Some(a), Some(b)) if a < b);
            wins += ok as usize;
            parts.push(format!("seed {seed}: {} vs {}", fmt_opt(f[0]), fmt_opt(f[1])));
        }
        Ok(Outcome::new(
            wins >= 4,
            format!("r=50 faster on {wins}/5 seeds (beta {beta:e}); {}", parts.join(", ")),
        ))
    }

    fn c3(&mut self) -> Check {
        let beta = self.tuned_svrg()?;
        let mut cfg = lasso(50, 1);
        cfg.betas.insert(SolverName::Svrg, beta);
        cfg.phase_r = vec![500, 750, 1000, 1500];
        cfg.linear_threshold = PHASE_THRESHOLD;
        let res = phase_study(&cfg).map_err(|e| e.to_string())?;
        let traces = res
            .rows
            .iter()
            .zip(&res.traces)
            .filter_map(|(row, t)| t.as_ref().map(|t| (format!("r={}", row.r), trace_bytes(t))))
            .collect();
        self.record("phase lasso", Job::Phase(cfg), traces);
        let linear = |r: usize| res.rows.iter().find(|x| x.r == r).map(|x| x.linear);
        let bracket_ok = res.transition.is_some_and(|(lo, hi)| lo >= 500 && hi <= 1500);
        let pass = linear(500) == Some(true) && linear(1500) == Some(false) && bracket_ok;
        let table: Vec<String> = res
            .rows
            .iter()
            .map(|x| format!("r={} {} {}", x.r, fmt_opt(x.fit.map(|f| f.factor)), if x.linear { "linear" } else { "non-linear" }))
            .collect();
        Ok(Outcome::new(
            pass,
            format!("beta {beta:e}; {}; transition {:?}", table.join(", "), res.transition),
        ))
    }

    fn c4(&mut self) -> Check {
        let corrected = ExperimentConfig {
            problem: ProblemKind::Corrected,
            p: 3000,
            gamma_w: 0.05,
            lambda: Some(0.05),
            epochs: NONCONVEX_PASSES,
            betas: BTreeMap::from([(SolverName::Svrg, CORRECTED_BETA)]),
            ..lasso(50, 1)
        };
        let scad = ExperimentConfig {
            problem: ProblemKind::Scad,
            variance: 2.0,
            shape: 3.7,
            lambda: Some(0.05),
            epochs: NONCONVEX_PASSES,
            betas: BTreeMap::from([(SolverName::Svrg, SCAD_BETA)]),
            ..lasso(50, 1)
        };
        let mut pass = true;
        let mut parts = Vec::new();
        for (name, cfg) in [("corrected", corrected), ("scad", scad)] {
            let runs = self.experiment(name, cfg)?;
            let run = &runs[0];
            let factor = decay(run);
            let hit = run.trace.as_ref().and_then(|t| {
                t.records
                    .iter()
                    .find(|r| r.passes <= NONCONVEX_PASSES as f64 && r.gap.is_some_and(|g| g <= NONCONVEX_TARGET_GAP))
                    .map(|r| r.passes)
            });
            pass &= factor.is_some_and(|f| f < LINEAR_DECAY) && hit.is_some();
            parts.push(format!(
                "{name}: beta {:e}, decay {}, gap <= {NONCONVEX_TARGET_GAP:e} at pass {}",
                run.beta,
                fmt_opt(factor),
                hit.map_or("never".into(), |p| p.to_string())
            ));
        }
        Ok(Outcome::new(pass, parts.join("; ")))
    }

    fn c5(&mut self) -> Check {
        let cfg = ExperimentConfig {
            n: 50,
            p: 20,
            r: 3,
            lambda: Some(0.1),
            reference_passes: 4000,
            reference_beta: Some(0.01),
            ..lasso(3, 5)
        };
        let inst = build_instance(&cfg).map_err(|e| e.to_string())?;
        let problem = &inst.problem;
        let theta_hat = compute_reference(&cfg, problem).map_err(|e| e.to_string())?.theta;
        let g_hat = problem.objective_value(&theta_hat).map_err(|e| e.to_string())?;
        let data = problem.dataset();
        let loss = problem.loss();
        let l = smoothness_bound(loss, data).max;
        let rho = problem.rho();
        let (n, p) = (data.n(), data.p());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let feasible = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let scale = 10f64.powf(rng.random_range(-6.0..0.5));
            let mut v: Vec<f64> = theta_hat.iter().map(|t| t + scale * rng.random_range(-1.0..1.0)).collect();
            let norm: f64 = v.iter().map(|x| x.abs()).sum();
            if norm > rho {
                let shrink = rho / norm * rng.random_range(0.5..1.0);
                v.iter_mut().for_each(|x| *x *= shrink);
            }
            v
        };
        let mut worst = f64::INFINITY;
        let mut failures = 0;
        for _ in 0..100 {
            let theta = feasible(&mut rng);
            let snap = feasible(&mut rng);
            let grad = full_gradient(loss, data, &theta).map_err(|e| e.to_string())?;
            let snap_grad = full_gradient(loss, data, &snap).map_err(|e| e.to_string())?;
            let mut second_moment = 0.0;
            for i in 0..n {
                let a = component_gradient(loss, data, i, &theta).map_err(|e| e.to_string())?;
                let b = component_gradient(loss, data, i, &snap).map_err(|e| e.to_string())?;
                let dev: f64 = (0..p).map(|j| (a[j] - b[j] + snap_grad[j] - grad[j]).powi(2)).sum();
                second_moment += dev / n as f64;
            }
            let g = |v: &[f64]| problem.objective_value(v).unwrap();
            let bound = 4.0 * l * (g(&theta) - g_hat + g(&snap) - g_hat) + VARIANCE_SLACK;
            worst = worst.min(bound - second_moment);
            failures += (second_moment > bound) as usize;
        }
        Ok(Outcome::new(
            failures == 0,
            format!("{failures}/100 violations, smallest slack {worst:.3e} (L = {l:.3})"),
        ))
    }

    fn c6(&mut self) -> Check {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut parts = Vec::new();
        let mut pass = true;
        for kind in 0..4 {
            let mut worst_arg = 0.0f64;
            let mut worst_obj = 0.0f64;
            let mut active = 0;
            for _ in 0..1000 {
                let case = ProxCase::draw(kind, &mut rng);
                let got = constrained_prox(&case.reg, case.lambda, case.step, case.rho, &case.z)
                    .map_err(|e| e.to_string())?;
                let want = case.brute_force();
                let d = dist(&got, &want);
                let infeasible = case.penalty(&got) > case.rho * (1.0 + 1e-12);
                worst_arg = worst_arg.max(if infeasible { f64::INFINITY } else { d });
                worst_obj = worst_obj.max((case.objective(&got) - case.objective(&want)).abs());
                active += case.active as usize;
            }
            pass &= worst_arg <= PROX_ARG_TOL && worst_obj <= PROX_OBJ_TOL;
            parts.push(format!(
                "{}: arg {worst_arg:.1e}, obj {worst_obj:.1e} ({active} active)",
                ["l1", "group", "scad", "mcp"][kind]
            ));
        }
        Ok(Outcome::new(pass, parts.join("; ")))
    }

    fn c7(&mut self) -> Check {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst = f64::NEG_INFINITY;
        let mut failures = 0;
        for k in 0..10_000 {
            let case = ProxCase::draw(k % 4, &mut rng);
            let y: Vec<f64> = case.z.iter().map(|v| v + rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-4.0..0.5))).collect();
            let px = constrained_prox(&case.reg, case.lambda, case.step, case.rho, &case.z).map_err(|e| e.to_string())?;
            let py = constrained_prox(&case.reg, case.lambda, case.step, case.rho, &y).map_err(|e| e.to_string())?;
            let excess = dist(&px, &py) - dist(&case.z, &y);
            worst = worst.max(excess);
            failures += (excess > EXPANSION_SLACK) as usize;
        }
        Ok(Outcome::new(failures == 0, format!("{failures}/10000 violations, largest excess {worst:.2e}")))
    }

    fn c8(&mut self) -> Check {
        let mut passes = 0;
        let mut lambda_ok = 0;
        let mut min_slack = f64::INFINITY;
        for seed in 1..=100 {
            let cfg = ExperimentConfig {
                n: 200,
                p: 400,
                r: 5,
                beta: 0.002,
                ..lasso(5, seed)
            };
            let inst = build_instance(&cfg).map_err(|e| e.to_string())?;
            assert!(inst.lambda_defaulted);
            let truth = inst.truth.as_ref().unwrap();
            let reference = compute_reference(&cfg, &inst.problem).map_err(|e| e.to_string())?;
            let grad = smooth_gradient(&inst.problem, &truth.theta).map_err(|e| e.to_string())?;
            let rep = check_cone_condition(
                &reference.theta,
                &truth.theta,
                &truth.support,
                inst.problem.regularizer(),
                inst.problem.lambda(),
                &grad,
            )
            .map_err(|e| e.to_string())?;
            passes += rep.pass as usize;
            lambda_ok += rep.lambda_condition as usize;
            min_slack = min_slack.min(rep.slack);
        }
        Ok(Outcome::new(
            passes >= 99,
            format!("{passes}/100 pass (lambda condition held on {lambda_ok}), smallest slack {min_slack:.3e}"),
        ))
    }

    fn c9(&mut self) -> Check {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst_fd = [0.0f64; 3];
        let mut worst_bias = 0.0f64;
        for k in 0..900 {
            let kind = k % 3;
            let n = rng.random_range(2..12);
            let p = rng.random_range(1..7);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let gamma_w = rng.random_range(0.0..1.0);
            let (loss, y): (LossKind<f64>, Vec<f64>) = match kind {
                0 => (LossKind::Squared, (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()),
                1 => (LossKind::Logistic, (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()),
                _ => (LossKind::CorrectedQuadratic { noise_scale: gamma_w }, (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()),
            };
            let data = Arc::new(Dataset64::from_rows(&rows, y.clone()).map_err(|e| e.to_string())?);
            let problem = Problem64::new(data.clone(), loss, Regularizer::L1, 0.0, f64::INFINITY).map_err(|e| e.to_string())?;
            let theta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..1.5)).collect();

            let value = |t: &[f64]| smooth_value(kind, gamma_w, &rows, &y, t);
            let grad = smooth_gradient(&problem, &theta).map_err(|e| e.to_string())?;
            let h = 1e-5;
            let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(1e-3);
            for j in 0..p {
                let mut a = theta.clone();
                let mut b = theta.clone();
                a[j] += h;
                b[j] -= h;
                let fd = (value(&a) - value(&b)) / (2.0 * h);
                worst_fd[kind] = worst_fd[kind].max((fd - grad[j]).abs() / scale);
            }

            let snap: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..1.5)).collect();
            let mu = loss.concavity();
            let mut snap_grad = full_gradient(&loss, &data, &snap).map_err(|e| e.to_string())?;
            for (g, s) in snap_grad.iter_mut().zip(&snap) {
                *g -= mu * s;
            }
            let mut mean = vec![0.0; p];
            for i in 0..n {
                let v = reduced_variance_gradient(&loss, &data, i, &theta, &snap, &snap_grad, mu).map_err(|e| e.to_string())?;
                for j in 0..p {
                    mean[j] += v[j] / n as f64;
                }
            }
            for j in 0..p {
                worst_bias = worst_bias.max((mean[j] - grad[j]).abs() / grad[j].abs().max(1.0));
            }
        }
        let pass = worst_fd.iter().all(|&w| w <= FD_REL_TOL) && worst_bias <= UNBIASED_TOL;
        Ok(Outcome::new(
            pass,
            format!(
                "finite differences: squared {:.1e}, logistic {:.1e}, corrected {:.1e}; bias {worst_bias:.1e}",
                worst_fd[0], worst_fd[1], worst_fd[2]
            ),
        ))
    }

    fn c10(&mut self) -> Check {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut worst = BTreeMap::<&str, f64>::new();
        let mut mismatches = Vec::new();
        let mut note = |name: &'static str, a: f64, b: f64, scale: f64, worst: &mut BTreeMap<&str, f64>| {
            let rel = (a - b).abs() / scale.max(f64::MIN_POSITIVE);
            let w = worst.entry(name).or_insert(0.0);
            *w = w.max(rel);
            if !(rel <= CONSTANT_REL_TOL) {
                mismatches.push(format!("{name}: {a} vs {b}"));
            }
        };
        let mut epoch_mismatch = 0;
        let mut epoch_detail = None;
        for _ in 0..10_000 {
            // modified RSC of a Gaussian design and an r-sparse model
            let p = rng.random_range(2..20_000usize);
            let n = rng.random_range(10..100_000usize);
            let r = rng.random_range(1..=p.min(500));
            let cov = Covariance::new(p, 10f64.powf(rng.random_range(-1.0..1.0)), rng.random_range(0.0..0.9))
                .map_err(|e| e.to_string())?;
            let c1 = rng.random_range(0.1..2.0);
            let mu = rng.random_range(0.0..0.5);
            let rsc = RscParams::gaussian(&cov, n, c1).map_err(|e| e.to_string())?;
            let sub = SubspaceModel::support((0..r).collect());
            let got = modified_rsc(rsc.sigma, rsc.tau_sigma, subspace_compatibility(&sub), mu).value;
            let sigma_min = cov.variance() * (1.0 - cov.b());
            let penalty = c1 * cov.variance() * r as f64 * (p as f64).ln() / n as f64;
            let want = 0.5 * sigma_min - mu - penalty;
            note("sigma_bar", got, want, 0.5 * sigma_min + mu + penalty, &mut worst);

            // contraction constants
            let l = 10f64.powf(rng.random_range(0.0..4.0));
            let beta = rng.random_range(0.001..0.99) / (4.0 * l);
            let m = 10f64.powf(rng.random_range(0.0..5.0)).round() as usize;
            let sb = 10f64.powf(rng.random_range(-3.0..1.0));
            let lb = 4.0 * l * beta;
            let q = sb * beta * (1.0 - lb) * m as f64;
            let alpha_cvx = (1.0 + lb * sb * beta * (m as f64 + 1.0)) / q;
            let c = contraction_convex(beta, sb, l, m).map_err(|e| e.to_string())?;
            note("alpha convex", c.alpha, alpha_cvx, alpha_cvx, &mut worst);
            note("Q", c.q, q, q, &mut worst);

            let bound = (1.0 - lb) / (1.0 + lb);
            let mu_nc = rng.random_range(0.0..0.99) * bound * sb;
            let (alpha_nc, chi) = nonconvex_oracle(beta, mu_nc, l, m as f64, sb);
            let nc = contraction_nonconvex(beta, mu_nc, l, m, sb).map_err(|e| e.to_string())?;
            note("alpha nonconvex", nc.alpha, alpha_nc, alpha_nc.abs(), &mut worst);
            note("chi", nc.chi, chi, chi.abs(), &mut worst);

            // statistical tolerances
            let tau = 10f64.powf(rng.random_range(-6.0..0.0));
            let h = (r as f64).sqrt();
            let err = 10f64.powf(rng.random_range(-4.0..1.0));
            let psi_perp = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..1.0) };
            let e_cvx = 512.0 * tau * (h * err + psi_perp).powi(2) / q;
            let got = statistical_tolerance_convex(tau, c.q, h, err, psi_perp).map_err(|e| e.to_string())?;
            note("e^2 convex", got, e_cvx, e_cvx, &mut worst);
            let e_nc = (8.0 * err).powi(2) * tau * chi * r as f64;
            note("e^2 nonconvex", statistical_tolerance_nonconvex(tau, nc.chi, r, err), e_nc, e_nc.abs(), &mut worst);

            // epochs needed at either contraction factor
            let alpha = if rng.random_bool(0.5) { c.alpha } else { nc.alpha };
            let gap0 = 10f64.powf(rng.random_range(-2.0..4.0));
            let kappa = gap0 * 10f64.powf(rng.random_range(-12.0..0.5));
            let got = epochs_needed(gap0, kappa, alpha);
            let want = epochs_oracle(gap0, kappa, alpha);
            let agree = match (&got, want) {
                (Ok(a), Some(b)) => *a == b,
                (Err(Error::NoCertificate(_)), None) => true,
                _ => false,
            };
            if !agree {
                epoch_mismatch += 1;
                epoch_detail.get_or_insert(format!("epochs_needed({gap0}, {kappa}, {alpha}): {got:?} vs {want:?}"));
            }
        }

        let boundary = boundary_checks(&mut rng);
        let pass = mismatches.is_empty() && epoch_mismatch == 0 && boundary.is_empty();
        let summary: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
        let mut detail = format!("10000 draws, worst relative error: {}; epochs mismatches {epoch_mismatch}", summary.join(", "));
        if !boundary.is_empty() {
            detail.push_str(&format!("; boundary failures: {}", boundary.join(" | ")));
        } else {
            detail.push_str("; boundaries exact");
        }
        if let Some(first) = mismatches.first().or(epoch_detail.as_ref()) {
            detail.push_str(&format!("; first mismatch {first}"));
        }
        Ok(Outcome::new(pass, detail))
    }

    fn c11(&mut self) -> Check {
        let mut wins = 0;
        let mut parts = Vec::new();
        for seed in 1..=5 {
            let runs = self.baseline_runs(seed)?;
            let gap = |s: SolverName| {
                runs.iter()
                    .find(|r| r.solver == s)
                    .and_then(|r| r.final_gap())
                    .map(|g| g.max(GAP_FLOOR))
            };
            let g: Vec<Option<f64>> = SolverName::ALL.iter().map(|&s| gap(s)).collect();
            let ok = match g[..] {
                [Some(svrg), Some(sag), Some(gd), Some(sgd), Some(rda)] => {
                    svrg.max(sag) / svrg.min(sag) < SEPARATION
                        && gd >= SEPARATION * svrg.max(sag)
                        && sgd.min(rda) >= SEPARATION * gd
                }
                _ => false,
            };
            wins += ok as usize;
            parts.push(format!(
                "seed {seed}: {}",
                g.iter().map(|v| fmt_opt(*v)).collect::<Vec<_>>().join("/")
            ));
        }
        Ok(Outcome::new(
            wins >= 4,
            format!(
                "ordering held on {wins}/5 seeds; final gaps svrg/sag/gd/sgd/rda (floored at {GAP_FLOOR:e}): {}",
                parts.join(", ")
            ),
        ))
    }

    fn c12(&mut self) -> Check {
        if self.replays.is_empty() {
            return Ok(Outcome::new(false, "no runs recorded; select it together with 1-4 or 11"));
        }
        let mut differing = Vec::new();
        let mut traces = 0;
        for rep in &self.replays {
            let again = execute(&rep.job)?;
            traces += rep.traces.len();
            if again != rep.traces {
                differing.push(rep.label.clone());
            }
        }
        Ok(Outcome::new(
            differing.is_empty(),
            format!(
                "{} runs ({traces} traces) re-executed; differing: {}",
                self.replays.len(),
                if differing.is_empty() { "none".into() } else { differing.join(", ") }
            ),
        ))
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Smooth part of the objective written out directly: squared and logistic
/// losses averaged over rows, and `1/2 t'(Z'Z/n - gamma_w I)t - y'Zt/n` for
/// the corrected loss.
fn smooth_value(kind: usize, gamma_w: f64, rows: &[Vec<f64>], y: &[f64], t: &[f64]) -> f64 {
    let n = rows.len() as f64;
    let dot = |r: &[f64]| r.iter().zip(t).map(|(a, b)| a * b).sum::<f64>();
    match kind {
        0 => rows.iter().zip(y).map(|(r, yi)| 0.5 * (dot(r) - yi).powi(2)).sum::<f64>() / n,
        1 => rows.iter().zip(y).map(|(r, yi)| (1.0 + (-yi * dot(r)).exp()).ln()).sum::<f64>() / n,
        _ => {
            let quad: f64 = rows.iter().map(|r| dot(r).powi(2)).sum::<f64>() / n;
            let lin: f64 = rows.iter().zip(y).map(|(r, yi)| yi * dot(r)).sum::<f64>() / n;
            let sq: f64 = t.iter().map(|v| v * v).sum();
            0.5 * quad - 0.5 * gamma_w * sq - lin
        }
    }
}

/// Non-convex contraction factor and tolerance factor in the form
/// `N / (beta m (2(1 - 4 L beta) - (2 mu / sigma_bar)(1 + 4 L beta)))`.
fn nonconvex_oracle(beta: f64, mu: f64, l: f64, m: f64, sb: f64) -> (f64, f64) {
    let lb = 4.0 * l * beta;
    let c = 1.0 + beta * mu + 4.0 * l * mu * beta * beta * (1.0 + m);
    let d = beta * m * (2.0 * (1.0 - lb) - 2.0 * mu / sb * (1.0 + lb));
    let alpha = (8.0 * l * beta * beta * (m + 1.0) + 2.0 * c / sb) / d;
    let chi = (2.0 * mu * beta * m * (1.0 + lb) + 2.0 * c) / sb / d;
    (alpha, chi)
}

fn epochs_oracle(gap0: f64, kappa: f64, alpha: f64) -> Option<u64> {
    if !(0.0..1.0).contains(&alpha) {
        return None;
    }
    if gap0 <= kappa {
        return Some(0);
    }
    if alpha == 0.0 {
        return Some(1);
    }
    let s = 3.0 * (gap0.ln() - kappa.ln()) / -alpha.ln();
    let near = s.round();
    Some(if (s - near).abs() <= 1e-9 * near.max(1.0) { near } else { s.ceil() } as u64)
}

/// Certificates must be refused exactly on and beyond the two boundaries and
/// granted just inside them.
fn boundary_checks(rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut fails = Vec::new();
    let no_cert = |r: &Result<(), Error>| matches!(r, Err(Error::NoCertificate(_)));
    for _ in 0..1000 {
        let l = 2f64.powi(rng.random_range(-4..14));
        let m = rng.random_range(1..100_000);
        let sb = 10f64.powf(rng.random_range(-3.0..1.0));
        // 4 L beta = 1 exactly, since l is a power of two
        let edge = 1.0 / (4.0 * l);
        for (beta, refuse) in [(edge, true), (edge * 1.5, true), (edge * (1.0 - 1e-9), false)] {
            let cvx = contraction_convex(beta, sb, l, m).map(|_| ());
            if no_cert(&cvx) != refuse {
                fails.push(format!("convex 4 L beta = {}: {cvx:?}", 4.0 * l * beta));
            }
            let nc = contraction_nonconvex(beta, 0.0, l, m, sb).map(|_| ());
            if no_cert(&nc) != refuse {
                fails.push(format!("nonconvex 4 L beta = {}: {nc:?}", 4.0 * l * beta));
            }
        }
        let beta = rng.random_range(0.01..0.9) / (4.0 * l);
        let lb = 4.0 * l * beta;
        let bound = (1.0 - lb) / (1.0 + lb);
        for (mu, refuse) in [(bound * sb, true), (bound * sb * 1.1, true), (bound * sb * (1.0 - 1e-9), false)] {
            let nc = contraction_nonconvex(beta, mu, l, m, sb).map(|_| ());
            if no_cert(&nc) != refuse {
                fails.push(format!("mu / sigma_bar = {} vs {bound}: {nc:?}", mu / sb));
            }
        }
        for sigma_bar in [0.0, -sb] {
            if !no_cert(&contraction_convex(beta, sigma_bar, l, m).map(|_| ()))
                || !no_cert(&contraction_nonconvex(beta, 0.0, l, m, sigma_bar).map(|_| ()))
            {
                fails.push(format!("sigma_bar = {sigma_bar} certified"));
            }
        }
    }
    fails.truncate(5);
    fails
}

/// One randomized prox problem `min 1/2|x - z|^2 + step lambda pen(x)` over
/// `pen(x) <= rho`, with `pen` the constraint norm of the regularizer.
struct ProxCase {
    reg: Regularizer<f64>,
    groups: Vec<Vec<usize>>,
    lambda: f64,
    step: f64,
    rho: f64,
    z: Vec<f64>,
    active: bool,
}

impl ProxCase {
    fn draw(kind: usize, rng: &mut ChaCha8Rng) -> Self {
        let (reg, groups, dim) = match kind {
            0 => (Regularizer::L1, vec![vec![0], vec![1], vec![2]], 3),
            1 => {
                let groups = vec![vec![0, 1], vec![2], vec![3]];
                (Regularizer::Group(GroupMap::new(4, groups.clone()).unwrap()), groups, 4)
            }
            2 => (Regularizer::Scad { shape: rng.random_range(2.5..5.0) }, vec![vec![0], vec![1], vec![2]], 3),
            _ => (Regularizer::Mcp { shape: rng.random_range(1.5..4.0) }, vec![vec![0], vec![1], vec![2]], 3),
        };
        let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut case = Self {
            reg,
            groups,
            lambda: rng.random_range(0.1..1.5),
            step: rng.random_range(0.05..1.0),
            rho: f64::INFINITY,
            z,
            active: false,
        };
        if rng.random_bool(0.5) {
            let free = case.brute_force();
            let size = case.penalty(&free);
            if size > 1e-3 {
                case.rho = size * rng.random_range(0.1..0.9);
                case.active = true;
            }
        } else if rng.random_bool(0.5) {
            case.rho = case.penalty(&case.z) * 2.0 + 1.0;
        }
        case
    }

    /// Constraint norm, evaluated from the penalty formulas directly.
    fn penalty(&self, x: &[f64]) -> f64 {
        let lam = self.lambda;
        match &self.reg {
            Regularizer::L1 => x.iter().map(|v| v.abs()).sum(),
            Regularizer::Group(_) => self
                .groups
                .iter()
                .map(|g| g.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt())
                .sum(),
            Regularizer::Scad { shape: zeta } => x
                .iter()
                .map(|&t| {
                    let s = t.abs();
                    let scad = if s <= lam {
                        lam * s
                    } else if s <= zeta * lam {
                        (2.0 * zeta * lam * s - s * s - lam * lam) / (2.0 * (zeta - 1.0))
                    } else {
                        lam * lam * (zeta + 1.0) / 2.0
                    };
                    (scad + s * s / (2.0 * (zeta - 1.0))) / lam
                })
                .sum(),
            Regularizer::Mcp { shape: b } => x
                .iter()
                .map(|&t| {
                    let s = t.abs();
                    let mcp = if s <= b * lam { lam * s - s * s / (2.0 * b) } else { b * lam * lam / 2.0 };
                    (mcp + s * s / (2.0 * b)) / lam
                })
                .sum(),
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        0.5 * dist(x, &self.z).powi(2) + self.step * self.lambda * self.penalty(x)
    }

    /// Pulls `y` back along its ray onto the feasible set. Every constraint
    /// norm here grows along rays, so bisection on the scale finds the
    /// boundary.
    fn retract(&self, y: &[f64]) -> Vec<f64> {
        let size = self.penalty(y);
        if size <= self.rho {
            return y.to_vec();
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        if matches!(self.reg, Regularizer::L1 | Regularizer::Group(_)) {
            lo = self.rho / size;
        } else {
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                let x: Vec<f64> = y.iter().map(|v| v * mid).collect();
                if self.penalty(&x) <= self.rho {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        y.iter().map(|v| v * lo).collect()
    }

    /// Pattern search on a `k^d` grid of pre-images under [`Self::retract`]:
    /// move to the best grid point and halve the window once it is interior.
    fn brute_force(&self) -> Vec<f64> {
        let d = self.z.len();
        let k: usize = if d <= 3 { 5 } else { 7 };
        let half = (k / 2) as i64;
        let mut center = vec![0.0; d];
        let mut best = self.objective(&center);
        let mut width = self.z.iter().fold(0.0f64, |a, v| a.max(v.abs())) + 1.0;
        let stop = 1e-14 * (1.0 + width);
        let mut idx = vec![0i64; d];
        let mut cand = vec![0.0; d];
        for _ in 0..20_000 {
            if width < stop {
                break;
            }
            let spacing = width / half as f64;
            let mut best_idx: Option<Vec<i64>> = None;
            idx.iter_mut().for_each(|v| *v = -half);
            loop {
                for j in 0..d {
                    cand[j] = center[j] + idx[j] as f64 * spacing;
                }
                let v = self.objective(&self.retract(&cand));
                if v < best {
                    best = v;
                    best_idx = Some(idx.clone());
                }
                let mut j = 0;
                while j < d {
                    idx[j] += 1;
                    if idx[j] <= half {
                        break;
                    }
                    idx[j] = -half;
                    j += 1;
                }
                if j == d {
                    break;
                }
            }
            match best_idx {
                Some(bi) => {
                    for j in 0..d {
                        center[j] += bi[j] as f64 * spacing;
                    }
                    if bi.iter().all(|v| v.abs() < half) {
                        width *= 0.5;
                    }
                }
                None => width *= 0.5,
            }
        }
        self.retract(&center)
    }
}

const NAMES: [&str; 12] = [
    "lasso linear convergence",
    "sparsity ordering",
    "phase transition",
    "non-convex convergence",
    "variance bound",
    "prox oracle equivalence",
    "prox non-expansiveness",
    "cone condition",
    "gradient correctness",
    "theory constants",
    "baseline ordering",
    "determinism",
];

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .filter(|k| (1..=12).contains(k))
        .collect();
    let selected = if selected.is_empty() { (1..=12).collect() } else { selected };
    let mut suite = Suite::default();
    let mut failed = 0;
    for id in selected {
        let start = Instant::now();
        let res = match id {
            1 => suite.c1(),
            2 => suite.c2(),
            3 => suite.c3(),
            4 => suite.c4(),
            5 => suite.c5(),
            6 => suite.c6(),
            7 => suite.c7(),
            8 => suite.c8(),
            9 => suite.c9(),
            10 => suite.c10(),
            11 => suite.c11(),
            _ => suite.c12(),
        };
        let out = res.unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        failed += !out.pass as usize;
        println!(
            "criterion {id:>2} {} {}: {} [{:.1}s]",
            if out.pass { "PASS" } else { "FAIL" },
            NAMES[id - 1],
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
