//! The five subcommands. Each writes its artifacts under `cfg.out`, prefixed
//! with the config tag, and returns the process exit code.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use proxsvrg::data::{write_libsvm, write_trace, TraceFormat};
use proxsvrg::theory::{
    check_cone_condition, contraction_convex, contraction_nonconvex, empirical_rsc_check, epochs_needed,
    lambda_lower_bound, modified_rsc, statistical_tolerance_convex, statistical_tolerance_nonconvex, BoundParams,
    ConeReport, RscParams, RscReport,
};
use proxsvrg::{smoothness_bound, subspace_compatibility, GroupMap, Problem64, ProblemSummary, Regularizer, SubspaceModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ProblemKind, SolverName, TraceFormatName};
use crate::error::{BenchError, Result};
use crate::fit::{fit_decay, DecayFit};
use crate::runner::{
    compute_reference, rebase_gaps, run_parallel, run_solver, smooth_gradient, solver_config,
    RunStatus, SolverRun,
};
use crate::setup::{build_instance, generate, Instance};

/// Result of a subcommand.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

fn artifact(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.out.join(format!("{}_{name}", cfg.tag()))
}

fn prepare_out(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| BenchError::validation(format!("output directory {} is not writable: {e}", cfg.out.display())))
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| BenchError::runtime(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn trace_file(cfg: &ExperimentConfig, stem: &str) -> (PathBuf, TraceFormat) {
    match cfg.trace_format {
        TraceFormatName::Csv => (artifact(cfg, &format!("{stem}.csv")), TraceFormat::Csv),
        TraceFormatName::Json => (artifact(cfg, &format!("{stem}.json")), TraceFormat::Json),
    }
}

fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

fn hash_values(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Serialize)]
pub struct Constants {
    /// Largest component smoothness constant `L`.
    pub smoothness: f64,
    pub mu: f64,
    pub convex: bool,
    pub lambda_defaulted: bool,
    pub rho_defaulted: bool,
    pub normalized: bool,
    pub rescaled_columns: usize,
}

impl Constants {
    fn of(cfg: &ExperimentConfig, inst: &Instance) -> Self {
        let p = &inst.problem;
        Self {
            smoothness: smoothness_bound(p.loss(), p.dataset()).max,
            mu: p.mu(),
            convex: p.is_convex(),
            lambda_defaulted: inst.lambda_defaulted,
            rho_defaulted: inst.rho_defaulted,
            normalized: cfg.normalize,
            rescaled_columns: inst.rescaled_columns,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    pub objective: f64,
    pub beta: f64,
    pub min_passes: usize,
    /// Value the gaps are measured against.
    pub gap_base: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunEntry {
    pub solver: SolverName,
    pub beta: f64,
    /// Inner loop length (SVRG only).
    pub m: Option<usize>,
    /// Outer iterations for SVRG, passes for the others.
    pub epochs: usize,
    #[serde(flatten)]
    pub status: RunStatus,
    pub passes: Option<f64>,
    pub final_objective: Option<f64>,
    pub final_gap: Option<f64>,
    pub step_above_bound: Option<bool>,
    pub trace: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub problem: ProblemSummary,
    pub constants: Constants,
    pub reference: Option<ReferenceInfo>,
    pub runs: Vec<RunEntry>,
    pub notes: Vec<String>,
}

impl Manifest {
    fn new(command: &'static str, cfg: &ExperimentConfig, inst: &Instance) -> Self {
        Self {
            command,
            config_hash: cfg.hash(),
            config: cfg.canonical(),
            problem: ProblemSummary::from(&inst.problem),
            constants: Constants::of(cfg, inst),
            reference: None,
            runs: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// Writes the run's trace (if any) under `stem` and describes it.
fn record_run(cfg: &ExperimentConfig, problem: &Problem64, run: &SolverRun, stem: &str) -> Result<RunEntry> {
    let oc = solver_config(cfg, problem, run.solver, run.beta);
    let mut file = None;
    if let Some(t) = &run.trace {
        let (path, format) = trace_file(cfg, stem);
        write_trace(t, &path, format)?;
        file = path.file_name().map(|f| f.to_string_lossy().into_owned());
    }
    Ok(RunEntry {
        solver: run.solver,
        beta: run.beta,
        m: (run.solver == SolverName::Svrg).then_some(oc.m),
        epochs: oc.epochs,
        status: run.status.clone(),
        passes: run.trace.as_ref().and_then(|t| t.records.last()).map(|r| r.passes),
        final_objective: run.final_objective(),
        final_gap: run.final_gap(),
        step_above_bound: run.trace.as_ref().map(|t| t.step_above_bound),
        trace: file,
    })
}

/// Ground-truth sidecar written next to generated data.
#[derive(Debug, Clone, Serialize)]
pub struct TruthSidecar {
    pub config_hash: String,
    pub spec: proxsvrg::data::SynthSpec,
    pub theta: Vec<f64>,
    pub support: SubspaceModel,
    pub groups: Option<GroupMap>,
    /// SHA-256 of the clean design's values (row-major, little-endian f64).
    pub hidden_x_sha256: Option<String>,
}

/// Writes a synthetic dataset in LIBSVM format with its ground-truth sidecar.
/// The data is written as generated, before any normalization.
pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let spec = cfg.synth_spec()?;
    prepare_out(cfg)?;
    let syn = generate(cfg.problem, &spec)?;
    let data_path = artifact(cfg, "data.libsvm");
    let truth_path = artifact(cfg, "truth.json");
    write_libsvm(&syn.data, &data_path)?;
    let sidecar = TruthSidecar {
        config_hash: cfg.hash(),
        spec,
        theta: syn.truth.theta,
        support: syn.truth.support,
        groups: syn.group_map,
        hidden_x_sha256: syn.hidden.map(|x| hash_values(&x.to_dense_values())),
    };
    write_json(&truth_path, &sidecar)?;
    Ok(Outcome {
        code: 0,
        summary: vec![format!(
            "generated n={} p={} -> {}",
            syn.data.n(),
            syn.data.p(),
            data_path.display()
        )],
        artifacts: vec![data_path, truth_path],
    })
}

/// One grid point.
#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub solver: SolverName,
    pub k: u32,
    pub beta: f64,
    #[serde(flatten)]
    pub status: RunStatus,
    pub final_objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub points: Vec<GridPoint>,
    /// Winning run per solver; absent when every rate diverged.
    pub winners: BTreeMap<SolverName, SolverRun>,
}

/// The step size grid `2 / 2^k`, `k = 0..=12`.
pub fn grid_rates() -> [f64; 13] {
    std::array::from_fn(|k| 2.0 / f64::powi(2.0, k as i32))
}

/// Index of the best completed point: the smallest final objective, ties
/// (within `1e-12` relative) going to the larger step.
pub fn pick_winner(points: &[(f64, Option<f64>)]) -> Option<usize> {
    let best = points
        .iter()
        .filter_map(|p| p.1)
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let tol = 1e-12 * best.abs().max(f64::MIN_POSITIVE);
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.1.is_some_and(|v| v <= best + tol))
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, _)| i)
}

/// Runs every constant-rate solver of the config over [`grid_rates`] with
/// the config's pass budget and keeps the winning run of each.
pub fn grid_search(cfg: &ExperimentConfig, problem: &Problem64) -> Result<GridResult> {
    let solvers: Vec<SolverName> = cfg.solvers.iter().copied().filter(|s| s.constant_rate()).collect();
    if solvers.is_empty() {
        return Err(BenchError::validation(
            "grid search needs a constant-rate solver (svrg, sag or composite_gradient)",
        ));
    }
    let jobs: Vec<(SolverName, u32, f64)> = solvers
        .iter()
        .flat_map(|&s| grid_rates().into_iter().enumerate().map(move |(k, b)| (s, k as u32, b)))
        .collect();
    let runs = run_parallel(cfg.workers, &jobs, |&(s, _, b)| run_solver(cfg, problem, s, b, None))?;
    let points: Vec<GridPoint> = jobs
        .iter()
        .zip(&runs)
        .map(|(&(solver, k, beta), r)| GridPoint {
            solver,
            k,
            beta,
            status: r.status.clone(),
            final_objective: r.final_objective(),
        })
        .collect();
    let mut winners = BTreeMap::new();
    for &s in &solvers {
        let idx: Vec<usize> = (0..jobs.len()).filter(|&i| jobs[i].0 == s).collect();
        let cand: Vec<(f64, Option<f64>)> = idx.iter().map(|&i| (jobs[i].2, runs[i].final_objective())).collect();
        if let Some(w) = pick_winner(&cand) {
            winners.insert(s, runs[idx[w]].clone());
        }
    }
    Ok(GridResult { points, winners })
}

fn grid_report(result: &GridResult) -> String {
    let mut s = String::from("solver,k,beta,status,final_objective\n");
    for p in &result.points {
        writeln!(
            s,
            "{},{},{:.16e},{},{}",
            p.solver,
            p.k,
            p.beta,
            p.status.label(),
            num(p.final_objective)
        )
        .unwrap();
    }
    s
}

/// Grid search over the 13 step sizes. Writes the grid report, the winning
/// trace of each solver (objective only), and a manifest. Exit 1 when some
/// solver diverged at every rate.
pub fn cmd_grid(cfg: &ExperimentConfig) -> Result<Outcome> {
    let inst = build_instance(cfg)?;
    prepare_out(cfg)?;
    let result = grid_search(cfg, &inst.problem)?;
    let report = artifact(cfg, "grid.csv");
    fs::write(&report, grid_report(&result))?;
    let mut artifacts = vec![report];
    let mut manifest = Manifest::new("grid", cfg, &inst);
    let mut summary = Vec::new();
    let mut code = 0;
    for s in cfg.solvers.iter().filter(|s| s.constant_rate()) {
        match result.winners.get(s) {
            Some(run) => {
                let entry = record_run(cfg, &inst.problem, run, &format!("{s}_best"))?;
                summary.push(format!(
                    "{s}: beta = {:e}, final objective {}",
                    run.beta,
                    num(run.final_objective())
                ));
                if let Some(f) = &entry.trace {
                    artifacts.push(cfg.out.join(f));
                }
                manifest.runs.push(entry);
            }
            None => {
                code = 1;
                summary.push(format!("{s}: every grid point diverged"));
                manifest.notes.push(format!("{s}: every grid point diverged"));
            }
        }
    }
    let path = artifact(cfg, "manifest.json");
    write_json(&path, &manifest)?;
    artifacts.push(path);
    Ok(Outcome {
        code,
        artifacts,
        summary,
    })
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub instance: Instance,
    pub reference: crate::runner::Reference,
    /// One run per configured solver, in config order.
    pub runs: Vec<SolverRun>,
    pub gap_base: f64,
    pub notes: Vec<String>,
}

/// Computes the reference, runs every configured solver against it (after
/// grid-tuning the constant-rate solvers when `grid` is on) and rebases the
/// gaps so none is negative.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let inst = build_instance(cfg)?;
    let mut cfg = cfg.clone();
    let mut notes = Vec::new();
    let mut tuned = BTreeMap::new();
    if cfg.grid {
        let g = grid_search(&cfg, &inst.problem)?;
        for (s, run) in g.winners {
            notes.push(format!("{s}: grid-selected beta = {:e}", run.beta));
            cfg.betas.insert(s, run.beta);
            tuned.insert(s, run);
        }
    }
    let reference = compute_reference(&cfg, &inst.problem)?;
    let solvers = cfg.solvers.clone();
    let mut runs = run_parallel(cfg.workers, &solvers, |&s| match tuned.get(&s) {
        Some(run) => Ok(run.clone()),
        None => run_solver(&cfg, &inst.problem, s, cfg.beta_for(s), Some(reference.objective)),
    })?;
    let gap_base = match rebase_gaps(&mut runs, reference.objective) {
        Some(base) => {
            notes.push(format!(
                "an iterate reached objective {base:.16e} below the reference {:.16e}; gaps use the lower value",
                reference.objective
            ));
            base
        }
        None => reference.objective,
    };
    Ok(Experiment {
        instance: inst,
        reference,
        runs,
        gap_base,
        notes,
    })
}

/// Runs every configured solver and writes one trace per completed solver
/// plus the manifest. Exit 1 when any solver diverged.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    prepare_out(cfg)?;
    let exp = run_experiment(cfg)?;
    let mut manifest = Manifest::new("run", cfg, &exp.instance);
    manifest.reference = Some(ReferenceInfo {
        objective: exp.reference.objective,
        beta: exp.reference.beta,
        min_passes: exp.reference.passes,
        gap_base: exp.gap_base,
    });
    manifest.notes = exp.notes;
    let mut artifacts = Vec::new();
    let mut summary = Vec::new();
    let mut code = 0;
    for run in &exp.runs {
        let entry = record_run(cfg, &exp.instance.problem, run, run.solver.as_str())?;
        if let Some(f) = &entry.trace {
            artifacts.push(cfg.out.join(f));
        }
        if !run.status.is_completed() {
            code = 1;
        }
        summary.push(format!(
            "{}: {} (beta {:e}), final gap {}",
            run.solver,
            run.status.label(),
            run.beta,
            num(run.final_gap())
        ));
        manifest.runs.push(entry);
    }
    let path = artifact(cfg, "manifest.json");
    write_json(&path, &manifest)?;
    artifacts.push(path);
    Ok(Outcome {
        code,
        artifacts,
        summary,
    })
}

/// Theory constants and checks of a synthetic instance.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnosis {
    pub config_hash: String,
    pub smoothness: f64,
    pub mu: f64,
    pub sigma: f64,
    pub tau_sigma: f64,
    pub compatibility: f64,
    pub sigma_bar: f64,
    pub beta: f64,
    pub m: usize,
    pub alpha: Option<f64>,
    pub q: Option<f64>,
    pub chi: Option<f64>,
    pub e_sq: Option<f64>,
    pub estimation_error: f64,
    pub lambda: f64,
    pub lambda_min: Option<f64>,
    pub initial_gap: f64,
    pub kappa_sq: Option<f64>,
    pub epochs_needed: Option<u64>,
    pub cone: Option<ConeReport>,
    pub rsc: RscReport,
    pub no_certificate: bool,
    pub findings: Vec<String>,
}

/// Evaluates the convergence constants, the regularization bound, the cone
/// condition at the reference solution and an empirical RSC check.
pub fn diagnose(cfg: &ExperimentConfig) -> Result<Diagnosis> {
    let inst = build_instance(cfg)?;
    let truth = inst
        .truth
        .as_ref()
        .ok_or_else(|| BenchError::validation("diagnose needs a synthetic problem with ground truth"))?;
    let cov = inst.covariance.expect("synthetic");
    let problem = &inst.problem;
    let data = problem.dataset();
    let (n, p) = (data.n(), data.p());
    let mut findings = Vec::new();

    let l = smoothness_bound(problem.loss(), data).max;
    let mu = problem.mu();
    let rsc = RscParams::gaussian(&cov, n, cfg.c1)?;
    let h = subspace_compatibility(&truth.support);
    let sb = modified_rsc(rsc.sigma, rsc.tau_sigma, h, mu);
    if !sb.certified {
        findings.push(format!("sigma_bar = {:e} <= 0: no linear-rate certificate", sb.value));
    }
    let beta = cfg.diag_beta.unwrap_or(1.0 / (16.0 * l));
    let m = cfg
        .diag_m
        .unwrap_or_else(|| if sb.certified { (128.0 * l / sb.value).ceil() as usize } else { 2 * n });

    let reference = compute_reference(cfg, problem)?;
    let err: f64 = reference
        .theta
        .iter()
        .zip(&truth.theta)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let (mut alpha, mut q, mut chi, mut e_sq) = (None, None, None, None);
    if problem.is_convex() {
        match contraction_convex(beta, sb.value, l, m) {
            Ok(c) => {
                alpha = Some(c.alpha);
                q = Some(c.q);
                // the planted parameter lies in the model subspace
                e_sq = Some(statistical_tolerance_convex(rsc.tau_sigma, c.q, h, err, 0.0)?);
            }
            Err(e) => findings.push(e.to_string()),
        }
    } else {
        match contraction_nonconvex(beta, mu, l, m, sb.value) {
            Ok(c) => {
                alpha = Some(c.alpha);
                chi = Some(c.chi);
                let r = truth.support.cardinality();
                e_sq = Some(statistical_tolerance_nonconvex(rsc.tau_sigma, c.chi, r, err));
            }
            Err(e) => findings.push(e.to_string()),
        }
    }
    if let Some(a) = alpha.filter(|&a| a >= 1.0) {
        findings.push(format!("alpha = {a} >= 1: no contraction"));
    }

    let lambda = problem.lambda();
    let lambda_min = match cfg.bound_model() {
        Some(model) => {
            let spec = inst.spec.as_ref().expect("synthetic");
            let params = BoundParams {
                p: Some(p),
                noise: Some(spec.noise),
                group_size: spec.group_size,
                num_groups: spec.num_groups,
                rho: Some(problem.rho()),
                tau: cfg.tau,
                c1: cfg.c1,
                noise_scale: Some(spec.noise_scale),
                v: Some(spec.noise),
                theta_norm: Some(truth.theta.iter().map(|t| t * t).sum::<f64>().sqrt()),
                sigma_max: Some(rsc.sigma_max),
                ..BoundParams::new(n)
            };
            match lambda_lower_bound(model, &params) {
                Ok(v) => Some(v),
                Err(e) => {
                    findings.push(format!("lambda bound unavailable: {e}"));
                    None
                }
            }
        }
        None => None,
    };
    if let Some(lm) = lambda_min.filter(|&lm| lambda < lm) {
        findings.push(format!("lambda = {lambda:e} is below the bound {lm:e}"));
    }

    let initial_gap = problem.objective_value(&vec![0.0; p])? - reference.objective;
    let kappa_sq = cfg.kappa_sq.or(e_sq).filter(|&k| k > 0.0);
    let epochs = match (kappa_sq, alpha) {
        (Some(k), Some(a)) => match epochs_needed(initial_gap.max(0.0), k, a) {
            Ok(e) => Some(e),
            Err(e) => {
                findings.push(e.to_string());
                None
            }
        },
        _ => None,
    };

    let cone = match problem.regularizer() {
        Regularizer::L1 | Regularizer::Group(_) => {
            let grad = smooth_gradient(problem, &truth.theta)?;
            let rep = check_cone_condition(
                &reference.theta,
                &truth.theta,
                &truth.support,
                problem.regularizer(),
                lambda,
                &grad,
            )?;
            if !rep.pass {
                findings.push(format!("cone condition fails (slack {:e})", rep.slack));
            }
            if !rep.lambda_condition {
                findings.push("lambda < 2 dual_norm(grad F(theta*))".to_string());
            }
            Some(rep)
        }
        _ => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rsc_report = empirical_rsc_check(data, &cov, cfg.rsc_trials, cfg.c1, &mut rng)?;
    if rsc_report.violations > 0 {
        findings.push(format!(
            "empirical RSC violated in {} of {} trials at c1 = {}",
            rsc_report.violations, rsc_report.trials, cfg.c1
        ));
    }

    Ok(Diagnosis {
        config_hash: cfg.hash(),
        smoothness: l,
        mu,
        sigma: rsc.sigma,
        tau_sigma: rsc.tau_sigma,
        compatibility: h,
        sigma_bar: sb.value,
        beta,
        m,
        alpha,
        q,
        chi,
        e_sq,
        estimation_error: err,
        lambda,
        lambda_min,
        initial_gap,
        kappa_sq,
        epochs_needed: epochs,
        cone,
        rsc: rsc_report,
        no_certificate: !sb.certified || alpha.is_none_or(|a| a >= 1.0),
        findings,
    })
}

/// Writes the diagnosis report. Findings never change the exit code.
pub fn cmd_diagnose(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    if cfg.problem == ProblemKind::File {
        return Err(BenchError::validation("diagnose needs a synthetic problem with ground truth"));
    }
    prepare_out(cfg)?;
    let d = diagnose(cfg)?;
    let path = artifact(cfg, "diagnose.json");
    write_json(&path, &d)?;
    let mut summary = vec![
        format!("sigma_bar = {:e}, alpha = {}, no_certificate = {}", d.sigma_bar, num(d.alpha), d.no_certificate),
        format!("lambda = {:e}, lambda_min = {}", d.lambda, num(d.lambda_min)),
    ];
    summary.extend(d.findings.iter().cloned());
    Ok(Outcome {
        code: 0,
        artifacts: vec![path],
        summary,
    })
}

/// One row of the phase table.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseRow {
    pub r: usize,
    pub fit: Option<DecayFit>,
    pub linear: bool,
    pub final_gap: Option<f64>,
    #[serde(flatten)]
    pub status: RunStatus,
}

#[derive(Debug, Clone)]
pub struct PhaseResult {
    /// Rows in the requested order.
    pub rows: Vec<PhaseRow>,
    /// Largest linear and smallest non-linear sparsity when the flags switch
    /// exactly once along increasing `r`.
    pub transition: Option<(usize, usize)>,
    pub traces: Vec<Option<proxsvrg::Trace64>>,
}

/// Classifies a gap trace. Without enough points above the floor inside the
/// window the run counts as linear when it reached the floor.
pub fn classify(cfg: &ExperimentConfig, run: &SolverRun) -> (Option<DecayFit>, bool) {
    let Some(trace) = &run.trace else {
        return (None, false);
    };
    match fit_decay(&trace.records, cfg.fit_start, cfg.fit_end, cfg.gap_floor) {
        Some(f) => (Some(f), f.factor < cfg.linear_threshold),
        None => (None, trace.final_gap().is_some_and(|g| g < cfg.gap_floor)),
    }
}

/// Bracket of the switch from linear to non-linear over increasing `r`.
pub fn transition_bracket(rows: &[PhaseRow]) -> Option<(usize, usize)> {
    let mut sorted: Vec<&PhaseRow> = rows.iter().filter(|r| r.status.is_completed()).collect();
    sorted.sort_by_key(|r| r.r);
    let switches: Vec<usize> = (1..sorted.len()).filter(|&i| sorted[i - 1].linear != sorted[i].linear).collect();
    match switches[..] {
        [i] if sorted[i - 1].linear => Some((sorted[i - 1].r, sorted[i].r)),
        _ => None,
    }
}

/// Runs SVRG at every sparsity level of `phase_r` (each with its own
/// reference) and fits the decay factor of each gap trace.
pub fn phase_study(cfg: &ExperimentConfig) -> Result<PhaseResult> {
    if cfg.phase_r.is_empty() {
        return Err(BenchError::validation("phase needs a non-empty phase_r list"));
    }
    if cfg.problem == ProblemKind::File {
        return Err(BenchError::validation("phase needs a synthetic problem"));
    }
    let configs: Vec<ExperimentConfig> = cfg
        .phase_r
        .iter()
        .map(|&r| ExperimentConfig {
            r,
            solvers: vec![SolverName::Svrg],
            grid: false,
            workers: 1,
            ..cfg.clone()
        })
        .collect();
    for c in &configs {
        c.synth_spec()?;
    }
    let results = run_parallel(cfg.workers, &configs, |c| match run_experiment(c) {
        Ok(mut exp) => Ok(exp.runs.remove(0)),
        Err(BenchError::Runtime(message)) => Ok(SolverRun {
            solver: SolverName::Svrg,
            beta: c.beta_for(SolverName::Svrg),
            status: RunStatus::Failed { message },
            trace: None,
        }),
        Err(e) => Err(e),
    })?;
    let rows: Vec<PhaseRow> = configs
        .iter()
        .zip(&results)
        .map(|(c, run)| {
            let (fit, linear) = classify(cfg, run);
            PhaseRow {
                r: c.r,
                fit,
                linear,
                final_gap: run.final_gap(),
                status: run.status.clone(),
            }
        })
        .collect();
    Ok(PhaseResult {
        transition: transition_bracket(&rows),
        traces: results.into_iter().map(|r| r.trace).collect(),
        rows,
    })
}

/// Phase table `r, decay, linear, final_gap, status` plus one trace per `r`.
/// Exit 1 when some level failed.
pub fn cmd_phase(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    prepare_out(cfg)?;
    let result = phase_study(cfg)?;
    let mut table = String::from("r,decay,linear,final_gap,status\n");
    let mut artifacts = Vec::new();
    let mut code = 0;
    for (row, trace) in result.rows.iter().zip(&result.traces) {
        writeln!(
            table,
            "{},{},{},{},{}",
            row.r,
            num(row.fit.map(|f| f.factor)),
            row.linear,
            num(row.final_gap),
            row.status.label()
        )
        .unwrap();
        if let Some(t) = trace {
            let (path, format) = trace_file(cfg, &format!("phase_r{}", row.r));
            write_trace(t, &path, format)?;
            artifacts.push(path);
        }
        if !row.status.is_completed() {
            code = 1;
        }
    }
    let path = artifact(cfg, "phase.csv");
    fs::write(&path, table)?;
    artifacts.push(path);
    let mut summary: Vec<String> = result
        .rows
        .iter()
        .map(|r| {
            format!(
                "r = {}: decay {}, {}",
                r.r,
                num(r.fit.map(|f| f.factor)),
                if r.linear { "linear" } else { "non-linear" }
            )
        })
        .collect();
    summary.push(match result.transition {
        Some((a, b)) => format!("transition between r = {a} and r = {b}"),
        None => "no single linear to non-linear transition".to_string(),
    });
    Ok(Outcome {
        code,
        artifacts,
        summary,
    })
}
