//! Solver dispatch, the reference run, and concurrent execution of
//! independent runs.

use proxsvrg::optimizers::{
    reference_solution, run_composite_gradient, run_nonconvex_prox_svrg, run_prox_sag, run_prox_sgd,
    run_prox_svrg, run_rda,
};
use proxsvrg::{losses, Config64, Error, Problem64, Trace64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SolverName};
use crate::error::{BenchError, Result};

/// How a single run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged { epoch: usize, objective: f64 },
    Failed { message: String },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Diverged { .. } => "diverged",
            RunStatus::Failed { .. } => "failed",
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub solver: SolverName,
    pub beta: f64,
    pub status: RunStatus,
    pub trace: Option<Trace64>,
}

impl SolverRun {
    pub fn final_objective(&self) -> Option<f64> {
        self.trace.as_ref().and_then(|t| t.final_objective())
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.trace.as_ref().and_then(|t| t.final_gap())
    }
}

/// Inner loop length: `m` from the config, else `2n`.
pub fn inner_length(cfg: &ExperimentConfig, problem: &Problem64) -> usize {
    cfg.m.unwrap_or(2 * problem.dataset().n())
}

/// Outer SVRG iterations fitting in `passes` effective passes; each costs
/// `n + 2m` component gradients.
pub fn svrg_epochs(passes: usize, n: usize, m: usize) -> usize {
    (passes * n).div_ceil(n + 2 * m).max(1)
}

/// Optimizer settings of `solver` at step `beta` under the config's pass
/// budget.
pub fn solver_config(cfg: &ExperimentConfig, problem: &Problem64, solver: SolverName, beta: f64) -> Config64 {
    let n = problem.dataset().n();
    let m = inner_length(cfg, problem);
    let epochs = match solver {
        SolverName::Svrg => svrg_epochs(cfg.epochs, n, m),
        _ => cfg.epochs,
    };
    let mut oc = Config64::new(m, beta, epochs, cfg.seed);
    oc.eval_every = cfg.eval_every;
    oc.schedule = cfg.sgd_schedule;
    oc.rda_gamma = cfg.rda_gamma;
    oc.timing = cfg.timing;
    oc.divergence_factor = cfg.divergence_factor;
    oc
}

/// Runs one solver. SVRG switches to the non-convex variant when `mu > 0`.
pub fn dispatch(problem: &Problem64, solver: SolverName, oc: &Config64, reference: Option<f64>) -> proxsvrg::Result<Trace64> {
    match solver {
        SolverName::Svrg if problem.is_convex() => run_prox_svrg(problem, oc, reference),
        SolverName::Svrg => run_nonconvex_prox_svrg(problem, oc, reference),
        SolverName::Sag => run_prox_sag(problem, oc, reference),
        SolverName::CompositeGradient => run_composite_gradient(problem, oc, reference),
        SolverName::Sgd => run_prox_sgd(problem, oc, reference),
        SolverName::Rda => run_rda(problem, oc, reference),
    }
}

/// Runs `solver` at `beta`, turning divergence and numerical failures into a
/// status instead of an error. Configuration errors still propagate.
pub fn run_solver(
    cfg: &ExperimentConfig,
    problem: &Problem64,
    solver: SolverName,
    beta: f64,
    reference: Option<f64>,
) -> Result<SolverRun> {
    let oc = solver_config(cfg, problem, solver, beta);
    let (status, trace) = match dispatch(problem, solver, &oc, reference) {
        Ok(t) => (RunStatus::Completed, Some(t)),
        Err(Error::Diverged { epoch, objective }) => (RunStatus::Diverged { epoch, objective }, None),
        Err(e @ (Error::NonFinite(_) | Error::RootFinding { .. })) => (
            RunStatus::Failed {
                message: e.to_string(),
            },
            None,
        ),
        Err(e) => return Err(e.into()),
    };
    log::info!("{solver} beta={beta:e}: {}", status.label());
    Ok(SolverRun {
        solver,
        beta,
        status,
        trace,
    })
}

/// Runs independent jobs on a pool of `workers` threads. Results keep the
/// order of `jobs`.
pub fn run_parallel<J, R, F>(workers: usize, jobs: &[J], f: F) -> Result<Vec<R>>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> Result<R> + Sync + Send,
{
    if workers <= 1 {
        return jobs.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::runtime(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(&f).collect())
}

/// Optimum estimate used for gaps.
#[derive(Debug, Clone)]
pub struct Reference {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub beta: f64,
    pub passes: usize,
}

/// Long SVRG run at `reference_beta` (default: the SVRG step size) with at
/// least `reference_passes` effective passes.
pub fn compute_reference(cfg: &ExperimentConfig, problem: &Problem64) -> Result<Reference> {
    let beta = cfg.reference_beta.unwrap_or(cfg.beta_for(SolverName::Svrg));
    let n = problem.dataset().n();
    let m = inner_length(cfg, problem);
    let mut oc = Config64::new(m, beta, svrg_epochs(cfg.reference_passes, n, m), cfg.seed);
    oc.divergence_factor = cfg.divergence_factor;
    let theta = reference_solution(problem, &oc).map_err(|e| match e {
        Error::Diverged { epoch, objective } => BenchError::runtime(format!(
            "reference run diverged at epoch {epoch} (objective {objective:e}); lower reference_beta"
        )),
        other => other.into(),
    })?;
    let objective = problem.objective_value(&theta)?;
    Ok(Reference {
        theta,
        objective,
        beta,
        passes: cfg.reference_passes,
    })
}

/// Rebases every trace on `min(G(theta_hat), best objective seen)` so no
/// reported gap is negative. Returns the new base when it moved.
pub fn rebase_gaps(runs: &mut [SolverRun], reference: f64) -> Option<f64> {
    let best = runs
        .iter()
        .filter_map(|r| r.trace.as_ref())
        .flat_map(|t| t.records.iter().map(|r| r.objective))
        .fold(f64::INFINITY, f64::min);
    let base = reference.min(best);
    for t in runs.iter_mut().filter_map(|r| r.trace.as_mut()) {
        t.rebase(base);
    }
    (base < reference).then_some(base)
}

/// Gradient of the smooth part `F - (gamma_w/2)|theta|^2` at `theta`.
pub fn smooth_gradient(problem: &Problem64, theta: &[f64]) -> Result<Vec<f64>> {
    let mut g = losses::full_gradient(problem.loss(), problem.dataset(), theta)?;
    let shift = problem.loss().concavity();
    if shift > 0.0 {
        for (gj, t) in g.iter_mut().zip(theta) {
            *gj -= shift * t;
        }
    }
    Ok(g)
}
