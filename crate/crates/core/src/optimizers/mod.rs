//! Proximal SVRG (convex and non-convex) and the baseline solvers, all
//! emitting per-epoch traces on the same axes.

mod baselines;
mod svrg;

pub use baselines::{run_composite_gradient, run_prox_sag, run_prox_sgd, run_rda};
pub use svrg::{reduced_variance_gradient, reference_solution, REFERENCE_PATIENCE, run_nonconvex_prox_svrg, run_prox_svrg};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses;
use crate::problem::CompositeProblem;
use crate::regularizers::constrained_prox;
use crate::scalar::Scalar;

/// Which inner iterate becomes the next outer iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterIterate {
    /// Mean of the `m` inner iterates.
    Average,
    /// One inner iterate picked uniformly at random.
    Random,
    /// The last inner iterate.
    Last,
}

/// Step size schedule of the stochastic gradient baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `beta_t = beta / (1 + t/n)`
    Decaying,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig<T> {
    /// Inner loop length.
    pub m: usize,
    /// Step size.
    pub beta: T,
    /// Outer iterations for SVRG, passes for the baselines.
    pub epochs: usize,
    pub seed: u64,
    /// Record every this many epochs (the final epoch is always recorded).
    pub eval_every: usize,
    /// Outer iterate rule; `None` picks the algorithm's default.
    pub outer: Option<OuterIterate>,
    pub schedule: StepSchedule,
    /// Proximal strengthening of dual averaging.
    pub rda_gamma: T,
    /// Stop once the objective changes by less than this between records...
    pub tol: Option<T>,
    /// ...on this many consecutive records.
    pub patience: usize,
    /// Record wall-clock time; when off every record carries 0.
    pub timing: bool,
    /// Abort once the objective exceeds this multiple of the initial value.
    pub divergence_factor: T,
    pub theta0: Option<Vec<T>>,
}

impl<T: Scalar> OptimizerConfig<T> {
    pub fn new(m: usize, beta: T, epochs: usize, seed: u64) -> Self {
        Self {
            m,
            beta,
            epochs,
            seed,
            eval_every: 1,
            outer: None,
            schedule: StepSchedule::Decaying,
            rda_gamma: T::one(),
            tol: None,
            patience: 1,
            timing: true,
            divergence_factor: T::lit(1e3),
            theta0: None,
        }
    }

    /// `m = 2n`.
    pub fn for_samples(n: usize, beta: T, epochs: usize, seed: u64) -> Self {
        Self::new(2 * n, beta, epochs, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Configuration("m must be >= 1".into()));
        }
        if !(self.beta > T::zero()) || !self.beta.is_finite() {
            return Err(Error::Configuration(format!("beta must be finite and > 0, got {}", self.beta)));
        }
        if self.epochs == 0 {
            return Err(Error::Configuration("epochs must be >= 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Configuration("eval_every must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Configuration("patience must be >= 1".into()));
        }
        if !(self.rda_gamma > T::zero()) {
            return Err(Error::Configuration("rda_gamma must be > 0".into()));
        }
        if !(self.divergence_factor > T::one()) {
            return Err(Error::Configuration("divergence_factor must be > 1".into()));
        }
        Ok(())
    }
}

/// One row of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: usize,
    pub passes: f64,
    pub objective: f64,
    pub gap: Option<f64>,
    pub grad_evals: u64,
    pub wallclock_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace<T> {
    pub solver: String,
    pub records: Vec<TraceRecord>,
    pub theta: Vec<T>,
    /// The step size was above the solver's `1/L` launch bound.
    pub step_above_bound: bool,
}

impl<T: Scalar> RunTrace<T> {
    pub fn final_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective)
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.gap)
    }

    /// Recomputes the gaps against a new reference value.
    pub fn rebase(&mut self, reference: f64) {
        for r in &mut self.records {
            r.gap = Some(r.objective - reference);
        }
    }
}

/// Bookkeeping shared by every solver: records, evaluation counts, the
/// divergence guard and the stopping rule.
pub(crate) struct Recorder<'a, T: Scalar> {
    problem: &'a CompositeProblem<T>,
    reference: Option<T>,
    timing: bool,
    start: Instant,
    limit: T,
    tol: Option<T>,
    patience: usize,
    calm: usize,
    pub evals: u64,
    records: Vec<TraceRecord>,
    last_objective: T,
}

impl<'a, T: Scalar> Recorder<'a, T> {
    /// Records epoch 0 at `theta0`.
    pub fn start(
        problem: &'a CompositeProblem<T>,
        config: &OptimizerConfig<T>,
        reference: Option<T>,
        theta0: &[T],
    ) -> Result<Self> {
        let g0 = problem.objective_value(theta0)?;
        let limit = if g0 > T::zero() {
            g0 * config.divergence_factor
        } else {
            T::infinity()
        };
        let mut rec = Self {
            problem,
            reference,
            timing: config.timing,
            start: Instant::now(),
            limit,
            tol: config.tol,
            patience: config.patience,
            calm: 0,
            evals: 0,
            records: Vec::new(),
            last_objective: g0,
        };
        rec.push(0, g0);
        Ok(rec)
    }

    fn push(&mut self, epoch: usize, g: T) {
        let n = self.problem.dataset().n() as f64;
        self.records.push(TraceRecord {
            epoch,
            passes: self.evals as f64 / n,
            objective: g.to_f64_lossy(),
            gap: self.reference.map(|r| (g - r).to_f64_lossy()),
            grad_evals: self.evals,
            wallclock_ms: if self.timing {
                self.start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
    }

    /// Evaluates and records `theta`. Returns `true` once the stopping rule
    /// fires.
    pub fn record(&mut self, epoch: usize, theta: &[T]) -> Result<bool> {
        let g = self.problem.objective_value(theta).map_err(|_| Error::Diverged {
            epoch,
            objective: f64::INFINITY,
        })?;
        if g > self.limit {
            return Err(Error::Diverged {
                epoch,
                objective: g.to_f64_lossy(),
            });
        }
        let change = (g - self.last_objective).abs();
        self.last_objective = g;
        self.push(epoch, g);
        match self.tol {
            Some(t) if change < t => self.calm += 1,
            _ => self.calm = 0,
        }
        Ok(self.tol.is_some() && self.calm >= self.patience)
    }

    pub fn finish(self, solver: &str, theta: Vec<T>, step_above_bound: bool) -> RunTrace<T> {
        RunTrace {
            solver: solver.to_string(),
            records: self.records,
            theta,
            step_above_bound,
        }
    }
}

/// Maps numerical failures inside an epoch to a divergence abort.
pub(crate) fn diverged_at(epoch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite(_) | Error::RootFinding { .. } => Error::Diverged {
            epoch,
            objective: f64::NAN,
        },
        other => other,
    }
}

/// Starting point: `config.theta0` (or 0), projected onto the constraint set
/// when infeasible.
pub(crate) fn initial_point<T: Scalar>(problem: &CompositeProblem<T>, config: &OptimizerConfig<T>) -> Result<Vec<T>> {
    let p = problem.dataset().p();
    let theta = match &config.theta0 {
        Some(t) => {
            problem.dataset().check_dim(t)?;
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("theta0"));
            }
            t.clone()
        }
        None => return Ok(vec![T::zero(); p]),
    };
    if problem.feasibility_check(&theta)? {
        return Ok(theta);
    }
    // a vanishing step turns the prox into the projection
    constrained_prox(
        problem.regularizer(),
        problem.lambda(),
        T::min_positive_value(),
        problem.rho(),
        &theta,
    )
}

/// Uniform smoothness constant `L`; rejects all-zero data.
pub(crate) fn checked_smoothness<T: Scalar>(problem: &CompositeProblem<T>) -> Result<T> {
    let l = losses::smoothness_bound(problem.loss(), problem.dataset()).max;
    if !(l > T::zero()) {
        return Err(Error::Configuration(
            "smoothness constant is 0 (all-zero design); no step size can be selected".into(),
        ));
    }
    Ok(l)
}

/// `L_mu = max(mu, L - mu)`.
pub fn shifted_smoothness<T: Scalar>(l: T, mu: T) -> T {
    mu.max(l - mu)
}
