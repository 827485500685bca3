use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    checked_smoothness, diverged_at, initial_point, shifted_smoothness, OptimizerConfig, OuterIterate, Recorder,
    RunTrace,
};
use crate::error::{Error, Result};
use crate::losses::{self, LossKind};
use crate::problem::{CompositeProblem, Dataset};
use crate::regularizers::constrained_prox_into;
use crate::scalar::Scalar;

/// Variance reduced gradient
/// `(grad f_i(theta) - mu theta) - (grad f_i(theta_tilde) - mu theta_tilde) + v_tilde`.
///
/// `v_tilde` must be `grad F(theta_tilde) - mu theta_tilde`.
pub fn reduced_variance_gradient<T: Scalar>(
    loss: &LossKind<T>,
    data: &Dataset<T>,
    i: usize,
    theta: &[T],
    theta_tilde: &[T],
    v_tilde: &[T],
    mu: T,
) -> Result<Vec<T>> {
    data.check_dim(theta_tilde)?;
    if v_tilde.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: v_tilde.len(),
        });
    }
    let g = losses::component_gradient(loss, data, i, theta)?;
    let gt = losses::component_gradient(loss, data, i, theta_tilde)?;
    Ok((0..data.p())
        .map(|j| (g[j] - mu * theta[j]) - (gt[j] - mu * theta_tilde[j]) + v_tilde[j])
        .collect())
}

/// Convex proximal SVRG. The outer iterate is the average of the inner
/// iterates unless `config.outer` says otherwise.
pub fn run_prox_svrg<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &OptimizerConfig<T>,
    reference: Option<T>,
) -> Result<RunTrace<T>> {
    if !problem.is_convex() {
        return Err(Error::Configuration(
            "convex proximal SVRG needs mu = 0; use the non-convex variant".into(),
        ));
    }
    let l = checked_smoothness(problem)?;
    let above = config.beta > T::one() / l;
    if above {
        log::warn!("prox-svrg: beta {} above 1/L = {}", config.beta, T::one() / l);
    }
    svrg(problem, config, reference, config.outer.unwrap_or(OuterIterate::Average), "svrg", above)
}

/// Non-convex proximal SVRG on the `mu`-shifted loss with the convexified
/// penalty. The outer iterate is a uniformly drawn inner iterate unless
/// `config.outer` says otherwise.
pub fn run_nonconvex_prox_svrg<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &OptimizerConfig<T>,
    reference: Option<T>,
) -> Result<RunTrace<T>> {
    let mu = problem.mu();
    if mu <= T::zero() {
        return Err(Error::Configuration(
            "non-convex proximal SVRG needs mu > 0; use the convex variant".into(),
        ));
    }
    let l = checked_smoothness(problem)?;
    let bound = T::one() / shifted_smoothness(l, mu);
    let above = config.beta > bound;
    if above {
        log::warn!("nonconvex prox-svrg: beta {} above 1/L_mu = {bound}", config.beta);
    }
    svrg(problem, config, reference, config.outer.unwrap_or(OuterIterate::Random), "nonconvex_svrg", above)
}

fn svrg<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &OptimizerConfig<T>,
    reference: Option<T>,
    outer: OuterIterate,
    name: &str,
    above: bool,
) -> Result<RunTrace<T>> {
    config.validate()?;
    let data = problem.dataset();
    let (n, p) = (data.n(), data.p());
    let (loss, reg) = (problem.loss(), problem.regularizer());
    let (lambda, rho, beta, mu) = (problem.lambda(), problem.rho(), config.beta, problem.mu());
    let y = data.responses();
    let m = config.m;
    let inv_m = T::one() / T::from_usize(m).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = initial_point(problem, config)?;
    let mut rec = Recorder::start(problem, config, reference, &theta)?;

    let mut snapshot = theta.clone();
    let mut v_tilde = vec![T::zero(); p];
    let mut d_tilde = vec![T::zero(); n];
    let mut z = vec![T::zero(); p];
    let mut next = vec![T::zero(); p];
    let mut acc = vec![T::zero(); p];

    for epoch in 1..=config.epochs {
        snapshot.copy_from_slice(&theta);
        losses::full_gradient_into(loss, data, &snapshot, &mut d_tilde, &mut v_tilde);
        for (v, &s) in v_tilde.iter_mut().zip(&snapshot) {
            *v = *v - mu * s;
        }
        rec.evals += n as u64;

        let pick = match outer {
            OuterIterate::Random => rng.random_range(1..=m),
            _ => m,
        };
        acc.iter_mut().for_each(|a| *a = T::zero());
        for k in 1..=m {
            let i = rng.random_range(0..n);
            let row = data.row(i);
            // grad f_i(theta_tilde) reuses the snapshot derivative
            let coef = loss.derivative(row.dot(&theta), y[i]) - d_tilde[i];
            for ((zj, &t), (&v, &s)) in z.iter_mut().zip(&theta).zip(v_tilde.iter().zip(&snapshot)) {
                *zj = t - beta * (v + mu * (s - t));
            }
            row.axpy(-beta * coef, &mut z);
            constrained_prox_into(reg, lambda, beta, rho, &z, &mut next).map_err(diverged_at(epoch))?;
            std::mem::swap(&mut theta, &mut next);
            rec.evals += 2;
            match outer {
                OuterIterate::Average => {
                    for (a, &t) in acc.iter_mut().zip(&theta) {
                        *a = *a + t;
                    }
                }
                OuterIterate::Random if k == pick => acc.copy_from_slice(&theta),
                _ => {}
            }
        }
        match outer {
            OuterIterate::Average => {
                for (t, &a) in theta.iter_mut().zip(&acc) {
                    *t = a * inv_m;
                }
            }
            OuterIterate::Random => theta.copy_from_slice(&acc),
            OuterIterate::Last => {}
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                objective: f64::NAN,
            });
        }
        if epoch % config.eval_every == 0 || epoch == config.epochs {
            if rec.record(epoch, &theta)? {
                break;
            }
        }
    }
    Ok(rec.finish(name, theta, above))
}

/// Consecutive quiet epochs required before [`reference_solution`] stops.
pub const REFERENCE_PATIENCE: usize = 10;

/// Long SVRG run used as the optimum `theta_hat` for gap computations: at
/// least 500 effective passes unless the objective stops changing (below
/// `1e-12` between epochs, [`REFERENCE_PATIENCE`] times in a row) first.
/// `config.tol` overrides the threshold; `config.epochs` is raised to reach
/// the pass budget.
pub fn reference_solution<T: Scalar>(problem: &CompositeProblem<T>, config: &OptimizerConfig<T>) -> Result<Vec<T>> {
    let n = problem.dataset().n();
    let per_epoch = n + 2 * config.m;
    let epochs = (500 * n).div_ceil(per_epoch).max(config.epochs);
    let mut cfg = config.clone();
    cfg.epochs = epochs;
    cfg.eval_every = 1;
    cfg.tol = Some(config.tol.unwrap_or(T::lit(1e-12)));
    cfg.patience = REFERENCE_PATIENCE;
    cfg.timing = false;
    let trace = if problem.is_convex() {
        run_prox_svrg(problem, &cfg, None)?
    } else {
        run_nonconvex_prox_svrg(problem, &cfg, None)?
    };
    Ok(trace.theta)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::regularizers::Regularizer;

    fn scalar_problem(loss: LossKind<f64>) -> CompositeProblem<f64> {
        let d = Arc::new(Dataset::from_rows(&[vec![1.0]], vec![1.0]).unwrap());
        CompositeProblem::new(d, loss, Regularizer::L1, 0.0, 10.0).unwrap()
    }

    #[test]
    fn snapshot_equals_iterate() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]], vec![1.0, 0.0]).unwrap();
        let v = [0.3, -0.7];
        let th = [0.2, 0.1];
        let out = reduced_variance_gradient(&LossKind::Squared, &d, 1, &th, &th, &v, 0.4).unwrap();
        assert_eq!(out, v.to_vec());
    }

    #[test]
    fn hand_evaluated_reduced_gradient() {
        let d = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0]).unwrap();
        let out =
            reduced_variance_gradient(&LossKind::Squared, &d, 0, &[1.0, 0.0], &[0.0, 0.0], &[-0.5, -0.5], 0.0).unwrap();
        assert_eq!(out, vec![0.5, -0.5]);
    }

    #[test]
    fn stale_snapshot_rejected() {
        let d = Dataset::from_rows(&[vec![1.0, 0.0]], vec![1.0]).unwrap();
        assert!(reduced_variance_gradient(&LossKind::Squared, &d, 0, &[0.0; 2], &[0.0; 2], &[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn scalar_contraction() {
        let prob = scalar_problem(LossKind::Squared);
        let cfg = OptimizerConfig::new(4, 0.5, 10, 1);
        let tr = run_prox_svrg(&prob, &cfg, None).unwrap();
        for w in tr.records.windows(2) {
            assert!(w[1].objective < w[0].objective);
        }
        assert!((tr.theta[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nonconvex_requires_mu() {
        let prob = scalar_problem(LossKind::Squared);
        let cfg = OptimizerConfig::new(4, 0.5, 10, 1);
        assert!(matches!(run_nonconvex_prox_svrg(&prob, &cfg, None), Err(Error::Configuration(_))));
    }

    #[test]
    fn corrected_scalar_stationary_point() {
        let prob = scalar_problem(LossKind::CorrectedQuadratic { noise_scale: 0.1 });
        let cfg = OptimizerConfig::new(4, 0.5, 200, 3);
        let tr = run_nonconvex_prox_svrg(&prob, &cfg, None).unwrap();
        assert!((tr.theta[0] - 1.0 / 0.9).abs() < 1e-6);
        let th = reference_solution(&prob, &cfg).unwrap();
        assert!((th[0] - 1.0 / 0.9).abs() < 1e-9);
    }

    #[test]
    fn evaluation_accounting() {
        let d = Arc::new(Dataset::from_rows(&[vec![1.0], vec![2.0], vec![0.5]], vec![1.0, 0.0, 2.0]).unwrap());
        let prob = CompositeProblem::new(d, LossKind::Squared, Regularizer::L1, 0.1, 5.0).unwrap();
        let cfg = OptimizerConfig::new(7, 0.1, 4, 1);
        let tr = run_prox_svrg(&prob, &cfg, None).unwrap();
        for (s, r) in tr.records.iter().enumerate() {
            assert_eq!(r.grad_evals, (s * (3 + 2 * 7)) as u64);
            assert_eq!(r.passes, r.grad_evals as f64 / 3.0);
        }
    }
}
