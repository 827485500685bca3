//! Full proximal gradient, proximal SGD, proximal SAG and regularized dual
//! averaging. Each records once per effective pass (every `eval_every`
//! passes); `config.epochs` counts passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    checked_smoothness, diverged_at, initial_point, shifted_smoothness, OptimizerConfig, Recorder, RunTrace,
    StepSchedule,
};
use crate::error::{Error, Result};
use crate::losses;
use crate::problem::CompositeProblem;
use crate::regularizers::constrained_prox_into;
use crate::scalar::Scalar;

fn above_bound<T: Scalar>(problem: &CompositeProblem<T>, beta: T, name: &str) -> Result<bool> {
    let l = checked_smoothness(problem)?;
    let bound = T::one() / shifted_smoothness(l, problem.mu());
    let above = beta > bound;
    if above {
        log::warn!("{name}: beta {beta} above {bound}");
    }
    Ok(above)
}

fn should_record<T>(pass: usize, config: &OptimizerConfig<T>) -> bool {
    pass % config.eval_every == 0 || pass == config.epochs
}

/// `theta <- prox(theta - beta grad F_mu(theta))`, one full gradient per pass.
pub fn run_composite_gradient<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &OptimizerConfig<T>,
    reference: Option<T>,
) -> Result<RunTrace<T>> {
    config.validate()?;
    let above = above_bound(problem, config.beta, "composite gradient")?;
    let data = problem.dataset();
    let (n, p) = (data.n(), data.p());
    let (beta, mu) = (config.beta, problem.mu());
    let mut theta = initial_point(problem, config)?;
    let mut rec = Recorder::start(problem, config, reference, &theta)?;
    let mut derivs = vec![T::zero(); n];
    let mut grad = vec![T::zero(); p];
    let mut z = vec![T::zero(); p];
    for pass in 1..=config.epochs {
        losses::full_gradient_into(problem.loss(), data, &theta, &mut derivs, &mut grad);
        rec.evals += n as u64;
        for j in 0..p {
            z[j] = theta[j] - beta * (grad[j] - mu * theta[j]);
        }
        constrained_prox_into(problem.regularizer(), problem.lambda(), beta, problem.rho(), &z, &mut theta)
            .map_err(diverged_at(pass))?;
        if should_record(pass, config) && rec.record(pass, &theta)? {
            break;
        }
    }
    Ok(rec.finish("composite_gradient", theta, above))
}

/// Proximal stochastic gradient with the configured step schedule.
pub fn run_prox_sgd<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &OptimizerConfig<T>,
    reference: Option<T>,
) -> Result<RunTrace<T>> {
    config.validate()?;
    let above = above_bound(problem, config.beta, "prox-sgd")?;
    let data = problem.dataset();
    let (n, p) = (data.n(), data.p());
    let y = data.responses();
    let mu = problem.mu();
    let n_t = T::from_usize(n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = initial_point(problem, config)?;
    let mut rec = Recorder::start(problem, config, reference, &theta)?;
    let mut z = vec![T::zero(); p];
    let mut t = 0usize;
    for pass in 1..=config.epochs {
        for _ in 0..n {
            let beta = match config.schedule {
                StepSchedule::Constant => config.beta,
                StepSchedule::Decaying => config.beta / (T::one() + T::from_usize(t).unwrap() / n_t),
            };
            let i = rng.random_range(0..n);
            let row = data.row(i);
            let d = problem.loss().derivative(row.dot(&theta), y[i]);
            for j in 0..p {
                z[j] = theta[j] + beta * mu * theta[j];
            }
            row.axpy(-beta * d, &mut z);
            constrained_prox_into(problem.regularizer(), problem.lambda(), beta, problem.rho(), &z, &mut theta)
                .map_err(diverged_at(pass))?;
            rec.evals += 1;
            t += 1;
        }
        if should_record(pass, config) && rec.record(pass, &theta)? {
            break;
        }
    }
    Ok(rec.finish("sgd", theta, above))
}

/// Proximal SAG. The table holds one margin derivative per sample and is
/// filled by a full pass at the starting point (counted as `n` evaluations).
pub fn run_prox_sag<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &OptimizerConfig<T>,
    reference: Option<T>,
) -> Result<RunTrace<T>> {
    config.validate()?;
    let above = above_bound(problem, config.beta, "prox-sag")?;
    let data = problem.dataset();
    let (n, p) = (data.n(), data.p());
    let y = data.responses();
    let (beta, mu) = (config.beta, problem.mu());
    let inv_n = T::one() / T::from_usize(n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = initial_point(problem, config)?;
    let mut rec = Recorder::start(problem, config, reference, &theta)?;

    let mut table = vec![T::zero(); n];
    let mut avg = vec![T::zero(); p];
    losses::full_gradient_into(problem.loss(), data, &theta, &mut table, &mut avg);
    rec.evals += n as u64;
    let mut z = vec![T::zero(); p];
    let mut next = vec![T::zero(); p];
    for pass in 1..=config.epochs {
        if pass > 1 {
            // rebuild the running average from the table to stop drift
            avg.iter_mut().for_each(|a| *a = T::zero());
            for (i, &d) in table.iter().enumerate() {
                data.row(i).axpy(d * inv_n, &mut avg);
            }
        }
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let row = data.row(i);
            let d = problem.loss().derivative(row.dot(&theta), y[i]);
            row.axpy((d - table[i]) * inv_n, &mut avg);
            table[i] = d;
            for j in 0..p {
                z[j] = theta[j] - beta * (avg[j] - mu * theta[j]);
            }
            constrained_prox_into(problem.regularizer(), problem.lambda(), beta, problem.rho(), &z, &mut next)
                .map_err(diverged_at(pass))?;
            std::mem::swap(&mut theta, &mut next);
            rec.evals += 1;
        }
        if should_record(pass, config) && rec.record(pass, &theta)? {
            break;
        }
    }
    Ok(rec.finish("sag", theta, above))
}

/// Regularized dual averaging:
/// `theta_{t+1} = argmin_{psi <= rho} <g_bar_t, theta> + lambda psi(theta) + gamma/(2 sqrt t) |theta|^2`,
/// solved as the constrained prox of `-(sqrt t / gamma) g_bar_t` with step `sqrt t / gamma`.
pub fn run_rda<T: Scalar>(
    problem: &CompositeProblem<T>,
    config: &OptimizerConfig<T>,
    reference: Option<T>,
) -> Result<RunTrace<T>> {
    config.validate()?;
    if !problem.is_convex() {
        return Err(Error::Configuration("dual averaging applies to convex problems only".into()));
    }
    let data = problem.dataset();
    let (n, p) = (data.n(), data.p());
    let y = data.responses();
    let gamma = config.rda_gamma;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = initial_point(problem, config)?;
    let mut rec = Recorder::start(problem, config, reference, &theta)?;
    let mut gbar = vec![T::zero(); p];
    let mut z = vec![T::zero(); p];
    let mut t = 0usize;
    for pass in 1..=config.epochs {
        for _ in 0..n {
            t += 1;
            let tt = T::from_usize(t).unwrap();
            let i = rng.random_range(0..n);
            let row = data.row(i);
            let d = problem.loss().derivative(row.dot(&theta), y[i]);
            let w = T::one() / tt;
            gbar.iter_mut().for_each(|g| *g = *g * (T::one() - w));
            row.axpy(d * w, &mut gbar);
            let step = tt.sqrt() / gamma;
            for j in 0..p {
                z[j] = -step * gbar[j];
            }
            constrained_prox_into(problem.regularizer(), problem.lambda(), step, problem.rho(), &z, &mut theta)
                .map_err(diverged_at(pass))?;
            rec.evals += 1;
        }
        if should_record(pass, config) && rec.record(pass, &theta)? {
            break;
        }
    }
    Ok(rec.finish("rda", theta, false))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::losses::LossKind;
    use crate::problem::Dataset;
    use crate::regularizers::{constrained_prox, Regularizer};

    fn scalar(lambda: f64) -> CompositeProblem<f64> {
        let d = Arc::new(Dataset::from_rows(&[vec![1.0]], vec![2.0]).unwrap());
        CompositeProblem::new(d, LossKind::Squared, Regularizer::L1, lambda, f64::INFINITY).unwrap()
    }

    #[test]
    fn gradient_descent_contraction() {
        let prob = scalar(0.0);
        let mut cfg = OptimizerConfig::new(1, 0.3, 6, 0);
        cfg.eval_every = 1;
        let mut errs = vec![2.0];
        for k in 1..=6 {
            cfg.epochs = k;
            let tr = run_composite_gradient(&prob, &cfg, None).unwrap();
            errs.push((tr.theta[0] - 2.0f64).abs());
        }
        for w in errs.windows(2) {
            assert!((w[1] - 0.7 * w[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sample_sgd_matches_composite() {
        let prob = scalar(0.1);
        let mut cfg = OptimizerConfig::new(1, 0.4, 5, 9);
        cfg.schedule = StepSchedule::Constant;
        let a = run_prox_sgd(&prob, &cfg, None).unwrap();
        let b = run_composite_gradient(&prob, &cfg, None).unwrap();
        let c = run_prox_sag(&prob, &cfg, None).unwrap();
        assert!((a.theta[0] - b.theta[0]).abs() < 1e-14);
        assert!((c.theta[0] - b.theta[0]).abs() < 1e-14);
    }

    #[test]
    fn huge_lambda_pins_zero() {
        let prob = scalar(100.0);
        let cfg = OptimizerConfig::new(1, 0.4, 5, 9);
        for tr in [
            run_prox_sgd(&prob, &cfg, None).unwrap(),
            run_prox_sag(&prob, &cfg, None).unwrap(),
            run_rda(&prob, &cfg, None).unwrap(),
        ] {
            assert_eq!(tr.theta, vec![0.0]);
        }
    }

    #[test]
    fn rda_first_step_is_zero_with_zero_average() {
        // y = 0 at theta = 0 gives a zero gradient, so g_bar stays 0
        let d = Arc::new(Dataset::from_rows(&[vec![1.0]], vec![0.0]).unwrap());
        let prob = CompositeProblem::new(d, LossKind::Squared, Regularizer::L1, 0.5, 1.0).unwrap();
        let tr = run_rda(&prob, &OptimizerConfig::new(1, 1.0, 1, 0), None).unwrap();
        assert_eq!(tr.theta, vec![0.0]);
    }

    #[test]
    fn rda_rejects_nonconvex() {
        let d = Arc::new(Dataset::from_rows(&[vec![1.0]], vec![0.0]).unwrap());
        let prob = CompositeProblem::new(d, LossKind::Squared, Regularizer::Scad { shape: 3.7 }, 0.5, 1.0).unwrap();
        assert!(matches!(
            run_rda(&prob, &OptimizerConfig::new(1, 1.0, 1, 0), None),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn composite_first_step_unrolled() {
        let d = Arc::new(
            Dataset::from_rows(&[vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.7, 0.1]], vec![1.0, -2.0, 0.5]).unwrap(),
        );
        let prob = CompositeProblem::new(d.clone(), LossKind::Squared, Regularizer::L1, 0.2, 1.5).unwrap();
        let cfg = OptimizerConfig::new(1, 0.1, 1, 0);
        let tr = run_composite_gradient(&prob, &cfg, None).unwrap();
        let xty: Vec<f64> = d.transpose_mul(d.responses()).iter().map(|v| 0.1 * v / 3.0).collect();
        let want = constrained_prox(&Regularizer::L1, 0.2, 0.1, 1.5, &xty).unwrap();
        for (a, b) in tr.theta.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sag_table_average_matches_full_gradient() {
        let d = Dataset::<f64>::from_rows(&[vec![1.0, 0.5], vec![-0.3, 2.0]], vec![1.0, -2.0]).unwrap();
        let th = [0.4, -0.2];
        let mut table = vec![0.0; 2];
        let mut avg = vec![0.0; 2];
        losses::full_gradient_into(&LossKind::Squared, &d, &th, &mut table, &mut avg);
        let mut rebuilt = vec![0.0; 2];
        for (i, &t) in table.iter().enumerate() {
            d.row(i).axpy(t / 2.0, &mut rebuilt);
        }
        let full = losses::full_gradient(&LossKind::Squared, &d, &th).unwrap();
        for j in 0..2 {
            assert!((rebuilt[j] - full[j]).abs() < 1e-15);
        }
    }
}
