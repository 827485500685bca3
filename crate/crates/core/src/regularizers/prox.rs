//! Proximal operator of `step * lambda * pen` restricted to `{pen_norm <= rho}`.
//!
//! The unconstrained prox is separable (coordinates or blocks). When its
//! output violates the constraint, the minimizer is the unconstrained prox at
//! the larger threshold `step * lambda + nu`, with `nu >= 0` chosen so that
//! the constraint is active. `nu -> pen_norm(prox_{t + nu}(z))` is continuous
//! and non-increasing. For l1 and group penalties it is piecewise linear in
//! the threshold and the root is found exactly by active-set iteration; the
//! folded penalties use a bracketing secant search.

use super::Regularizer;
use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Relative tolerance on the active constraint.
pub const PROX_TOL: f64 = 1e-12;
/// Iteration cap of the bracketing search.
pub const PROX_MAX_ITER: usize = 200;

/// Returns `argmin_{pen_norm(x) <= rho} 1/2 |x - z|^2 + step * lambda * pen(x)`.
///
/// `rho` may be `+inf`. Folded penalties use their convexified form.
pub fn constrained_prox<T: Scalar>(
    reg: &Regularizer<T>,
    lambda: T,
    step: T,
    rho: T,
    z: &[T],
) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); z.len()];
    constrained_prox_into(reg, lambda, step, rho, z, &mut out)?;
    Ok(out)
}

/// In-place variant of [`constrained_prox`]; `out` and `z` must not alias.
pub fn constrained_prox_into<T: Scalar>(
    reg: &Regularizer<T>,
    lambda: T,
    step: T,
    rho: T,
    z: &[T],
    out: &mut [T],
) -> Result<()> {
    if !(step > T::zero()) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {step}")));
    }
    if !(rho > T::zero()) {
        return Err(Error::InvalidParameter(format!("rho must be > 0, got {rho}")));
    }
    if out.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), got: out.len() });
    }
    if reg.is_folded() && !(lambda > T::zero()) {
        return Err(Error::InvalidParameter("folded penalties need lambda > 0".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("constrained_prox input"));
    }
    let base = step * lambda;
    separable_prox(reg, lambda, base, z, out);
    if rho.is_infinite() {
        return Ok(());
    }
    let norm = reg.constraint_norm(lambda, out);
    if !norm.is_finite() {
        return Err(Error::NonFinite("constrained_prox"));
    }
    if norm <= rho {
        return Ok(());
    }

    if let Some(t) = exact_threshold(reg, base, rho, z) {
        separable_prox(reg, lambda, t, z, out);
        // rounding can leave the norm a few ulps above rho
        let mut t = t;
        for _ in 0..8 {
            if reg.constraint_norm(lambda, out) <= rho {
                return Ok(());
            }
            t = t + t.abs().max(T::min_positive_value()) * T::epsilon() * T::lit(4.0);
            separable_prox(reg, lambda, t, z, out);
        }
    }

    // Past this threshold the prox is identically zero.
    let zero_at = match reg {
        Regularizer::Group(map) => (0..map.len()).fold(T::zero(), |a, g| a.max(map.block_norm(g, z))),
        _ => scalar::norm_inf(z),
    };
    // Illinois regula falsi on f(nu) = norm(nu) - rho, keeping the bracket
    // f(lo) > 0 >= f(hi); falls back to bisection when the secant step
    // leaves the bracket.
    let mut lo = T::zero();
    let mut hi = (zero_at - base).max(T::zero());
    let mut f_lo = norm - rho;
    let mut f_hi = -rho;
    let mut side = 0i8;
    let half = T::lit(0.5);
    let tol = T::lit(PROX_TOL);
    let mut converged = false;
    for _ in 0..PROX_MAX_ITER {
        let mut mid = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if !(mid > lo && mid < hi) {
            mid = lo + (hi - lo) * half;
        }
        if mid <= lo || mid >= hi {
            converged = true;
            break;
        }
        separable_prox(reg, lambda, base + mid, z, out);
        let f = reg.constraint_norm(lambda, out) - rho;
        if f > T::zero() {
            lo = mid;
            f_lo = f;
            if side == 1 {
                f_hi = f_hi * half;
            }
            side = 1;
        } else {
            hi = mid;
            f_hi = f;
            if f >= -rho * tol {
                converged = true;
                break;
            }
            if side == -1 {
                f_lo = f_lo * half;
            }
            side = -1;
        }
    }
    separable_prox(reg, lambda, base + hi, z, out);
    let v = reg.constraint_norm(lambda, out);
    let residual = (rho - v) / rho;
    if !converged && residual > tol {
        return Err(Error::RootFinding {
            iterations: PROX_MAX_ITER,
            residual: residual.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Threshold `t >= base` with `sum_j (a_j - t)_+ = rho`, where `a_j` are the
/// coordinate magnitudes (l1) or block norms (group). Each sweep sets `t` to
/// the root of the linear piece selected by the current active set; the
/// active set only shrinks, so this stops after at most `len(a)` sweeps.
fn exact_threshold<T: Scalar>(reg: &Regularizer<T>, base: T, rho: T, z: &[T]) -> Option<T> {
    let mut active: Vec<T> = match reg {
        Regularizer::L1 => z.iter().map(|v| v.abs()).filter(|&a| a > base).collect(),
        Regularizer::Group(map) => (0..map.len()).map(|g| map.block_norm(g, z)).filter(|&a| a > base).collect(),
        _ => return None,
    };
    let mut t = base;
    loop {
        if active.is_empty() {
            return None;
        }
        let sum = active.iter().fold(T::zero(), |s, &a| s + a);
        let next = ((sum - rho) / T::from_usize(active.len()).unwrap()).max(t);
        let before = active.len();
        active.retain(|&a| a > next);
        if active.len() == before {
            return Some(next);
        }
        t = next;
    }
}

/// Unconstrained prox of `threshold * pen` (convexified for folded penalties).
fn separable_prox<T: Scalar>(reg: &Regularizer<T>, lambda: T, threshold: T, z: &[T], out: &mut [T]) {
    match reg {
        Regularizer::L1 => {
            for (o, &w) in out.iter_mut().zip(z) {
                *o = soft_threshold(w, threshold);
            }
        }
        Regularizer::Group(map) => {
            for (g, block) in map.groups().iter().enumerate() {
                let norm = map.block_norm(g, z);
                let scale = if norm <= threshold { T::zero() } else { T::one() - threshold / norm };
                for &j in block {
                    out[j] = z[j] * scale;
                }
            }
        }
        _ => {
            let f = reg.folded(lambda).expect("folded penalty").prox_map(threshold);
            for (o, &w) in out.iter_mut().zip(z) {
                *o = f.apply(w);
            }
        }
    }
}

#[inline]
pub(crate) fn soft_threshold<T: Scalar>(w: T, t: T) -> T {
    let a = w.abs() - t;
    if a > T::zero() {
        a.copysign(w)
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::GroupMap;

    #[test]
    fn soft_threshold_closed_form() {
        let x = constrained_prox(&Regularizer::L1, 1.0, 1.0, f64::INFINITY, &[3.0, -1.0, 0.5]).unwrap();
        assert_eq!(x, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn l1_ball_active() {
        let x: Vec<f64> = constrained_prox(&Regularizer::L1, 1.0, 1.0, 1.0, &[3.0, -1.0, 0.5]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-11);
        assert_eq!(x[1], 0.0);
        assert_eq!(x[2], 0.0);
        assert!(x[0] <= 1.0);
    }

    #[test]
    fn block_soft_threshold() {
        let reg = Regularizer::Group(GroupMap::new(3, vec![vec![0, 1], vec![2]]).unwrap());
        let x = constrained_prox(&reg, 1.0, 1.0, f64::INFINITY, &[3.0, 4.0, 0.5]).unwrap();
        assert!((x[0] - 2.4).abs() < 1e-15);
        assert!((x[1] - 3.2).abs() < 1e-15);
        assert_eq!(x[2], 0.0);
    }

    #[test]
    fn ties_go_to_zero() {
        let x = constrained_prox(&Regularizer::L1, 1.0, 1.0, f64::INFINITY, &[1.0, -1.0]).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        let f = Regularizer::Scad { shape: 3.7 };
        let x = constrained_prox(&f, 1.0, 0.5, f64::INFINITY, &[0.5]).unwrap();
        assert_eq!(x, vec![0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(constrained_prox(&Regularizer::L1, 1.0, 1.0, 0.0, &[1.0]).is_err());
        assert!(constrained_prox(&Regularizer::L1, 1.0, 0.0, 1.0, &[1.0]).is_err());
        assert!(constrained_prox(&Regularizer::L1, 1.0, 1.0, 1.0, &[f64::NAN]).is_err());
    }

    #[test]
    fn zero_lambda_projection_onto_l1_ball() {
        let x: Vec<f64> = constrained_prox(&Regularizer::L1, 0.0, 1.0, 1.0, &[0.5, 0.5, 0.5]).unwrap();
        for v in &x {
            assert!((v - 1.0 / 3.0).abs() < 1e-11);
        }
    }
}
