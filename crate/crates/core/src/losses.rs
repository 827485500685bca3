//! Component losses of the finite sum, their gradients and smoothness
//! constants.
//!
//! Every supported loss is a function of the margin `a = <x_i, theta>` and the
//! response, so gradients are a scalar derivative times the feature row. The
//! corrected quadratic loss is represented by its convex part only; the
//! `-(gamma_w/2)|theta|^2` term is a concavity shift applied by the
//! non-convex solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Dataset;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind<T> {
    /// `1/2 (<x, theta> - y)^2`
    Squared,
    /// `log(1 + exp(-y <x, theta>))`, labels in `{-1, +1}`.
    Logistic,
    /// Errors-in-variables least squares with covariate noise `Sigma_w = noise_scale * I`.
    CorrectedQuadratic { noise_scale: T },
}

impl<T: Scalar> LossKind<T> {
    pub fn validate(&self) -> Result<()> {
        if let LossKind::CorrectedQuadratic { noise_scale } = *self {
            if !(noise_scale >= T::zero()) || !noise_scale.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "noise scale must be finite and >= 0, got {noise_scale}"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
            LossKind::CorrectedQuadratic { .. } => "corrected_quadratic",
        }
    }

    /// Concavity shift contributed by the loss (`gamma_w` for corrected, else 0).
    pub fn concavity(&self) -> T {
        match *self {
            LossKind::CorrectedQuadratic { noise_scale } => noise_scale,
            _ => T::zero(),
        }
    }

    /// Upper bound on the second derivative with respect to the margin.
    pub fn curvature(&self) -> T {
        match self {
            LossKind::Logistic => T::lit(0.25),
            _ => T::one(),
        }
    }

    /// Component loss as a function of the margin.
    #[inline]
    pub fn value(&self, margin: T, y: T) -> T {
        match self {
            LossKind::Logistic => log1p_exp_neg(y * margin),
            _ => {
                let r = margin - y;
                T::lit(0.5) * r * r
            }
        }
    }

    /// Derivative of the component loss with respect to the margin.
    #[inline]
    pub fn derivative(&self, margin: T, y: T) -> T {
        match self {
            LossKind::Logistic => -y * sigmoid(-y * margin),
            _ => margin - y,
        }
    }
}

/// `log(1 + exp(-a))` without overflow.
#[inline]
pub fn log1p_exp_neg<T: Scalar>(a: T) -> T {
    (-a).max(T::zero()) + (-a.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

/// Uniform and per-component smoothness constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessBound<T> {
    pub max: T,
    pub per_component: Vec<T>,
}

/// `(1/n) sum_i f_i(theta)`.
pub fn loss_value<T: Scalar>(loss: &LossKind<T>, data: &Dataset<T>, theta: &[T]) -> Result<T> {
    data.check_dim(theta)?;
    let y = data.responses();
    let mut acc = T::zero();
    for i in 0..data.n() {
        acc = acc + loss.value(data.row(i).dot(theta), y[i]);
    }
    Ok(acc / T::from_usize(data.n()).unwrap())
}

/// `grad f_i(theta)`.
pub fn component_gradient<T: Scalar>(
    loss: &LossKind<T>,
    data: &Dataset<T>,
    i: usize,
    theta: &[T],
) -> Result<Vec<T>> {
    if i >= data.n() {
        return Err(Error::IndexOutOfRange { index: i, n: data.n() });
    }
    data.check_dim(theta)?;
    let row = data.row(i);
    let d = loss.derivative(row.dot(theta), data.responses()[i]);
    let mut g = vec![T::zero(); data.p()];
    row.axpy(d, &mut g);
    Ok(g)
}

/// Rows accumulated per partial sum in [`full_gradient_into`].
pub const GRADIENT_CHUNK: usize = 256;

/// `grad F(theta)`, reducing fixed chunks of rows in index order so that the
/// result is bit-reproducible.
pub fn full_gradient<T: Scalar>(loss: &LossKind<T>, data: &Dataset<T>, theta: &[T]) -> Result<Vec<T>> {
    data.check_dim(theta)?;
    let mut out = vec![T::zero(); data.p()];
    let mut derivs = vec![T::zero(); data.n()];
    full_gradient_into(loss, data, theta, &mut derivs, &mut out);
    Ok(out)
}

/// Writes `grad F(theta)` into `out` and the per-sample margin derivatives
/// into `derivs`. No dimension checks.
pub(crate) fn full_gradient_into<T: Scalar>(
    loss: &LossKind<T>,
    data: &Dataset<T>,
    theta: &[T],
    derivs: &mut [T],
    out: &mut [T],
) {
    let y = data.responses();
    let p = data.p();
    out.iter_mut().for_each(|v| *v = T::zero());
    let mut partial = vec![T::zero(); p];
    let inv_n = T::one() / T::from_usize(data.n()).unwrap();
    for start in (0..data.n()).step_by(GRADIENT_CHUNK) {
        let end = (start + GRADIENT_CHUNK).min(data.n());
        partial.iter_mut().for_each(|v| *v = T::zero());
        for i in start..end {
            let row = data.row(i);
            let d = loss.derivative(row.dot(theta), y[i]);
            derivs[i] = d;
            row.axpy(d, &mut partial);
        }
        for (o, &v) in out.iter_mut().zip(&partial) {
            *o = *o + v;
        }
    }
    for o in out.iter_mut() {
        *o = *o * inv_n;
    }
}

/// `L_i = c ||x_i||^2` with `c` the loss curvature bound; `L = max_i L_i`.
pub fn smoothness_bound<T: Scalar>(loss: &LossKind<T>, data: &Dataset<T>) -> SmoothnessBound<T> {
    let c = loss.curvature();
    let per_component: Vec<T> = (0..data.n()).map(|i| c * data.row(i).norm_sq()).collect();
    let max = per_component.iter().fold(T::zero(), |a, &b| a.max(b));
    SmoothnessBound { max, per_component }
}

/// Lipschitz constant of `grad F`: `c * lambda_max(X^T X / n)`, estimated by
/// power iteration from a fixed deterministic start.
pub fn full_smoothness<T: Scalar>(loss: &LossKind<T>, data: &Dataset<T>, iterations: usize) -> T {
    let p = data.p();
    let n = T::from_usize(data.n()).unwrap();
    // deterministic, non-degenerate start
    let mut v: Vec<T> = (0..p)
        .map(|j| T::one() + T::lit(((j * 7919) % 101) as f64 / 101.0))
        .collect();
    let mut est = T::zero();
    for _ in 0..iterations.max(1) {
        let norm = v.iter().fold(T::zero(), |a, &b| a + b * b).sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        v.iter_mut().for_each(|x| *x = *x / norm);
        let xv = data.margins(&v);
        let w = data.transpose_mul(&xv);
        est = w.iter().zip(&v).fold(T::zero(), |a, (&x, &y)| a + x * y) / n;
        v = w;
    }
    loss.curvature() * est
}
