//! Convergence constants of the convex and non-convex SVRG analyses, the
//! regularization lower bounds of the four model corollaries, and
//! Monte-Carlo checks of the cone condition and restricted strong convexity.
//!
//! Logarithms are natural. Constants the analysis leaves unidentified
//! (`c1`, `tau`) are explicit inputs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Covariance;
use crate::error::{Error, Result};
use crate::losses;
use crate::problem::Dataset;
use crate::regularizers::{subspace_split, Regularizer, SubspaceModel};

/// Relative slack used when testing the certificate boundaries.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Restricted strong convexity parameters of a design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RscParams {
    pub sigma: f64,
    pub tau_sigma: f64,
    /// Largest diagonal entry of the covariance.
    pub nu: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl RscParams {
    /// Gaussian design `N(0, Sigma)`: `sigma = sigma_min / 2` and
    /// `tau_sigma = c1 nu log(p) / (64 n)`, so that
    /// `sigma - 64 tau_sigma r = sigma_min/2 - c1 nu r log(p)/n`.
    pub fn gaussian(cov: &Covariance, n: usize, c1: f64) -> Result<Self> {
        let (sigma_min, sigma_max) = cov.eigen_range();
        if !(sigma_min > 0.0) {
            return Err(Error::InvalidParameter("covariance is not positive definite".into()));
        }
        let p = cov.dim() as f64;
        let nu = cov.max_diag();
        Ok(Self {
            sigma: 0.5 * sigma_min,
            tau_sigma: c1 * nu * p.ln() / (64.0 * n as f64),
            nu,
            sigma_min,
            sigma_max,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModifiedRsc {
    pub value: f64,
    /// `value > 0`; otherwise no linear-rate certificate exists.
    pub certified: bool,
}

/// `sigma_bar = sigma - mu - 64 tau_sigma H^2`.
pub fn modified_rsc(sigma: f64, tau_sigma: f64, h: f64, mu: f64) -> ModifiedRsc {
    let value = sigma - mu - 64.0 * tau_sigma * h * h;
    ModifiedRsc {
        value,
        certified: value > 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexContraction {
    pub alpha: f64,
    pub q: f64,
}

/// `Q = sigma_bar beta (1 - 4 L beta) m` and
/// `alpha = 1/Q + 4 L beta (m + 1) / ((1 - 4 L beta) m)`.
pub fn contraction_convex(beta: f64, sigma_bar: f64, l: f64, m: usize) -> Result<ConvexContraction> {
    let lb4 = 4.0 * l * beta;
    if lb4 >= 1.0 - BOUNDARY_TOL {
        return Err(Error::NoCertificate(format!("4 L beta = {lb4} >= 1")));
    }
    if !(sigma_bar > 0.0) {
        return Err(Error::NoCertificate(format!("sigma_bar = {sigma_bar} <= 0")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    let m = m as f64;
    let q = sigma_bar * beta * (1.0 - lb4) * m;
    let alpha = 1.0 / q + lb4 * (m + 1.0) / ((1.0 - lb4) * m);
    Ok(ConvexContraction { alpha, q })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonconvexContraction {
    pub alpha: f64,
    pub chi: f64,
}

/// Contraction factor `alpha` and tolerance factor `chi` of the non-convex
/// analysis. Both share the denominator
/// `beta m (2 - 8 L beta - (2 mu / sigma_bar)(1 + 4 L beta))`, which is
/// positive iff `mu / sigma_bar < (1 - 4 L beta) / (1 + 4 L beta)`.
pub fn contraction_nonconvex(beta: f64, mu: f64, l: f64, m: usize, sigma_bar: f64) -> Result<NonconvexContraction> {
    if !(sigma_bar > 0.0) {
        return Err(Error::NoCertificate(format!("sigma_bar = {sigma_bar} <= 0")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("m must be >= 1".into()));
    }
    let lb4 = 4.0 * l * beta;
    let bound = (1.0 - lb4) / (1.0 + lb4);
    let ratio = mu / sigma_bar;
    if lb4 >= 1.0 - BOUNDARY_TOL || ratio >= bound - BOUNDARY_TOL * bound.abs().max(ratio.abs()) {
        return Err(Error::NoCertificate(format!(
            "mu / sigma_bar = {ratio} >= (1 - 4 L beta) / (1 + 4 L beta) = {bound}"
        )));
    }
    let mf = m as f64;
    let denom = beta * mf * (2.0 - 8.0 * l * beta - 2.0 * ratio * (1.0 + lb4));
    let common = 1.0 + beta * mu + 4.0 * l * mu * beta * beta + 4.0 * l * beta * beta * mu * mf;
    let alpha = (8.0 * l * beta * beta * (mf + 1.0) + 2.0 * common / sigma_bar) / denom;
    let chi = (2.0 * mu * beta * mf / sigma_bar * (1.0 + lb4) + common * 2.0 / sigma_bar) / denom;
    Ok(NonconvexContraction { alpha, chi })
}

/// `e^2 = (8 tau_sigma / Q) (8 H |theta_hat - theta*| + 8 psi(theta*_{M perp}))^2`.
pub fn statistical_tolerance_convex(tau_sigma: f64, q: f64, h: f64, err_norm: f64, psi_perp: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::NoCertificate(format!("Q = {q} <= 0")));
    }
    let s = 8.0 * h * err_norm + 8.0 * psi_perp;
    Ok(8.0 * tau_sigma / q * s * s)
}

/// `e^2 = 64 tau_sigma chi r |theta_hat - theta*|^2`.
pub fn statistical_tolerance_nonconvex(tau_sigma: f64, chi: f64, r: usize, err_norm: f64) -> f64 {
    64.0 * tau_sigma * chi * r as f64 * err_norm * err_norm
}

/// Model whose regularization lower bound is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundModel {
    Lasso,
    Group,
    Scad,
    Corrected,
}

/// Inputs of [`lambda_lower_bound`]. Only the fields used by the chosen model
/// are required; `c1` and `tau` default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: usize,
    pub p: Option<usize>,
    /// Noise standard deviation `u`.
    pub noise: Option<f64>,
    pub group_size: Option<usize>,
    pub num_groups: Option<usize>,
    pub rho: Option<f64>,
    pub tau: f64,
    pub c1: f64,
    pub noise_scale: Option<f64>,
    /// Noise level `v` of the errors-in-variables model.
    pub v: Option<f64>,
    pub theta_norm: Option<f64>,
    pub sigma_max: Option<f64>,
}

impl BoundParams {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            p: None,
            noise: None,
            group_size: None,
            num_groups: None,
            rho: None,
            tau: 1.0,
            c1: 1.0,
            noise_scale: None,
            v: None,
            theta_norm: None,
            sigma_max: None,
        }
    }
}

fn need<T>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingParameter(name))
}

/// Smallest penalty weight allowed by the model's corollary.
///
/// * Lasso: `6 u sqrt(log p / n)`
/// * group Lasso: `4 u (sqrt(q/n) + sqrt(log N_G / n))`
/// * SCAD: `max(12 u sqrt(log p / n), 16 rho tau log p / n)`
/// * corrected Lasso: `max(c1 phi sqrt(log p / n), 16 rho tau log p / n)` with
///   `phi = (sqrt(sigma_max) + sqrt(gamma_w)) (v + sqrt(gamma_w) |theta*|)`
pub fn lambda_lower_bound(model: BoundModel, params: &BoundParams) -> Result<f64> {
    if params.n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let n = params.n as f64;
    let log_p_n = || -> Result<f64> { Ok((need(params.p, "p")? as f64).ln() / n) };
    Ok(match model {
        BoundModel::Lasso => 6.0 * need(params.noise, "noise")? * log_p_n()?.sqrt(),
        BoundModel::Group => {
            let q = need(params.group_size, "group_size")? as f64;
            let ng = need(params.num_groups, "num_groups")? as f64;
            4.0 * need(params.noise, "noise")? * ((q / n).sqrt() + (ng.ln() / n).sqrt())
        }
        BoundModel::Scad => {
            let lpn = log_p_n()?;
            let a = 12.0 * need(params.noise, "noise")? * lpn.sqrt();
            let b = 16.0 * need(params.rho, "rho")? * params.tau * lpn;
            a.max(b)
        }
        BoundModel::Corrected => {
            let lpn = log_p_n()?;
            let gw = need(params.noise_scale, "noise_scale")?;
            let phi = (need(params.sigma_max, "sigma_max")?.sqrt() + gw.sqrt())
                * (need(params.v, "v")? + gw.sqrt() * need(params.theta_norm, "theta_norm")?);
            let a = params.c1 * phi * lpn.sqrt();
            let b = 16.0 * need(params.rho, "rho")? * params.tau * lpn;
            a.max(b)
        }
    })
}

/// Outer iterations guaranteeing `gap <= kappa^2`:
/// `ceil(3 log(gap0 / kappa^2) / log(1 / alpha))`.
///
/// Values within `1e-9` of an integer are snapped to it before rounding up.
pub fn epochs_needed(gap0: f64, kappa_sq: f64, alpha: f64) -> Result<u64> {
    if !(kappa_sq > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa^2 must be > 0, got {kappa_sq}")));
    }
    if !(alpha < 1.0) {
        return Err(Error::NoCertificate(format!("alpha = {alpha} >= 1")));
    }
    if alpha < 0.0 {
        return Err(Error::NoCertificate(format!("alpha = {alpha} < 0")));
    }
    if gap0 <= kappa_sq {
        return Ok(0);
    }
    if alpha == 0.0 {
        return Ok(1);
    }
    let s = 3.0 * (gap0 / kappa_sq).ln() / (1.0 / alpha).ln();
    let r = s.round();
    let s = if (s - r).abs() <= 1e-9 * r.max(1.0) { r } else { s.ceil() };
    Ok(s as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    /// `psi(Delta_{M-bar perp})`
    pub lhs: f64,
    /// `3 psi(Delta_{M-bar}) + 4 psi(theta*_{M perp})`
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    pub dual_norm_grad: f64,
    pub lambda: f64,
    /// `lambda >= 2 psi*(grad F(theta*))`
    pub lambda_condition: bool,
}

/// Evaluates the cone condition on `Delta = theta_hat - theta*` for a convex
/// decomposable penalty. Passes iff `lhs <= rhs + 1e-8`.
pub fn check_cone_condition(
    theta_hat: &[f64],
    theta_star: &[f64],
    sub: &SubspaceModel,
    reg: &Regularizer<f64>,
    lambda: f64,
    grad_at_truth: &[f64],
) -> Result<ConeReport> {
    if theta_hat.len() != theta_star.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_star.len(),
            got: theta_hat.len(),
        });
    }
    let dual = reg.dual_norm(grad_at_truth)?;
    let delta: Vec<f64> = theta_hat.iter().zip(theta_star).map(|(a, b)| a - b).collect();
    let (d_in, d_out) = subspace_split(&delta, sub)?;
    let (_, star_out) = subspace_split(theta_star, sub)?;
    let psi = |v: &[f64]| reg.constraint_norm(1.0, v);
    let lhs = psi(&d_out);
    let rhs = 3.0 * psi(&d_in) + 4.0 * psi(&star_out);
    Ok(ConeReport {
        lhs,
        rhs,
        slack: rhs - lhs,
        pass: lhs <= rhs + 1e-8,
        dual_norm_grad: dual,
        lambda,
        lambda_condition: lambda >= 2.0 * dual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscReport {
    pub trials: usize,
    /// Smallest `c1` for which every sampled direction satisfies the bound.
    pub min_c1: f64,
    pub c1: f64,
    /// Fraction of samples satisfying the bound at `c1`.
    pub pass_fraction: f64,
    /// Samples violating the bound at `c1`.
    pub violations: usize,
}

/// Kind of direction drawn in trial `t` of [`empirical_rsc_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Coordinate,
    Sparse,
    Dense,
    /// Dense direction pushed toward the null space of `X`.
    Adversarial,
}

impl Direction {
    fn of_trial(t: usize) -> Self {
        [Direction::Coordinate, Direction::Sparse, Direction::Dense, Direction::Adversarial][t % 4]
    }
}

/// Samples directions `Delta` and tests
/// `|X Delta|^2 / n >= 1/2 Delta' Sigma Delta - c1 nu (log p / n) |Delta|_1^2`.
///
/// Trials cycle through coordinate, sparse, dense and adversarial dense
/// directions.
pub fn empirical_rsc_check<R: Rng>(
    x: &Dataset<f64>,
    cov: &Covariance,
    trials: usize,
    c1: f64,
    rng: &mut R,
) -> Result<RscReport> {
    empirical_rsc_check_with(x, cov, trials, c1, rng, Direction::of_trial)
}

/// [`empirical_rsc_check`] with a caller-chosen direction schedule.
pub fn empirical_rsc_check_with<R: Rng>(
    x: &Dataset<f64>,
    cov: &Covariance,
    trials: usize,
    c1: f64,
    rng: &mut R,
    schedule: impl Fn(usize) -> Direction,
) -> Result<RscReport> {
    let p = x.p();
    if cov.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, got: cov.dim() });
    }
    let nu = cov.max_diag();
    if !(nu > 0.0) || !(cov.eigen_range().0 > 0.0) {
        return Err(Error::InvalidParameter("degenerate covariance".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let n = x.n() as f64;
    let scale = nu * (p as f64).ln() / n;
    let lf = losses::full_smoothness(&losses::LossKind::Squared, x, 50);
    let mut min_c1: f64 = 0.0;
    let mut violations = 0;
    for t in 0..trials {
        let delta = sample_direction(x, schedule(t), lf, rng);
        let xd = x.margins(&delta);
        let lhs = xd.iter().map(|v| v * v).sum::<f64>() / n;
        let l1: f64 = delta.iter().map(|v| v.abs()).sum();
        let quad = 0.5 * cov.quad_form(&delta);
        let need = if l1 > 0.0 { ((quad - lhs) / (scale * l1 * l1)).max(0.0) } else { 0.0 };
        min_c1 = min_c1.max(need);
        if lhs < quad - c1 * scale * l1 * l1 {
            violations += 1;
        }
    }
    Ok(RscReport {
        trials,
        min_c1,
        c1,
        pass_fraction: (trials - violations) as f64 / trials as f64,
        violations,
    })
}

fn sample_direction<R: Rng>(x: &Dataset<f64>, kind: Direction, lf: f64, rng: &mut R) -> Vec<f64> {
    let p = x.p();
    let mut d = vec![0.0; p];
    match kind {
        Direction::Coordinate => d[rng.random_range(0..p)] = 1.0,
        Direction::Sparse => {
            let k = rng.random_range(2..=10.min(p).max(2)).min(p);
            for _ in 0..k {
                d[rng.random_range(0..p)] = rng.sample(StandardNormal);
            }
        }
        Direction::Dense | Direction::Adversarial => {
            for v in d.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
    }
    if kind == Direction::Adversarial && lf > 0.0 {
        let n = x.n() as f64;
        for _ in 0..20 {
            let g = x.transpose_mul(&x.margins(&d));
            for (v, gj) in d.iter_mut().zip(&g) {
                *v -= gj / (n * lf);
            }
        }
    }
    d
}
