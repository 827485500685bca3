//! Synthetic designs, dataset ingestion and preprocessing, and trace
//! serialization.

mod io;
mod transform;

pub use io::{
    parse_libsvm, read_libsvm, read_trace, read_trace_json, write_libsvm, write_trace, LabelMode, TraceFormat,
    TRACE_HEADER,
};
pub use transform::{column_normalize, group_normalize, polynomial_group_expand, standardize};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Dataset;
use crate::regularizers::{GroupMap, SubspaceModel};
use crate::scalar::Scalar;

/// Compound-symmetric covariance `variance * ((1 - b) I + b 1 1')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    dim: usize,
    variance: f64,
    b: f64,
}

impl Covariance {
    pub fn new(dim: usize, variance: f64, b: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("covariance dimension must be >= 1".into()));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidParameter(format!("variance must be > 0, got {variance}")));
        }
        if !(0.0..1.0).contains(&b) {
            return Err(Error::InvalidParameter(format!(
                "off-diagonal correlation b must lie in [0, 1), got {b}"
            )));
        }
        Ok(Self { dim, variance, b })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(dim, 1.0, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `nu(Sigma)`, the largest diagonal entry.
    pub fn max_diag(&self) -> f64 {
        self.variance
    }

    /// `(sigma_min, sigma_max)`.
    pub fn eigen_range(&self) -> (f64, f64) {
        let v = self.variance;
        if self.dim == 1 {
            return (v, v);
        }
        (v * (1.0 - self.b), v * (1.0 + (self.dim as f64 - 1.0) * self.b))
    }

    /// `v' Sigma v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let sq: f64 = v.iter().map(|x| x * x).sum();
        let s: f64 = v.iter().sum();
        self.variance * ((1.0 - self.b) * sq + self.b * s * s)
    }

    /// One draw from `N(0, Sigma)` via `x = sqrt(b) g 1 + sqrt(1 - b) z`.
    pub fn sample<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        let g: f64 = rng.sample(StandardNormal);
        let (a, c) = (self.b.sqrt() * g, (1.0 - self.b).sqrt());
        let s = self.variance.sqrt();
        for o in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *o = s * (a + c * z);
        }
    }
}

/// Synthetic problem specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    /// Nonzero coordinates, or nonzero groups for group specs.
    pub sparsity: usize,
    /// Off-diagonal covariance.
    pub b: f64,
    /// Diagonal covariance.
    pub variance: f64,
    /// Standard deviation `u` of the response noise.
    pub noise: f64,
    /// Covariate noise variance `gamma_w`.
    pub noise_scale: f64,
    pub group_size: Option<usize>,
    pub num_groups: Option<usize>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn lasso(n: usize, p: usize, r: usize, b: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            sparsity: r,
            b,
            variance: 1.0,
            noise: 1.0,
            noise_scale: 0.0,
            group_size: None,
            num_groups: None,
            seed,
        }
    }

    pub fn group(n: usize, group_size: usize, num_groups: usize, s_g: usize, b: f64, seed: u64) -> Self {
        Self {
            group_size: Some(group_size),
            num_groups: Some(num_groups),
            ..Self::lasso(n, group_size * num_groups, s_g, b, seed)
        }
    }

    pub fn corrupted(n: usize, p: usize, r: usize, noise_scale: f64, seed: u64) -> Self {
        Self {
            noise_scale,
            ..Self::lasso(n, p, r, 0.0, seed)
        }
    }

    pub fn covariance(&self) -> Result<Covariance> {
        Covariance::new(self.p, self.variance, self.b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidParameter("n and p must be >= 1".into()));
        }
        self.covariance()?;
        if !(self.noise >= 0.0) || !(self.noise_scale >= 0.0) {
            return Err(Error::InvalidParameter("noise levels must be >= 0".into()));
        }
        match (self.group_size, self.num_groups) {
            (None, None) => {
                if self.sparsity > self.p {
                    return Err(Error::InvalidParameter(format!(
                        "sparsity r = {} exceeds p = {}",
                        self.sparsity, self.p
                    )));
                }
            }
            (Some(q), Some(ng)) => {
                if q == 0 || q * ng != self.p {
                    return Err(Error::InvalidParameter(format!(
                        "group geometry requires q * N_G = p, got {q} * {ng} != {}",
                        self.p
                    )));
                }
                if self.sparsity > ng {
                    return Err(Error::InvalidParameter(format!(
                        "s_G = {} exceeds N_G = {ng}",
                        self.sparsity
                    )));
                }
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "group specs need both group_size and num_groups".into(),
                ))
            }
        }
        Ok(())
    }
}

/// Planted parameter and its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth<T> {
    pub theta: Vec<T>,
    pub support: SubspaceModel,
}

// Stream 0 draws the planted parameter; row i uses stream 1 + i for the
// features and response, and stream 1 + n + i for covariate noise, so rows
// can be generated independently.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn signs(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

fn draw_rows<T: Scalar>(spec: &SynthSpec, theta: &[f64]) -> Result<(Vec<f64>, Vec<T>)> {
    let cov = spec.covariance()?;
    let (n, p) = (spec.n, spec.p);
    let mut x = vec![0.0; n * p];
    let mut y = Vec::with_capacity(n);
    for (i, row) in x.chunks_mut(p).enumerate() {
        let mut rng = stream(spec.seed, 1 + i as u64);
        cov.sample(&mut rng, row);
        let xi: f64 = rng.sample(StandardNormal);
        let dot: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
        y.push(T::lit(dot + spec.noise * xi));
    }
    Ok((x, y))
}

fn to_dataset<T: Scalar>(n: usize, p: usize, x: &[f64], y: Vec<T>) -> Result<Dataset<T>> {
    Dataset::dense(n, p, x.iter().map(|&v| T::lit(v)).collect(), y)
}

/// Sparse linear model `y = X theta* + u xi` with rows from the spec's
/// covariance and `r` planted `+-1` coefficients.
pub fn gen_sparse_linear<T: Scalar>(spec: &SynthSpec) -> Result<(Dataset<T>, GroundTruth<T>)> {
    spec.validate()?;
    if spec.group_size.is_some() {
        return Err(Error::InvalidParameter("group spec passed to the sparse generator".into()));
    }
    let mut rng = stream(spec.seed, 0);
    let mut support = index::sample(&mut rng, spec.p, spec.sparsity).into_vec();
    support.sort_unstable();
    let s = signs(&mut rng, support.len());
    let mut theta = vec![0.0; spec.p];
    for (&j, &v) in support.iter().zip(&s) {
        theta[j] = v;
    }
    let (x, y) = draw_rows::<T>(spec, &theta)?;
    let data = to_dataset(spec.n, spec.p, &x, y)?;
    Ok((
        data,
        GroundTruth {
            theta: theta.into_iter().map(T::lit).collect(),
            support: SubspaceModel::support(support),
        },
    ))
}

/// Group-sparse linear model: `s_G` contiguous groups of size `q` planted
/// with `+-1` entries.
pub fn gen_group_sparse<T: Scalar>(spec: &SynthSpec) -> Result<(Dataset<T>, GroundTruth<T>, GroupMap)> {
    spec.validate()?;
    let (q, ng) = match (spec.group_size, spec.num_groups) {
        (Some(q), Some(ng)) => (q, ng),
        _ => return Err(Error::InvalidParameter("group spec needs group_size and num_groups".into())),
    };
    let map = GroupMap::contiguous(spec.p, q)?;
    let mut rng = stream(spec.seed, 0);
    let mut active = index::sample(&mut rng, ng, spec.sparsity).into_vec();
    active.sort_unstable();
    let mut theta = vec![0.0; spec.p];
    for &g in &active {
        for (&j, v) in map.groups()[g].iter().zip(signs(&mut rng, q)) {
            theta[j] = v;
        }
    }
    let (x, y) = draw_rows::<T>(spec, &theta)?;
    let data = to_dataset(spec.n, spec.p, &x, y)?;
    let support = SubspaceModel::groups(map.clone(), active)?;
    Ok((
        data,
        GroundTruth {
            theta: theta.into_iter().map(T::lit).collect(),
            support,
        },
        map,
    ))
}

/// Errors-in-variables model: `y` comes from the clean design `X`, the
/// observed design is `Z = X + W` with `W ~ N(0, gamma_w I)`. Returns
/// `(Z-dataset, truth, hidden X-dataset)`.
pub fn gen_corrupted_covariates<T: Scalar>(spec: &SynthSpec) -> Result<(Dataset<T>, GroundTruth<T>, Dataset<T>)> {
    let (clean, truth) = gen_sparse_linear::<T>(spec)?;
    let (n, p) = (spec.n, spec.p);
    let sd = spec.noise_scale.sqrt();
    let mut z = clean.to_dense_values();
    for (i, row) in z.chunks_mut(p).enumerate() {
        let mut rng = stream(spec.seed, 1 + (n + i) as u64);
        for v in row.iter_mut() {
            let w: f64 = rng.sample(StandardNormal);
            *v = *v + T::lit(sd * w);
        }
    }
    let observed = Dataset::dense(n, p, z, clean.responses().to_vec())?;
    Ok((observed, truth, clean))
}
