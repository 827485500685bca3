//! Turns an [`ExperimentConfig`] into a composite problem.

use std::sync::Arc;

use proxsvrg::data::{
    column_normalize, gen_corrupted_covariates, gen_group_sparse, gen_sparse_linear, group_normalize,
    polynomial_group_expand, read_libsvm, standardize, Covariance, GroundTruth, SynthSpec,
};
use proxsvrg::theory::{lambda_lower_bound, BoundModel, BoundParams};
use proxsvrg::{Dataset64, GroupMap, LossKind, Problem64, Regularizer};

use crate::config::{ExperimentConfig, LossName, Preprocess, ProblemKind, RegularizerName};
use crate::error::{BenchError, Result};

/// A problem ready to solve, with what is known about how it was made.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: Problem64,
    /// Planted parameter in the coordinates of the (normalized) design.
    pub truth: Option<GroundTruth<f64>>,
    pub spec: Option<SynthSpec>,
    pub covariance: Option<Covariance>,
    /// Clean design of the errors-in-variables model, before normalization.
    pub hidden: Option<Dataset64>,
    pub group_map: Option<GroupMap>,
    /// Columns rescaled by normalization.
    pub rescaled_columns: usize,
    pub rho_defaulted: bool,
    pub lambda_defaulted: bool,
}

impl ExperimentConfig {
    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let seed = self.data_seed();
        let spec = match self.problem {
            ProblemKind::Lasso | ProblemKind::Scad | ProblemKind::Mcp => SynthSpec {
                variance: self.variance,
                noise: self.noise,
                ..SynthSpec::lasso(self.n, self.p, self.r, self.b, seed)
            },
            ProblemKind::Corrected => SynthSpec {
                variance: self.variance,
                noise: self.noise,
                b: self.b,
                ..SynthSpec::corrupted(self.n, self.p, self.r, self.gamma_w, seed)
            },
            ProblemKind::Group => {
                let (q, ng) = match (self.group_size, self.num_groups) {
                    (Some(q), Some(ng)) => (q, ng),
                    (Some(q), None) if q > 0 && self.p % q == 0 => (q, self.p / q),
                    _ => {
                        return Err(BenchError::validation(format!(
                            "group problems need group_size and num_groups with q * N_G = p (p = {})",
                            self.p
                        )))
                    }
                };
                if q * ng != self.p {
                    return Err(BenchError::validation(format!(
                        "group geometry requires q * N_G = p, got {q} * {ng} = {} != p = {}",
                        q * ng,
                        self.p
                    )));
                }
                SynthSpec {
                    variance: self.variance,
                    noise: self.noise,
                    ..SynthSpec::group(self.n, q, ng, self.r, self.b, seed)
                }
            }
            ProblemKind::File => return Err(BenchError::validation("file problems have no synthetic spec")),
        };
        spec.validate().map_err(|e| BenchError::validation(e.to_string()))?;
        Ok(spec)
    }

    /// Corollary whose regularization bound applies, if any.
    pub fn bound_model(&self) -> Option<BoundModel> {
        match self.problem {
            ProblemKind::Lasso => Some(BoundModel::Lasso),
            ProblemKind::Group => Some(BoundModel::Group),
            ProblemKind::Scad => Some(BoundModel::Scad),
            ProblemKind::Corrected => Some(BoundModel::Corrected),
            ProblemKind::Mcp | ProblemKind::File => None,
        }
    }
}

/// Raw output of a synthetic generator.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub data: Dataset64,
    pub truth: GroundTruth<f64>,
    pub group_map: Option<GroupMap>,
    /// Clean design behind the observed covariates.
    pub hidden: Option<Dataset64>,
}

pub fn generate(kind: ProblemKind, spec: &SynthSpec) -> Result<Synthetic> {
    Ok(match kind {
        ProblemKind::Group => {
            let (data, truth, map) = gen_group_sparse::<f64>(spec)?;
            Synthetic {
                data,
                truth,
                group_map: Some(map),
                hidden: None,
            }
        }
        ProblemKind::Corrected => {
            let (data, truth, x) = gen_corrupted_covariates::<f64>(spec)?;
            Synthetic {
                data,
                truth,
                group_map: None,
                hidden: Some(x),
            }
        }
        ProblemKind::File => return Err(BenchError::validation("file problems cannot be generated")),
        _ => {
            let (data, truth) = gen_sparse_linear::<f64>(spec)?;
            Synthetic {
                data,
                truth,
                group_map: None,
                hidden: None,
            }
        }
    })
}

/// Generates or loads the data, normalizes it when configured, and fixes
/// `lambda` and `rho`.
///
/// Without an explicit `lambda`, the Lasso and group Lasso use the smallest
/// weight their error bounds allow; other problems require one. Without `rho`, synthetic problems use twice the constraint norm of
/// the planted parameter.
pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance> {
    cfg.validate()?;
    if cfg.problem == ProblemKind::File {
        return build_file_instance(cfg);
    }
    let spec = cfg.synth_spec()?;
    let covariance = spec.covariance()?;
    let Synthetic {
        data: raw,
        truth,
        group_map,
        hidden,
    } = generate(cfg.problem, &spec)?;
    let (data, scales) = if !cfg.normalize {
        let p = raw.p();
        (raw, vec![1.0; p])
    } else if let Some(map) = &group_map {
        group_normalize(&raw, map)?
    } else {
        column_normalize(&raw)?
    };
    let rescaled_columns = scales.iter().filter(|&&s| s != 1.0).count();
    let truth = GroundTruth {
        theta: truth.theta.iter().zip(&scales).map(|(t, s)| t / s).collect(),
        support: truth.support,
    };
    let loss = match cfg.problem {
        ProblemKind::Corrected => LossKind::CorrectedQuadratic { noise_scale: cfg.gamma_w },
        _ => LossKind::Squared,
    };
    let reg = match cfg.problem {
        ProblemKind::Group => Regularizer::Group(group_map.clone().expect("group map")),
        ProblemKind::Scad => Regularizer::Scad { shape: cfg.shape },
        ProblemKind::Mcp => Regularizer::Mcp { shape: cfg.shape },
        _ => Regularizer::L1,
    };
    let (lambda, lambda_defaulted) = match (cfg.lambda, cfg.problem) {
        (Some(l), _) => (l, false),
        (None, ProblemKind::Lasso | ProblemKind::Group) => {
            let params = BoundParams {
                p: Some(spec.p),
                noise: Some(spec.noise),
                group_size: spec.group_size,
                num_groups: spec.num_groups,
                ..BoundParams::new(spec.n)
            };
            (lambda_lower_bound(cfg.bound_model().unwrap(), &params)?, true)
        }
        (None, _) => return Err(BenchError::validation("this problem needs an explicit lambda")),
    };
    let data = Arc::new(data);
    // rho is provisional until the constraint norm of the truth is known
    let provisional = Problem64::new(data, loss, reg, lambda, f64::INFINITY)?;
    let (rho, rho_defaulted) = match cfg.rho {
        Some(r) => (r, false),
        None => {
            let r = 2.0 * provisional.constraint_norm(&truth.theta);
            if !(r > 0.0) {
                return Err(BenchError::validation(
                    "planted parameter is zero; set rho explicitly",
                ));
            }
            (r, true)
        }
    };
    Ok(Instance {
        problem: provisional.with_rho(rho)?,
        truth: Some(truth),
        spec: Some(spec),
        covariance: Some(covariance),
        hidden,
        group_map,
        rescaled_columns,
        rho_defaulted,
        lambda_defaulted,
    })
}

fn build_file_instance(cfg: &ExperimentConfig) -> Result<Instance> {
    let path = cfg.data.as_ref().expect("validated");
    let raw: Dataset64 = read_libsvm(path, cfg.labels, None)?;
    let (raw, expansion_map) = match cfg.preprocess {
        Preprocess::None => (raw, None),
        Preprocess::Poly3 => {
            let dense = standardize(&raw)?;
            let (e, map) = polynomial_group_expand(&dense, 3)?;
            (e, Some(map))
        }
    };
    let reg_name = cfg
        .regularizer
        .unwrap_or(if expansion_map.is_some() { RegularizerName::Group } else { RegularizerName::L1 });
    let group_map = match reg_name {
        RegularizerName::Group => Some(match (expansion_map, cfg.group_size) {
            (Some(m), _) => m,
            (None, Some(q)) => GroupMap::contiguous(raw.p(), q)
                .map_err(|e| BenchError::validation(format!("group_size {q} does not partition p = {}: {e}", raw.p())))?,
            (None, None) => return Err(BenchError::validation("group regularizer needs group_size or preprocess = poly3")),
        }),
        _ => None,
    };
    let (data, scales) = match (&group_map, cfg.normalize) {
        (_, false) => {
            let p = raw.p();
            (raw, vec![1.0; p])
        }
        (Some(map), true) => group_normalize(&raw, map)?,
        (None, true) => column_normalize(&raw)?,
    };
    let loss = match cfg.loss.unwrap_or(LossName::Squared) {
        LossName::Squared => LossKind::Squared,
        LossName::Logistic => LossKind::Logistic,
        LossName::Corrected => LossKind::CorrectedQuadratic { noise_scale: cfg.gamma_w },
    };
    let reg = match reg_name {
        RegularizerName::L1 => Regularizer::L1,
        RegularizerName::Group => Regularizer::Group(group_map.clone().unwrap()),
        RegularizerName::Scad => Regularizer::Scad { shape: cfg.shape },
        RegularizerName::Mcp => Regularizer::Mcp { shape: cfg.shape },
    };
    let lambda = cfg
        .lambda
        .ok_or_else(|| BenchError::validation("file problems need an explicit lambda"))?;
    let rho = cfg
        .rho
        .ok_or_else(|| BenchError::validation("file problems need an explicit rho"))?;
    Ok(Instance {
        problem: Problem64::new(Arc::new(data), loss, reg, lambda, rho)?,
        truth: None,
        spec: None,
        covariance: None,
        hidden: None,
        group_map,
        rescaled_columns: scales.iter().filter(|&&s| s != 1.0).count(),
        rho_defaulted: false,
        lambda_defaulted: false,
    })
}
