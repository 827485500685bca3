//! Penalties: values, dual norms, decomposition metadata and the
//! norm-ball constrained proximal operator.

mod folded;
mod prox;
mod subspace;

pub use folded::{Folded, FoldedKind};
pub use prox::{constrained_prox, constrained_prox_into, PROX_MAX_ITER, PROX_TOL};
pub use subspace::{subspace_compatibility, subspace_split, SubspaceModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Partition of the coordinates into disjoint blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupMap {
    groups: Vec<Vec<usize>>,
}

impl GroupMap {
    /// Validates that `groups` partition `0..p`.
    pub fn new(p: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let map = Self { groups };
        map.validate(p)?;
        Ok(map)
    }

    /// `p / size` contiguous blocks of `size` coordinates.
    pub fn contiguous(p: usize, size: usize) -> Result<Self> {
        if size == 0 || p % size != 0 {
            return Err(Error::InvalidParameter(format!(
                "group size {size} does not divide dimension {p}"
            )));
        }
        Self::new(p, (0..p / size).map(|g| (g * size..(g + 1) * size).collect()).collect())
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let mut seen = vec![false; p];
        for (g, block) in self.groups.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidParameter(format!("group {g} is empty")));
            }
            for &j in block {
                if j >= p {
                    return Err(Error::InvalidParameter(format!(
                        "group {g} holds index {j} outside dimension {p}"
                    )));
                }
                if seen[j] {
                    return Err(Error::InvalidParameter(format!(
                        "coordinate {j} belongs to more than one group"
                    )));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidParameter(format!(
                "coordinate {j} is not covered by any group"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn block_norm<T: Scalar>(&self, g: usize, v: &[T]) -> T {
        self.groups[g].iter().fold(T::zero(), |a, &j| a + v[j] * v[j]).sqrt()
    }

    /// `sum_g ||v_g||_2`.
    pub fn norm_12<T: Scalar>(&self, v: &[T]) -> T {
        (0..self.len()).fold(T::zero(), |a, g| a + self.block_norm(g, v))
    }
}

/// Supported penalties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer<T> {
    /// `lambda ||theta||_1`
    L1,
    /// `lambda sum_g ||theta_g||_2` (group Lasso).
    Group(GroupMap),
    /// SCAD with shape `zeta > 2`.
    Scad { shape: T },
    /// MCP with shape `b > 0`.
    Mcp { shape: T },
}

impl<T: Scalar> Regularizer<T> {
    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            Regularizer::L1 => Ok(()),
            Regularizer::Group(map) => map.validate(p),
            Regularizer::Scad { shape } => {
                if *shape > T::lit(2.0) && shape.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("SCAD needs zeta > 2, got {shape}")))
                }
            }
            Regularizer::Mcp { shape } => {
                if *shape > T::zero() && shape.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("MCP needs b > 0, got {shape}")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::L1 => "l1",
            Regularizer::Group(_) => "group",
            Regularizer::Scad { .. } => "scad",
            Regularizer::Mcp { .. } => "mcp",
        }
    }

    /// SCAD or MCP.
    pub fn is_folded(&self) -> bool {
        matches!(self, Regularizer::Scad { .. } | Regularizer::Mcp { .. })
    }

    /// Concavity contributed by the penalty: `1/(zeta-1)`, `1/b`, or 0.
    pub fn concavity(&self) -> T {
        match *self {
            Regularizer::Scad { shape } => T::one() / (shape - T::one()),
            Regularizer::Mcp { shape } => T::one() / shape,
            _ => T::zero(),
        }
    }

    pub(crate) fn folded(&self, lambda: T) -> Option<Folded<T>> {
        match *self {
            Regularizer::Scad { shape } => Some(Folded::scad(lambda, shape)),
            Regularizer::Mcp { shape } => Some(Folded::mcp(lambda, shape)),
            _ => None,
        }
    }

    /// Penalty in its original form.
    pub fn penalty_value(&self, lambda: T, theta: &[T]) -> T {
        match self {
            Regularizer::L1 => lambda * scalar::norm1(theta),
            Regularizer::Group(map) => lambda * map.norm_12(theta),
            _ => {
                if lambda == T::zero() {
                    return T::zero();
                }
                let f = self.folded(lambda).unwrap();
                theta.iter().fold(T::zero(), |a, &t| a + f.value(t))
            }
        }
    }

    /// Norm defining the side constraint: `psi` for convex penalties and the
    /// convexified `g_lambda` for folded ones.
    pub fn constraint_norm(&self, lambda: T, theta: &[T]) -> T {
        match self {
            Regularizer::L1 => scalar::norm1(theta),
            Regularizer::Group(map) => map.norm_12(theta),
            _ => {
                self.folded(lambda).unwrap().convexified_sum(theta)
            }
        }
    }

    /// Dual norm of `psi`: `l_inf` for l1, max block `l2` norm for groups.
    pub fn dual_norm(&self, v: &[T]) -> Result<T> {
        match self {
            Regularizer::L1 => Ok(scalar::norm_inf(v)),
            Regularizer::Group(map) => {
                Ok((0..map.len()).fold(T::zero(), |a, g| a.max(map.block_norm(g, v))))
            }
            _ => Err(Error::Configuration(
                "dual norm is defined for the convex penalties only; use the l_inf norm for SCAD/MCP".into(),
            )),
        }
    }
}

/// `sum_j (g_{lambda,mu}(theta_j) + (mu/2) theta_j^2) / lambda`; `mu` must be
/// the penalty's own concavity.
pub fn convexified_penalty<T: Scalar>(reg: &Regularizer<T>, lambda: T, mu: T, theta: &[T]) -> Result<T> {
    if !reg.is_folded() {
        return Err(Error::Configuration("convexified penalty needs SCAD or MCP".into()));
    }
    let own = reg.concavity();
    if (own - mu).abs() > T::lit(1e-12) * own.abs().max(T::one()) {
        return Err(Error::InvalidParameter(format!(
            "mu = {mu} does not match the penalty's concavity {own}"
        )));
    }
    if lambda <= T::zero() {
        return Err(Error::InvalidParameter("lambda must be > 0".into()));
    }
    Ok(reg.constraint_norm(lambda, theta))
}

/// Free-function form of [`Regularizer::penalty_value`].
pub fn penalty_value<T: Scalar>(reg: &Regularizer<T>, lambda: T, theta: &[T]) -> T {
    reg.penalty_value(lambda, theta)
}

/// Free-function form of [`Regularizer::dual_norm`].
pub fn dual_norm<T: Scalar>(reg: &Regularizer<T>, v: &[T]) -> Result<T> {
    reg.dual_norm(v)
}
