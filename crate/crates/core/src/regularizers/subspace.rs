use serde::{Deserialize, Serialize};

use super::GroupMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Model subspace `M` (taken equal to its closure `M-bar`) of a decomposable
/// penalty: a coordinate support for l1-type penalties, or a set of active
/// groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubspaceModel {
    Support { indices: Vec<usize> },
    Groups { map: GroupMap, active: Vec<usize> },
}

impl SubspaceModel {
    pub fn support(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SubspaceModel::Support { indices }
    }

    pub fn groups(map: GroupMap, mut active: Vec<usize>) -> Result<Self> {
        active.sort_unstable();
        active.dedup();
        if let Some(&g) = active.iter().find(|&&g| g >= map.len()) {
            return Err(Error::InvalidParameter(format!("group {g} does not exist")));
        }
        Ok(SubspaceModel::Groups { map, active })
    }

    /// Support of the nonzero entries of `theta`.
    pub fn support_of<T: Scalar>(theta: &[T]) -> Self {
        Self::support(
            theta
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != T::zero())
                .map(|(j, _)| j)
                .collect(),
        )
    }

    /// Groups holding at least one nonzero entry of `theta`.
    pub fn groups_of<T: Scalar>(map: GroupMap, theta: &[T]) -> Self {
        let active = map
            .groups()
            .iter()
            .enumerate()
            .filter(|(_, b)| b.iter().any(|&j| theta[j] != T::zero()))
            .map(|(g, _)| g)
            .collect();
        SubspaceModel::Groups { map, active }
    }

    /// `r` or `s_G`.
    pub fn cardinality(&self) -> usize {
        match self {
            SubspaceModel::Support { indices } => indices.len(),
            SubspaceModel::Groups { active, .. } => active.len(),
        }
    }

    fn mask(&self, p: usize) -> Result<Vec<bool>> {
        let mut mask = vec![false; p];
        match self {
            SubspaceModel::Support { indices } => {
                for &j in indices {
                    if j >= p {
                        return Err(Error::DimensionMismatch { expected: p, got: j + 1 });
                    }
                    mask[j] = true;
                }
            }
            SubspaceModel::Groups { map, active } => {
                map.validate(p)?;
                for &g in active {
                    for &j in &map.groups()[g] {
                        mask[j] = true;
                    }
                }
            }
        }
        Ok(mask)
    }
}

/// `H(M-bar)`: `sqrt(r)` for supports, `sqrt(s_G)` for group supports.
pub fn subspace_compatibility(sub: &SubspaceModel) -> f64 {
    (sub.cardinality() as f64).sqrt()
}

/// Splits `theta` into its components in `M-bar` and `M-bar^perp`.
pub fn subspace_split<T: Scalar>(theta: &[T], sub: &SubspaceModel) -> Result<(Vec<T>, Vec<T>)> {
    let mask = sub.mask(theta.len())?;
    let inside = theta
        .iter()
        .zip(&mask)
        .map(|(&v, &m)| if m { v } else { T::zero() })
        .collect();
    let outside = theta
        .iter()
        .zip(&mask)
        .map(|(&v, &m)| if m { T::zero() } else { v })
        .collect();
    Ok((inside, outside))
}
