//! Composite objective data model: the sample, the loss/penalty pair and the
//! side constraint shared by every solver and diagnostic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{self, LossKind};
use crate::regularizers::Regularizer;
use crate::scalar::{self, Scalar};

/// Relative slack applied to the side constraint when checking feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Row storage of a design matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Rows<T> {
    /// Row-major `n * p` values.
    Dense(Vec<T>),
    /// Compressed sparse rows; indices sorted and unique within each row.
    Sparse {
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<T>,
    },
}

/// Borrowed view of a single feature vector.
#[derive(Debug, Clone, Copy)]
pub enum RowView<'a, T> {
    Dense(&'a [T]),
    Sparse { indices: &'a [usize], values: &'a [T] },
}

impl<T: Scalar> RowView<'_, T> {
    #[inline]
    pub fn dot(&self, theta: &[T]) -> T {
        match *self {
            RowView::Dense(x) => scalar::dot(x, theta),
            RowView::Sparse { indices, values } => {
                let mut acc = T::zero();
                for (&j, &v) in indices.iter().zip(values) {
                    acc = acc + v * theta[j];
                }
                acc
            }
        }
    }

    /// `out += a * x`.
    #[inline]
    pub fn axpy(&self, a: T, out: &mut [T]) {
        match *self {
            RowView::Dense(x) => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = *o + a * v;
                }
            }
            RowView::Sparse { indices, values } => {
                for (&j, &v) in indices.iter().zip(values) {
                    out[j] = out[j] + a * v;
                }
            }
        }
    }

    pub fn norm_sq(&self) -> T {
        match *self {
            RowView::Dense(x) => scalar::norm_sq(x),
            RowView::Sparse { values, .. } => scalar::norm_sq(values),
        }
    }

    /// Materializes the row as a dense vector of length `p`.
    pub fn to_dense(&self, p: usize) -> Vec<T> {
        let mut out = vec![T::zero(); p];
        self.axpy(T::one(), &mut out);
        out
    }
}

/// An `n x p` design matrix with its response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    n: usize,
    p: usize,
    rows: Rows<T>,
    responses: Vec<T>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dense dataset from row-major values.
    pub fn dense(n: usize, p: usize, values: Vec<T>, responses: Vec<T>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidDataset("n and p must be at least 1".into()));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: values.len(),
            });
        }
        if responses.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: responses.len(),
            });
        }
        Ok(Self {
            n,
            p,
            rows: Rows::Dense(values),
            responses,
        })
    }

    /// Builds a dense dataset from a list of rows.
    pub fn from_rows(rows: &[Vec<T>], responses: Vec<T>) -> Result<Self> {
        let p = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidDataset("rows of unequal length".into()));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::dense(rows.len(), p, values, responses)
    }

    /// Builds a sparse dataset. Each row is a list of `(index, value)` pairs;
    /// pairs are sorted here, duplicates and out-of-range indices are rejected.
    pub fn sparse(p: usize, rows: Vec<Vec<(usize, T)>>, responses: Vec<T>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || p == 0 {
            return Err(Error::InvalidDataset("n and p must be at least 1".into()));
        }
        if responses.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: responses.len(),
            });
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidDataset(format!(
                        "duplicate index {} in row {i}",
                        w[0].0
                    )));
                }
            }
            for (j, v) in row {
                if j >= p {
                    return Err(Error::InvalidDataset(format!(
                        "index {j} in row {i} exceeds dimension {p}"
                    )));
                }
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            n,
            p,
            rows: Rows::Sparse {
                indptr,
                indices,
                values,
            },
            responses,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn rows(&self) -> &Rows<T> {
        &self.rows
    }

    pub fn responses(&self) -> &[T] {
        &self.responses
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.rows, Rows::Sparse { .. })
    }

    #[inline]
    pub fn row(&self, i: usize) -> RowView<'_, T> {
        match &self.rows {
            Rows::Dense(v) => RowView::Dense(&v[i * self.p..(i + 1) * self.p]),
            Rows::Sparse {
                indptr,
                indices,
                values,
            } => {
                let (a, b) = (indptr[i], indptr[i + 1]);
                RowView::Sparse {
                    indices: &indices[a..b],
                    values: &values[a..b],
                }
            }
        }
    }

    /// `X theta`.
    pub fn margins(&self, theta: &[T]) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).dot(theta)).collect()
    }

    /// `X^T w`.
    pub fn transpose_mul(&self, w: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.p];
        for (i, &wi) in w.iter().enumerate() {
            if wi != T::zero() {
                self.row(i).axpy(wi, &mut out);
            }
        }
        out
    }

    /// Squared Euclidean norm of every column.
    pub fn column_norms_sq(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.p];
        for i in 0..self.n {
            match self.row(i) {
                RowView::Dense(x) => {
                    for (o, &v) in out.iter_mut().zip(x) {
                        *o = *o + v * v;
                    }
                }
                RowView::Sparse { indices, values } => {
                    for (&j, &v) in indices.iter().zip(values) {
                        out[j] = out[j] + v * v;
                    }
                }
            }
        }
        out
    }

    /// Multiplies column `j` by `scales[j]`.
    pub fn scale_columns(&mut self, scales: &[T]) -> Result<()> {
        if scales.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: scales.len(),
            });
        }
        match &mut self.rows {
            Rows::Dense(v) => {
                for row in v.chunks_mut(self.p) {
                    for (x, &s) in row.iter_mut().zip(scales) {
                        *x = *x * s;
                    }
                }
            }
            Rows::Sparse {
                indices, values, ..
            } => {
                for (&j, x) in indices.iter().zip(values.iter_mut()) {
                    *x = *x * scales[j];
                }
            }
        }
        Ok(())
    }

    /// Replaces the response vector.
    pub fn with_responses(mut self, responses: Vec<T>) -> Result<Self> {
        if responses.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: responses.len(),
            });
        }
        self.responses = responses;
        Ok(self)
    }

    /// Returns a copy with rows reordered by `perm` (row `k` of the result is
    /// row `perm[k]` of `self`).
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        let responses = perm.iter().map(|&i| self.responses[i]).collect();
        match &self.rows {
            Rows::Dense(_) => {
                let mut values = Vec::with_capacity(self.n * self.p);
                for &i in perm {
                    if let RowView::Dense(x) = self.row(i) {
                        values.extend_from_slice(x);
                    }
                }
                Self::dense(self.n, self.p, values, responses)
            }
            Rows::Sparse { .. } => {
                let rows = perm
                    .iter()
                    .map(|&i| match self.row(i) {
                        RowView::Sparse { indices, values } => {
                            indices.iter().copied().zip(values.iter().copied()).collect()
                        }
                        RowView::Dense(_) => unreachable!(),
                    })
                    .collect();
                Self::sparse(self.p, rows, responses)
            }
        }
    }

    /// Dense row-major copy of the design matrix.
    pub fn to_dense_values(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n * self.p);
        for i in 0..self.n {
            out.extend(self.row(i).to_dense(self.p));
        }
        out
    }

    pub(crate) fn check_dim(&self, theta: &[T]) -> Result<()> {
        if theta.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: theta.len(),
            });
        }
        Ok(())
    }
}

/// A finite-sum composite problem: loss, penalty, penalty weight and the
/// side-constraint radius.
///
/// The concavity parameter `mu` is derived, never supplied: it is the sum of
/// the loss shift (`gamma_w` for corrected quadratic loss) and the penalty
/// shift (`1/(zeta-1)` for SCAD, `1/b` for MCP). Problems with `mu == 0` are
/// convex and are solved through the norm-ball formulation; the others go
/// through the convexified penalty.
#[derive(Debug, Clone)]
pub struct CompositeProblem<T: Scalar> {
    dataset: Arc<Dataset<T>>,
    loss: LossKind<T>,
    regularizer: Regularizer<T>,
    lambda: T,
    rho: T,
}

impl<T: Scalar> CompositeProblem<T> {
    pub fn new(
        dataset: Arc<Dataset<T>>,
        loss: LossKind<T>,
        regularizer: Regularizer<T>,
        lambda: T,
        rho: T,
    ) -> Result<Self> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if !(rho > T::zero()) {
            return Err(Error::InvalidParameter(format!("rho must be > 0, got {rho}")));
        }
        loss.validate()?;
        regularizer.validate(dataset.p())?;
        if regularizer.is_folded() && lambda <= T::zero() {
            return Err(Error::InvalidParameter(
                "folded-concave penalties need lambda > 0".into(),
            ));
        }
        Ok(Self {
            dataset,
            loss,
            regularizer,
            lambda,
            rho,
        })
    }

    pub fn dataset(&self) -> &Dataset<T> {
        &self.dataset
    }

    pub fn dataset_arc(&self) -> &Arc<Dataset<T>> {
        &self.dataset
    }

    pub fn loss(&self) -> &LossKind<T> {
        &self.loss
    }

    pub fn regularizer(&self) -> &Regularizer<T> {
        &self.regularizer
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    /// Total concavity parameter.
    pub fn mu(&self) -> T {
        self.loss.concavity() + self.regularizer.concavity()
    }

    pub fn is_convex(&self) -> bool {
        self.mu() == T::zero()
    }

    /// Copy of the problem with a different penalty weight.
    pub fn with_lambda(&self, lambda: T) -> Result<Self> {
        Self::new(
            self.dataset.clone(),
            self.loss.clone(),
            self.regularizer.clone(),
            lambda,
            self.rho,
        )
    }

    /// Copy of the problem with a different constraint radius.
    pub fn with_rho(&self, rho: T) -> Result<Self> {
        Self::new(
            self.dataset.clone(),
            self.loss.clone(),
            self.regularizer.clone(),
            self.lambda,
            rho,
        )
    }

    /// `F(theta)`, the mean of the convex loss components (without the
    /// `-gamma_w/2 |theta|^2` correction).
    pub fn smooth_value(&self, theta: &[T]) -> Result<T> {
        losses::loss_value(&self.loss, &self.dataset, theta)
    }

    /// Value of the penalty in its original form (`lambda psi` or `g_{lambda,mu}`).
    pub fn penalty_value(&self, theta: &[T]) -> T {
        self.regularizer.penalty_value(self.lambda, theta)
    }

    /// Constraint norm: `psi` for convex penalties, the convexified `g_lambda`
    /// for SCAD/MCP.
    pub fn constraint_norm(&self, theta: &[T]) -> T {
        self.regularizer.constraint_norm(self.lambda, theta)
    }

    /// `G(theta) = F(theta) - (gamma_w/2)|theta|^2 + penalty(theta)`.
    pub fn objective_value(&self, theta: &[T]) -> Result<T> {
        self.dataset.check_dim(theta)?;
        let mut g = self.smooth_value(theta)? + self.penalty_value(theta);
        let shift = self.loss.concavity();
        if shift > T::zero() {
            g = g - shift * T::lit(0.5) * scalar::norm_sq(theta);
        }
        if !g.is_finite() {
            return Err(Error::NonFinite("objective_value"));
        }
        Ok(g)
    }

    /// True iff the constraint norm is at most `rho (1 + 1e-9)`.
    pub fn feasibility_check(&self, theta: &[T]) -> Result<bool> {
        self.dataset.check_dim(theta)?;
        Ok(self.constraint_norm(theta) <= self.rho * (T::one() + T::lit(FEASIBILITY_TOL)))
    }
}

/// Free-function form of [`CompositeProblem::objective_value`].
pub fn objective_value<T: Scalar>(problem: &CompositeProblem<T>, theta: &[T]) -> Result<T> {
    problem.objective_value(theta)
}

/// Free-function form of [`CompositeProblem::feasibility_check`].
pub fn feasibility_check<T: Scalar>(problem: &CompositeProblem<T>, theta: &[T]) -> Result<bool> {
    problem.feasibility_check(theta)
}

/// Serializable description of a problem's ingredients (for manifests).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemSummary {
    pub n: usize,
    pub p: usize,
    pub loss: String,
    pub regularizer: String,
    pub lambda: f64,
    pub rho: f64,
    pub mu: f64,
}

impl<T: Scalar> From<&CompositeProblem<T>> for ProblemSummary {
    fn from(p: &CompositeProblem<T>) -> Self {
        Self {
            n: p.dataset.n(),
            p: p.dataset.p(),
            loss: p.loss.name().to_string(),
            regularizer: p.regularizer.name().to_string(),
            lambda: p.lambda.to_f64_lossy(),
            rho: p.rho.to_f64_lossy(),
            mu: p.mu().to_f64_lossy(),
        }
    }
}
