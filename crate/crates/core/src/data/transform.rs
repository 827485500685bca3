use crate::error::{Error, Result};
use crate::problem::Dataset;
use crate::regularizers::GroupMap;
use crate::scalar::Scalar;

/// Columns whose norm exceeds `sqrt(n)` by more than this relative margin are
/// rescaled. The margin makes the operation idempotent under rounding.
const NORMALIZE_SLACK: f64 = 1e-12;

/// Rescales every column with `|X_j| / sqrt(n) > 1` to equality. Returns the
/// scaled dataset and the per-column factors (1 for untouched columns); a
/// coefficient `theta_j` of the original data corresponds to
/// `theta_j / scale_j` on the scaled data.
pub fn column_normalize<T: Scalar>(data: &Dataset<T>) -> Result<(Dataset<T>, Vec<T>)> {
    let n = T::from_usize(data.n()).unwrap();
    let limit = T::one() + T::lit(NORMALIZE_SLACK);
    let scales: Vec<T> = data
        .column_norms_sq()
        .into_iter()
        .map(|sq| {
            let r = (sq / n).sqrt();
            if r > limit {
                T::one() / r
            } else {
                T::one()
            }
        })
        .collect();
    let mut out = data.clone();
    out.scale_columns(&scales)?;
    Ok((out, scales))
}

/// Group variant: every block whose operator norm `|||X_G|||_2 / sqrt(n)`
/// exceeds 1 is divided by it. The norm is the square root of the largest
/// eigenvalue of the block Gram matrix, found by power iteration.
pub fn group_normalize<T: Scalar>(data: &Dataset<T>, map: &GroupMap) -> Result<(Dataset<T>, Vec<T>)> {
    map.validate(data.p())?;
    let n = T::from_usize(data.n()).unwrap();
    let limit = T::one() + T::lit(NORMALIZE_SLACK);
    let mut scales = vec![T::one(); data.p()];
    for block in map.groups() {
        let q = block.len();
        let mut gram = vec![T::zero(); q * q];
        for i in 0..data.n() {
            let row = data.row(i).to_dense(data.p());
            for a in 0..q {
                let va = row[block[a]];
                if va == T::zero() {
                    continue;
                }
                for b in 0..q {
                    gram[a * q + b] = gram[a * q + b] + va * row[block[b]];
                }
            }
        }
        gram.iter_mut().for_each(|g| *g = *g / n);
        let r = power_iteration(&gram, q).sqrt();
        if r > limit {
            for &j in block {
                scales[j] = T::one() / r;
            }
        }
    }
    let mut out = data.clone();
    out.scale_columns(&scales)?;
    Ok((out, scales))
}

/// Largest eigenvalue of a symmetric positive semidefinite `q x q` matrix.
fn power_iteration<T: Scalar>(a: &[T], q: usize) -> T {
    let mut v: Vec<T> = (0..q).map(|j| T::one() + T::lit(j as f64 * 0.1)).collect();
    let mut est = T::zero();
    for _ in 0..1000 {
        let norm = v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
        if norm == T::zero() {
            return T::zero();
        }
        v.iter_mut().for_each(|x| *x = *x / norm);
        let w: Vec<T> = (0..q)
            .map(|r| (0..q).fold(T::zero(), |s, c| s + a[r * q + c] * v[c]))
            .collect();
        let next = w.iter().zip(&v).fold(T::zero(), |s, (&x, &y)| s + x * y);
        v = w;
        if (next - est).abs() <= T::epsilon() * next.abs() {
            return next;
        }
        est = next;
    }
    est
}

/// Centers each column and scales it to unit (population) variance. Constant
/// columns become zero.
pub fn standardize<T: Scalar>(data: &Dataset<T>) -> Result<Dataset<T>> {
    let (n, p) = (data.n(), data.p());
    let nf = T::from_usize(n).unwrap();
    let mut x = data.to_dense_values();
    for j in 0..p {
        let mean = (0..n).fold(T::zero(), |s, i| s + x[i * p + j]) / nf;
        let var = (0..n).fold(T::zero(), |s, i| {
            let d = x[i * p + j] - mean;
            s + d * d
        }) / nf;
        let sd = var.sqrt();
        for i in 0..n {
            let v = &mut x[i * p + j];
            *v = if sd > T::zero() { (*v - mean) / sd } else { T::zero() };
        }
    }
    Dataset::dense(n, p, x, data.responses().to_vec())
}

/// Replaces each feature `x_j` by the group `(x_j, x_j^2, x_j^3)`. Only
/// degree 3 is supported. The result is not normalized; follow with
/// [`group_normalize`] or [`column_normalize`].
pub fn polynomial_group_expand<T: Scalar>(data: &Dataset<T>, degree: usize) -> Result<(Dataset<T>, GroupMap)> {
    if degree != 3 {
        return Err(Error::InvalidParameter(format!(
            "polynomial degree {degree} unsupported (only 3)"
        )));
    }
    if data.is_sparse() {
        return Err(Error::InvalidDataset("polynomial expansion needs a dense dataset".into()));
    }
    let (n, p) = (data.n(), data.p());
    let x = data.to_dense_values();
    let mut out = Vec::with_capacity(n * p * 3);
    for row in x.chunks(p) {
        for &v in row {
            out.extend_from_slice(&[v, v * v, v * v * v]);
        }
    }
    let expanded = Dataset::dense(n, 3 * p, out, data.responses().to_vec())?;
    Ok((expanded, GroupMap::contiguous(3 * p, 3)?))
}
