//! Small dense linear-algebra helpers shared by the optimizer blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Feature rows mapped through a transform: `features * lᵀ` (Q×P).
pub(crate) fn transformed<T: Scalar>(features: &DMatrix<T>, l: &DMatrix<T>) -> DMatrix<T> {
    features * l.transpose()
}

/// All pairwise squared Euclidean distances between the rows of `y`,
/// computed through the Gram matrix. Tiny negative round-off is clamped.
pub(crate) fn pair_sq_dists<T: Scalar>(y: &DMatrix<T>) -> DMatrix<T> {
    let q = y.nrows();
    let gram = y * y.transpose();
    let mut out = DMatrix::zeros(q, q);
    for m in 0..q {
        for n in (m + 1)..q {
            let d = gram[(m, m)] + gram[(n, n)] - (gram[(m, n)] + gram[(m, n)]);
            let d = if d > T::zero() { d } else { T::zero() };
            out[(m, n)] = d;
            out[(n, m)] = d;
        }
    }
    out
}

pub(crate) fn finite<T: Scalar>(m: &DMatrix<T>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Full SVD with an iteration cap, failing on non-finite input.
pub(crate) fn svd_checked<T: Scalar>(
    m: &DMatrix<T>,
) -> Result<SVD<T, nalgebra::Dyn, nalgebra::Dyn>> {
    if !finite(m) {
        return Err(Error::SvdFailure("non-finite input matrix".into()));
    }
    SVD::try_new(m.clone(), true, true, T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::SvdFailure("iteration limit exceeded".into()))
}

/// Singular values only.
pub(crate) fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Result<DVector<T>> {
    if !finite(m) {
        return Err(Error::SvdFailure("non-finite input matrix".into()));
    }
    let svd = SVD::try_new(m.clone(), false, false, T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::SvdFailure("iteration limit exceeded".into()))?;
    Ok(svd.singular_values)
}

/// Largest eigenvalue of a symmetric matrix.
pub(crate) fn symmetric_lambda_max<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    if !finite(m) {
        return Err(Error::EigenFailure("non-finite input matrix".into()));
    }
    let eig = SymmetricEigen::try_new(m.clone(), T::default_epsilon(), 10_000)
        .ok_or_else(|| Error::EigenFailure("iteration limit exceeded".into()))?;
    Ok(eig
        .eigenvalues
        .iter()
        .fold(T::zero() - T::one() / T::default_epsilon(), |a, &b| {
            if b > a {
                b
            } else {
                a
            }
        }))
}
