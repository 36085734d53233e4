//! Small dense linear-algebra helpers on top of nalgebra.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};

/// Largest and smallest singular values, `(sigma_max, sigma_min)`, where the
/// minimum runs over `min(rows, cols)` values.
pub fn singular_extremes<T: Scalar>(m: &DMatrix<T>) -> (T, T) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (T::zero(), T::zero());
    }
    let sv = m.singular_values();
    let mut hi = sv[0];
    let mut lo = sv[0];
    for &s in sv.iter() {
        if s > hi {
            hi = s;
        }
        if s < lo {
            lo = s;
        }
    }
    (hi, lo)
}

/// Extreme eigenvalues `(lambda_min, lambda_max)` of a symmetric matrix.
pub fn symmetric_extremes<T: Scalar>(m: &DMatrix<T>) -> (T, T) {
    let eig = m.clone().symmetric_eigen();
    let mut lo = eig.eigenvalues[0];
    let mut hi = eig.eigenvalues[0];
    for &e in eig.eigenvalues.iter() {
        if e < lo {
            lo = e;
        }
        if e > hi {
            hi = e;
        }
    }
    (lo, hi)
}

/// `M + Mᵀ`.
pub fn symmetrize_sum<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    m + m.transpose()
}

/// Random matrix with orthonormal columns (`rows >= cols`), from the QR factor
/// of a Gaussian matrix.
pub fn orthonormal_columns<T: Scalar>(gaussian: DMatrix<T>) -> DMatrix<T> {
    let (rows, cols) = gaussian.shape();
    let q = gaussian.qr().q();
    q.columns(0, cols.min(rows)).into_owned()
}

/// Dense solve with LU; fails when the system is singular.
pub fn lu_solve<T: Scalar>(m: DMatrix<T>, rhs: &DVector<T>) -> Result<DVector<T>> {
    m.lu()
        .solve(rhs)
        .ok_or_else(|| Error::NotPositiveDefinite("singular linear system".into()))
}

/// Euclidean distance between two vectors.
#[inline]
pub fn dist<T: Scalar>(a: &DVector<T>, b: &DVector<T>) -> T {
    (a - b).norm()
}

/// Joint Euclidean norm of a pair of vectors.
#[inline]
pub fn joint_norm<T: Scalar>(a: &DVector<T>, b: &DVector<T>) -> T {
    (a.norm_squared() + b.norm_squared()).sqrt()
}

pub fn all_finite<T: Scalar>(v: &DVector<T>) -> bool {
    v.iter().all(|c| c.is_finite())
}
