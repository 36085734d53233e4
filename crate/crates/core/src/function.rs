//! Differentiable functions used as the `f` and `g` blocks of a saddle problem.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::fmt;
use std::sync::Arc;

/// Gradient oracle for a smooth function `φ: ℝᵈ → ℝ`.
///
/// Only [`SmoothFunction::gradient_into`] is required. The remaining methods
/// expose extra structure (values, Hessians, a closed-form conjugate gradient)
/// that diagnostics and reference solvers use when present.
pub trait SmoothFunction<T: Scalar>: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Writes `∇φ(x)` into `out` (same length as `x`).
    fn gradient_into(&self, x: &DVector<T>, out: &mut DVector<T>);

    fn gradient(&self, x: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.dim());
        self.gradient_into(x, &mut out);
        out
    }

    fn value(&self, _x: &DVector<T>) -> Option<T> {
        None
    }

    fn hessian(&self, _x: &DVector<T>) -> Option<DMatrix<T>> {
        None
    }

    /// Closed-form `∇φ*(z)`, the unique `y` with `∇φ(y) = z`, when available.
    fn conjugate_gradient(&self, _z: &DVector<T>) -> Option<DVector<T>> {
        None
    }

    /// `(S, q)` when `φ(x) = ½xᵀSx + qᵀx` exactly.
    fn quadratic_form(&self) -> Option<(DMatrix<T>, DVector<T>)> {
        None
    }
}

/// Shared handle to a gradient oracle.
pub type FunctionRef<T> = Arc<dyn SmoothFunction<T>>;

#[derive(Clone, Debug)]
enum Curvature<T: Scalar> {
    Dense { hess: DMatrix<T>, chol: Option<Cholesky<T, Dyn>> },
    Diagonal(DVector<T>),
}

/// `φ(x) = ½xᵀSx + qᵀx` with symmetric `S`.
#[derive(Clone, Debug)]
pub struct Quadratic<T: Scalar> {
    curvature: Curvature<T>,
    lin: DVector<T>,
}

impl<T: Scalar> Quadratic<T> {
    /// Dense quadratic. `hess` is symmetrized as `(S + Sᵀ)/2`.
    pub fn new(hess: DMatrix<T>, lin: DVector<T>) -> Result<Self> {
        if !hess.is_square() || hess.nrows() != lin.len() {
            return Err(Error::DimensionMismatch {
                context: "quadratic hessian",
                expected: lin.len(),
                got: hess.nrows(),
            });
        }
        let half: T = lit(0.5);
        let hess = (&hess + hess.transpose()) * half;
        let chol = Cholesky::new(hess.clone());
        Ok(Self {
            curvature: Curvature::Dense { hess, chol },
            lin,
        })
    }

    /// Separable quadratic `½Σ sᵢxᵢ² + qᵀx`.
    pub fn diagonal(diag: DVector<T>, lin: DVector<T>) -> Result<Self> {
        if diag.len() != lin.len() {
            return Err(Error::DimensionMismatch {
                context: "diagonal quadratic",
                expected: lin.len(),
                got: diag.len(),
            });
        }
        Ok(Self {
            curvature: Curvature::Diagonal(diag),
            lin,
        })
    }

    /// The zero function on `ℝᵈ`.
    pub fn zero(d: usize) -> Self {
        Self {
            curvature: Curvature::Diagonal(DVector::zeros(d)),
            lin: DVector::zeros(d),
        }
    }

    pub fn linear_term(&self) -> &DVector<T> {
        &self.lin
    }

    pub fn hessian_matrix(&self) -> DMatrix<T> {
        match &self.curvature {
            Curvature::Dense { hess, .. } => hess.clone(),
            Curvature::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    /// Extreme eigenvalues of `S`, `(min, max)`.
    pub fn curvature_bounds(&self) -> (T, T) {
        match &self.curvature {
            Curvature::Dense { hess, .. } => crate::linalg::symmetric_extremes(hess),
            Curvature::Diagonal(d) => (d.min(), d.max()),
        }
    }
}

impl<T: Scalar> SmoothFunction<T> for Quadratic<T> {
    fn dim(&self) -> usize {
        self.lin.len()
    }

    fn gradient_into(&self, x: &DVector<T>, out: &mut DVector<T>) {
        match &self.curvature {
            Curvature::Dense { hess, .. } => {
                out.copy_from(&self.lin);
                out.gemv(T::one(), hess, x, T::one());
            }
            Curvature::Diagonal(d) => {
                out.zip_zip_apply(x, d, |o, xi, di| *o = di * xi);
                *out += &self.lin;
            }
        }
    }

    fn value(&self, x: &DVector<T>) -> Option<T> {
        let half: T = lit(0.5);
        let quad = match &self.curvature {
            Curvature::Dense { hess, .. } => x.dot(&(hess * x)),
            Curvature::Diagonal(d) => x.component_mul(x).dot(d),
        };
        Some(half * quad + self.lin.dot(x))
    }

    fn hessian(&self, _x: &DVector<T>) -> Option<DMatrix<T>> {
        Some(self.hessian_matrix())
    }

    fn conjugate_gradient(&self, z: &DVector<T>) -> Option<DVector<T>> {
        let rhs = z - &self.lin;
        match &self.curvature {
            Curvature::Dense { chol, .. } => chol.as_ref().map(|c| c.solve(&rhs)),
            Curvature::Diagonal(d) => {
                if d.iter().all(|&di| di > T::zero()) {
                    Some(rhs.component_div(d))
                } else {
                    None
                }
            }
        }
    }

    fn quadratic_form(&self) -> Option<(DMatrix<T>, DVector<T>)> {
        Some((self.hessian_matrix(), self.lin.clone()))
    }
}

/// `φ(y) = ½·s·y_k² + q·y_k`, a quadratic in one coordinate of `ℝⁿ`.
///
/// Used for the per-sample dual blocks of finite-sum regression problems.
#[derive(Clone, Debug)]
pub struct CoordinateQuadratic<T: Scalar> {
    pub dim: usize,
    pub index: usize,
    pub curvature: T,
    pub lin: T,
}

impl<T: Scalar> SmoothFunction<T> for CoordinateQuadratic<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient_into(&self, y: &DVector<T>, out: &mut DVector<T>) {
        out.fill(T::zero());
        out[self.index] = self.curvature * y[self.index] + self.lin;
    }

    fn value(&self, y: &DVector<T>) -> Option<T> {
        let v = y[self.index];
        Some(lit::<T>(0.5) * self.curvature * v * v + self.lin * v)
    }

    fn hessian(&self, _y: &DVector<T>) -> Option<DMatrix<T>> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        h[(self.index, self.index)] = self.curvature;
        Some(h)
    }
}

/// `λ·R_a(x)` with the smoothed-L1 regularizer
/// `R_a(x) = Σᵢ (1/a)(log(1+e^{a xᵢ}) + log(1+e^{−a xᵢ}))`.
///
/// The gradient is `λ·tanh(a xᵢ / 2)`; the value uses
/// `log(1+e^u) + log(1+e^{−u}) = |u| + 2·log1p(e^{−|u|})` so large `|a xᵢ|` never overflows.
#[derive(Clone, Debug)]
pub struct SmoothedL1<T: Scalar> {
    pub dim: usize,
    pub sharpness: T,
    pub weight: T,
}

impl<T: Scalar> SmoothedL1<T> {
    pub fn new(dim: usize, sharpness: T, weight: T) -> Result<Self> {
        if !(sharpness > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "smoothed-L1 sharpness must be positive, got {sharpness}"
            )));
        }
        if weight < T::zero() {
            return Err(Error::InvalidParameter(format!("smoothed-L1 weight must be nonnegative, got {weight}")));
        }
        Ok(Self { dim, sharpness, weight })
    }

    /// Unweighted `R_a(x)`.
    pub fn regularizer(&self, x: &DVector<T>) -> T {
        let two: T = lit(2.0);
        x.iter().fold(T::zero(), |acc, &xi| {
            let u = (self.sharpness * xi).abs();
            acc + (u + two * (-u).exp().ln_1p()) / self.sharpness
        })
    }

    /// Exact supremum of the second derivative of `λ·R_a`: `λ·a/2`.
    pub fn smoothness(&self) -> T {
        self.weight * self.sharpness * lit(0.5)
    }
}

impl<T: Scalar> SmoothFunction<T> for SmoothedL1<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient_into(&self, x: &DVector<T>, out: &mut DVector<T>) {
        let half_a = self.sharpness * lit(0.5);
        out.zip_apply(x, |o, xi| *o = self.weight * (half_a * xi).tanh());
    }

    fn value(&self, x: &DVector<T>) -> Option<T> {
        Some(self.weight * self.regularizer(x))
    }

    fn hessian(&self, x: &DVector<T>) -> Option<DMatrix<T>> {
        let half_a = self.sharpness * lit(0.5);
        let diag = x.map(|xi| {
            let t = (half_a * xi).tanh();
            self.weight * half_a * (T::one() - t * t)
        });
        Some(DMatrix::from_diagonal(&diag))
    }
}

type GradFn<T> = dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync;
type ValueFn<T> = dyn Fn(&DVector<T>) -> T + Send + Sync;

/// Closure-backed oracle for user-supplied functions.
#[derive(Clone)]
pub struct FnOracle<T: Scalar> {
    dim: usize,
    grad: Arc<GradFn<T>>,
    value: Option<Arc<ValueFn<T>>>,
}

impl<T: Scalar> FnOracle<T> {
    pub fn new(dim: usize, grad: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            grad: Arc::new(grad),
            value: None,
        }
    }

    pub fn with_value(mut self, value: impl Fn(&DVector<T>) -> T + Send + Sync + 'static) -> Self {
        self.value = Some(Arc::new(value));
        self
    }
}

impl<T: Scalar> fmt::Debug for FnOracle<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnOracle")
            .field("dim", &self.dim)
            .field("has_value", &self.value.is_some())
            .finish()
    }
}

impl<T: Scalar> SmoothFunction<T> for FnOracle<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn gradient_into(&self, x: &DVector<T>, out: &mut DVector<T>) {
        out.copy_from(&(self.grad)(x));
    }

    fn value(&self, x: &DVector<T>) -> Option<T> {
        self.value.as_ref().map(|v| v(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smoothed_l1_at_origin() {
        let r = SmoothedL1::new(4, 10.0, 1.0).unwrap();
        let x = DVector::zeros(4);
        assert_eq!(r.gradient(&x), DVector::zeros(4));
        assert_relative_eq!(r.value(&x).unwrap(), 2.0 * 4.0 / 10.0 * 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn smoothed_l1_saturates_to_sign() {
        let r = SmoothedL1::<f64>::new(2, 10.0, 1.0).unwrap();
        let g = r.gradient(&DVector::from_vec(vec![10.0, -10.0]));
        assert!((g[0] - 1.0).abs() <= 1e-8);
        assert!((g[1] + 1.0).abs() <= 1e-8);
        // no overflow far out
        let v = r.value(&DVector::from_vec(vec![1e3, -1e3])).unwrap();
        assert_relative_eq!(v, 2e3, epsilon = 1e-9);
    }

    #[test]
    fn quadratic_conjugate_inverts_gradient() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let q = Quadratic::new(s, DVector::from_vec(vec![1.0, -1.0])).unwrap();
        let z = DVector::from_vec(vec![0.3, 0.7]);
        let y = q.conjugate_gradient(&z).unwrap();
        assert_relative_eq!(q.gradient(&y), z, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_without_curvature_has_no_conjugate() {
        let q = Quadratic::<f64>::zero(3);
        assert!(q.conjugate_gradient(&DVector::zeros(3)).is_none());
    }

    #[test]
    fn coordinate_quadratic_gradient() {
        let c = CoordinateQuadratic {
            dim: 3,
            index: 1,
            curvature: 1.0,
            lin: 2.0,
        };
        let g = c.gradient(&DVector::from_vec(vec![5.0, 3.0, 7.0]));
        assert_eq!(g.as_slice(), &[0.0, 5.0, 0.0]);
    }
}
