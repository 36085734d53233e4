//! Quadratic saddle problems `L(x,y) = xᵀBx + bᵀx + yᵀAx − yᵀCy + cᵀy`.

use super::{from_rows, rows_of, vec_from, vec_of};
use crate::error::{check_dim, Error, Result};
use crate::function::{FunctionRef, Quadratic};
use crate::linalg::{orthonormal_columns, symmetric_extremes, symmetrize_sum};
use crate::problem::SaddleProblem;
use crate::scalar::{lit, Scalar};
use crate::svrg::{Component, Coupling, FiniteSumSaddleProblem, PrimalFiniteSum};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Symmetrized `B` may have eigenvalues down to `−PSD_RTOL·‖B‖` and still count as convex.
const PSD_RTOL: f64 = 1e-12;

/// The blocks of a quadratic saddle problem. `B` need not be symmetric and
/// only its symmetric part matters.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSaddle<T: Scalar> {
    pub b_mat: DMatrix<T>,
    pub b: DVector<T>,
    pub a: DMatrix<T>,
    pub c_mat: DMatrix<T>,
    pub c: DVector<T>,
}

/// Extreme eigenvalues of the curvature of each block and singular values of `A`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadraticCurvature<T: Scalar> {
    /// Extreme eigenvalues of `B + Bᵀ`.
    pub f_min: T,
    pub f_max: T,
    /// Extreme eigenvalues of `C + Cᵀ`.
    pub g_min: T,
    pub g_max: T,
    pub sigma_max: T,
    pub sigma_min: T,
}

/// JSON form: matrices as row-major nested arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticDocument {
    #[serde(rename = "B")]
    pub b_mat: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c_mat: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

impl<T: Scalar> QuadraticSaddle<T> {
    pub fn new(b_mat: DMatrix<T>, b: DVector<T>, a: DMatrix<T>, c_mat: DMatrix<T>, c: DVector<T>) -> Result<Self> {
        let d1 = a.ncols();
        let d2 = a.nrows();
        check_dim("B rows", d1, b_mat.nrows())?;
        check_dim("B cols", d1, b_mat.ncols())?;
        check_dim("b", d1, b.len())?;
        check_dim("C rows", d2, c_mat.nrows())?;
        check_dim("C cols", d2, c_mat.ncols())?;
        check_dim("c", d2, c.len())?;
        Ok(Self { b_mat, b, a, c_mat, c })
    }

    pub fn d1(&self) -> usize {
        self.a.ncols()
    }

    pub fn d2(&self) -> usize {
        self.a.nrows()
    }

    pub fn curvature(&self) -> QuadraticCurvature<T> {
        let (f_min, f_max) = symmetric_extremes(&symmetrize_sum(&self.b_mat));
        let (g_min, g_max) = symmetric_extremes(&symmetrize_sum(&self.c_mat));
        let (sigma_max, sigma_min) = crate::linalg::singular_extremes(&self.a);
        QuadraticCurvature {
            f_min,
            f_max,
            g_min,
            g_max,
            sigma_max,
            sigma_min,
        }
    }

    /// The saddle problem with `∇f(x) = (B+Bᵀ)x + b`, `∇g(y) = (C+Cᵀ)y − c`,
    /// `ρ = λ_max(B+Bᵀ)` and `(α, β)` the extreme eigenvalues of `C+Cᵀ`.
    pub fn to_problem(&self) -> Result<SaddleProblem<T>> {
        let k = self.curvature();
        let scale = T::one() + k.f_max.abs() + k.f_min.abs();
        if k.f_min < -lit::<T>(PSD_RTOL) * scale {
            return Err(Error::InvalidParameter(format!(
                "symmetrized B must be positive semidefinite, smallest eigenvalue is {}",
                k.f_min
            )));
        }
        if !(k.g_min > T::zero()) {
            return Err(Error::NotPositiveDefinite(format!("symmetrized C (smallest eigenvalue {})", k.g_min)));
        }
        let f = Arc::new(Quadratic::new(symmetrize_sum(&self.b_mat), self.b.clone())?);
        let g = Arc::new(Quadratic::new(symmetrize_sum(&self.c_mat), -&self.c)?);
        SaddleProblem::new(f, g, self.a.clone(), k.f_max.max(T::zero()), k.g_min, k.g_max)
    }

    /// `n` components averaging exactly (up to roundoff) to this instance.
    ///
    /// Each block receives a perturbation of relative size `scale`; the
    /// perturbations are centred so they sum to zero. Perturbations of `B`
    /// and `C` are symmetric, so individual components may be nonconvex.
    pub fn split<R: Rng + ?Sized>(&self, n: usize, scale: f64, rng: &mut R) -> Result<FiniteSumSaddleProblem<T>> {
        if n == 0 {
            return Err(Error::InvalidParameter("split needs n >= 1".into()));
        }
        let aggregate = Arc::new(self.to_problem()?);
        let (d1, d2) = (self.d1(), self.d2());
        let pb = centred_perturbations(rng, n, scale, d1, d1, true);
        let pbv = centred_perturbations(rng, n, scale, d1, 1, false);
        let pa = centred_perturbations(rng, n, scale, d2, d1, false);
        let pc = centred_perturbations(rng, n, scale, d2, d2, true);
        let pcv = centred_perturbations(rng, n, scale, d2, 1, false);

        let sb = symmetrize_sum(&self.b_mat);
        let sc = symmetrize_sum(&self.c_mat);
        let mut comps = Vec::with_capacity(n);
        for i in 0..n {
            let hb = &sb + pb[i].map(lit::<T>) * lit::<T>(2.0);
            let lb = &self.b + DVector::from_column_slice(pbv[i].as_slice()).map(lit::<T>);
            let hc = &sc + pc[i].map(lit::<T>) * lit::<T>(2.0);
            let lc = -&self.c - DVector::from_column_slice(pcv[i].as_slice()).map(lit::<T>);
            let ai = &self.a + pa[i].map(lit::<T>);
            let f: FunctionRef<T> = Arc::new(Quadratic::new(hb, lb)?);
            let g: FunctionRef<T> = Arc::new(Quadratic::new(hc, lc)?);
            comps.push(Component {
                f,
                g,
                coupling: Coupling::Dense(ai),
            });
        }
        FiniteSumSaddleProblem::new(comps, aggregate)
    }

    /// A finite-sum decomposition of the primal objective `P(x) = f(x) + g*(Ax)`:
    /// `n` quadratics whose Hessians and linear terms are centred random
    /// perturbations of `P`'s, so they average exactly to `P` up to a constant.
    pub fn primal_split<R: Rng + ?Sized>(&self, n: usize, scale: f64, rng: &mut R) -> Result<PrimalFiniteSum<T>> {
        if n == 0 {
            return Err(Error::InvalidParameter("primal_split needs n >= 1".into()));
        }
        let p = self.to_problem()?;
        let d1 = self.d1();
        let zero = DVector::zeros(d1);
        let hess = p.primal_hessian(&zero)?;
        let lin = p.grad_primal(&zero)?;
        let ph = centred_perturbations(rng, n, scale, d1, d1, true);
        let pl = centred_perturbations(rng, n, scale, d1, 1, false);
        let comps = (0..n)
            .map(|i| {
                let h = &hess + ph[i].map(lit::<T>);
                let l = &lin + DVector::from_column_slice(pl[i].as_slice()).map(lit::<T>);
                Ok(Arc::new(Quadratic::new(h, l)?) as FunctionRef<T>)
            })
            .collect::<Result<Vec<_>>>()?;
        PrimalFiniteSum::new(comps)
    }

    pub fn to_document(&self) -> QuadraticDocument {
        QuadraticDocument {
            b_mat: rows_of(&self.b_mat),
            b: vec_of(&self.b),
            a: rows_of(&self.a),
            c_mat: rows_of(&self.c_mat),
            c: vec_of(&self.c),
        }
    }

    pub fn from_document(doc: &QuadraticDocument) -> Result<Self> {
        Self::new(
            from_rows(&doc.b_mat, "B")?,
            vec_from(&doc.b),
            from_rows(&doc.a, "A")?,
            from_rows(&doc.c_mat, "C")?,
            vec_from(&doc.c),
        )
    }
}

/// `n` random `rows × cols` matrices with entries of size `scale` that sum to zero.
fn centred_perturbations<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64, rows: usize, cols: usize, symmetric: bool) -> Vec<DMatrix<f64>> {
    let mut ms: Vec<DMatrix<f64>> = (0..n)
        .map(|_| {
            let m = DMatrix::<f64>::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
            if symmetric {
                (&m + m.transpose()) * 0.5
            } else {
                m
            }
        })
        .collect();
    let mean = ms.iter().fold(DMatrix::zeros(rows, cols), |acc, m| acc + m) / n as f64;
    for m in &mut ms {
        *m -= &mean;
    }
    ms
}

/// Spectral ranges for [`random_quadratic`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpec {
    pub d1: usize,
    pub d2: usize,
    /// Singular values of `A` are drawn uniformly from this range.
    pub sigma: (f64, f64),
    /// Eigenvalues of `C + Cᵀ`.
    pub g_eigs: (f64, f64),
    /// Eigenvalues of `B + Bᵀ`; a lower end of 0 allows merely convex `f`.
    pub f_eigs: (f64, f64),
    /// Add antisymmetric parts to `B` and `C` (they do not change `L`'s gradients).
    pub skew: bool,
}

impl QuadraticSpec {
    /// `f` convex with `B + Bᵀ` eigenvalues in `[0, 1]`; `σ(A)` and `C + Cᵀ` eigenvalues in `[1, 2]`.
    pub fn convex(d1: usize, d2: usize) -> Self {
        Self {
            d1,
            d2,
            sigma: (1.0, 2.0),
            g_eigs: (1.0, 2.0),
            f_eigs: (0.0, 1.0),
            skew: true,
        }
    }

    /// As [`Self::convex`] with `B + Bᵀ` eigenvalues in `[0.5, 2]`.
    pub fn strongly_convex(d1: usize, d2: usize) -> Self {
        Self {
            f_eigs: (0.5, 2.0),
            ..Self::convex(d1, d2)
        }
    }

    /// Random dimensions `d1 ∈ [2, 10]`, `d2 ∈ [d1, 20]`.
    pub fn random_dims<R: Rng + ?Sized>(rng: &mut R) -> (usize, usize) {
        let d1 = rng.random_range(2..=10);
        let d2 = rng.random_range(d1..=20);
        (d1, d2)
    }
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `Q diag(eigs) Qᵀ` with a random orthogonal `Q` and eigenvalues drawn from `range`,
/// the first pinned to `range.0` and the last to `range.1` so the extremes are attained.
fn symmetric_with_spectrum<R: Rng + ?Sized>(rng: &mut R, d: usize, range: (f64, f64)) -> DMatrix<f64> {
    let q = orthonormal_columns(gaussian(rng, d, d));
    let eigs = DVector::from_fn(d, |i, _| match i {
        0 => range.0,
        _ if i + 1 == d => range.1,
        _ => uniform_in(rng, range),
    });
    &q * DMatrix::from_diagonal(&eigs) * q.transpose()
}

/// A random instance with prescribed spectra.
pub fn random_quadratic<T: Scalar, R: Rng + ?Sized>(spec: &QuadraticSpec, rng: &mut R) -> Result<QuadraticSaddle<T>> {
    let QuadraticSpec { d1, d2, .. } = *spec;
    if d1 == 0 || d2 < d1 {
        return Err(Error::InvalidParameter(format!("need 1 <= d1 <= d2, got d1 = {d1}, d2 = {d2}")));
    }
    let u = orthonormal_columns(gaussian(rng, d2, d1));
    let v = orthonormal_columns(gaussian(rng, d1, d1));
    let s = DVector::from_fn(d1, |i, _| match i {
        0 => spec.sigma.1,
        _ if i + 1 == d1 => spec.sigma.0,
        _ => uniform_in(rng, spec.sigma),
    });
    let a = &u * DMatrix::from_diagonal(&s) * v.transpose();

    // B + Bᵀ = S_f, so B = S_f/2 + K with K antisymmetric
    let mut b_mat = symmetric_with_spectrum(rng, d1, spec.f_eigs) * 0.5;
    let mut c_mat = symmetric_with_spectrum(rng, d2, spec.g_eigs) * 0.5;
    if spec.skew {
        let k = gaussian(rng, d1, d1);
        b_mat += (&k - k.transpose()) * 0.25;
        let k = gaussian(rng, d2, d2);
        c_mat += (&k - k.transpose()) * 0.25;
    }
    let b = DVector::from_fn(d1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let c = DVector::from_fn(d2, |_, _| rng.sample::<f64, _>(StandardNormal));
    QuadraticSaddle::new(b_mat.map(lit), b.map(lit), a.map(lit), c_mat.map(lit), c.map(lit))
}
