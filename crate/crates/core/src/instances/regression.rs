//! Smoothed-L1 regularized least squares,
//! `min_x (1/2n)‖Ax − b‖² + λ·R_a(x)`, in saddle and finite-sum form.

use super::gaussian::{gaussian_data, CovarianceSpec};
use super::{from_rows, rows_of, vec_from, vec_of};
use crate::error::{check_dim, Error, Result};
use crate::function::{CoordinateQuadratic, FunctionRef, Quadratic, SmoothFunction, SmoothedL1};
use crate::problem::SaddleProblem;
use crate::scalar::{from_usize, lit, Scalar};
use crate::svrg::{Component, Coupling, FiniteSumSaddleProblem, PrimalFiniteSum};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Standard deviation of the additive noise on generated targets.
pub const TARGET_NOISE: f64 = 0.01;

/// Data `A` (`n × d`), targets `b`, sharpness `a` and weight `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedL1Regression<T: Scalar> {
    pub data: DMatrix<T>,
    pub targets: DVector<T>,
    pub sharpness: T,
    pub lambda_reg: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionDocument {
    #[serde(rename = "A")]
    pub data: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub a: f64,
    pub lambda_reg: f64,
}

impl<T: Scalar> SmoothedL1Regression<T> {
    pub fn new(data: DMatrix<T>, targets: DVector<T>, sharpness: T, lambda_reg: T) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidParameter("regression data must be non-empty".into()));
        }
        check_dim("targets", data.nrows(), targets.len())?;
        if !(sharpness > T::zero()) || !(lambda_reg > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "need a > 0 and lambda > 0, got a = {sharpness}, lambda = {lambda_reg}"
            )));
        }
        Ok(Self {
            data,
            targets,
            sharpness,
            lambda_reg,
        })
    }

    /// `n` samples of dimension `d` with rows from `N(0, Σ)` and targets
    /// `A x_true + 0.01·noise`, where `x_true` has `max(1, d/10)` standard normal
    /// entries at random positions.
    pub fn generate(n: usize, d: usize, cov: CovarianceSpec, sharpness: T, lambda_reg: T, seed: u64) -> Result<Self> {
        let data = gaussian_data::<T>(n, d, cov, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let k = (d / 10).max(1);
        let mut x_true = DVector::<T>::zeros(d);
        for idx in rand::seq::index::sample(&mut rng, d, k) {
            x_true[idx] = lit(rng.sample::<f64, _>(StandardNormal));
        }
        let noise = DVector::<T>::from_fn(n, |_, _| lit(TARGET_NOISE * rng.sample::<f64, _>(StandardNormal)));
        let targets = &data * &x_true + noise;
        Self::new(data, targets, sharpness, lambda_reg)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    fn regularizer(&self) -> Result<Arc<SmoothedL1<T>>> {
        Ok(Arc::new(SmoothedL1::new(self.d(), self.sharpness, self.lambda_reg)?))
    }

    /// `f = λR_a`, `g(y) = (1/n)(½‖y‖² + bᵀy)`, coupling `A/n`; `ρ = λa/2`, `α = β = 1/n`.
    pub fn to_problem(&self) -> Result<SaddleProblem<T>> {
        let n = from_usize::<T>(self.n());
        let inv_n = T::one() / n;
        let f = self.regularizer()?;
        let g = Arc::new(Quadratic::diagonal(DVector::from_element(self.n(), inv_n), &self.targets * inv_n)?);
        let rho = f.smoothness();
        SaddleProblem::new(f, g, &self.data * inv_n, rho, inv_n, inv_n)
    }

    /// Components `f_i = λR_a`, `g_i(y) = ½y_i² + b_i y_i`, `A_i = e_i a_iᵀ`.
    pub fn to_finite_sum(&self) -> Result<FiniteSumSaddleProblem<T>> {
        let aggregate = Arc::new(self.to_problem()?);
        let f: FunctionRef<T> = self.regularizer()?;
        let n = self.n();
        let comps = (0..n)
            .map(|i| Component {
                f: f.clone(),
                g: Arc::new(CoordinateQuadratic {
                    dim: n,
                    index: i,
                    curvature: T::one(),
                    lin: self.targets[i],
                }),
                coupling: Coupling::Row {
                    index: i,
                    rows: n,
                    v: self.data.row(i).transpose(),
                },
            })
            .collect();
        FiniteSumSaddleProblem::new(comps, aggregate)
    }

    /// Components `P_i(x) = ½(a_iᵀx − b_i)² + λR_a(x)` averaging to the primal objective.
    pub fn primal_finite_sum(&self) -> Result<PrimalFiniteSum<T>> {
        let reg = self.regularizer()?;
        let comps = (0..self.n())
            .map(|i| {
                Arc::new(RegressionSample {
                    row: self.data.row(i).transpose(),
                    target: self.targets[i],
                    reg: reg.clone(),
                }) as FunctionRef<T>
            })
            .collect();
        PrimalFiniteSum::new(comps)
    }

    /// The regression objective `(1/2n)‖Ax − b‖² + λR_a(x)`.
    pub fn objective(&self, x: &DVector<T>) -> Result<T> {
        check_dim("x", self.d(), x.len())?;
        let r = &self.data * x - &self.targets;
        let reg = self.regularizer()?.regularizer(x);
        Ok(lit::<T>(0.5) * r.norm_squared() / from_usize::<T>(self.n()) + self.lambda_reg * reg)
    }

    pub fn to_document(&self) -> RegressionDocument {
        RegressionDocument {
            data: rows_of(&self.data),
            b: vec_of(&self.targets),
            a: crate::scalar::to_f64(self.sharpness),
            lambda_reg: crate::scalar::to_f64(self.lambda_reg),
        }
    }

    pub fn from_document(doc: &RegressionDocument) -> Result<Self> {
        Self::new(from_rows(&doc.data, "A")?, vec_from(&doc.b), lit(doc.a), lit(doc.lambda_reg))
    }
}

/// `½(rowᵀx − target)² + λR_a(x)`.
#[derive(Clone, Debug)]
pub struct RegressionSample<T: Scalar> {
    pub row: DVector<T>,
    pub target: T,
    pub reg: Arc<SmoothedL1<T>>,
}

impl<T: Scalar> SmoothFunction<T> for RegressionSample<T> {
    fn dim(&self) -> usize {
        self.row.len()
    }

    fn gradient_into(&self, x: &DVector<T>, out: &mut DVector<T>) {
        self.reg.gradient_into(x, out);
        out.axpy(self.row.dot(x) - self.target, &self.row, T::one());
    }

    fn value(&self, x: &DVector<T>) -> Option<T> {
        let r = self.row.dot(x) - self.target;
        Some(lit::<T>(0.5) * r * r + self.reg.value(x)?)
    }
}
