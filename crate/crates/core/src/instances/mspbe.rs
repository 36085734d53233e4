//! Policy evaluation by minimizing the empirical mean squared projected
//! Bellman error `½‖Ax − b‖²_{C⁻¹}` with
//! `A = Σ φ_t(φ_t − γφ_{t+1})ᵀ`, `b = Σ r_t φ_t`, `C = Σ φ_t φ_tᵀ`.
//!
//! Maximizing `yᵀ(b − Ax) − ½yᵀCy` over `y` gives back the objective, so the
//! saddle form uses `f = 0`, coupling `−A` and `g(y) = ½yᵀCy − bᵀy`; `y` keeps its
//! orientation and the saddle `x*` is the MSPBE minimizer.

use super::{vec_from, vec_of};
use crate::error::{Error, Result};
use crate::function::Quadratic;
use crate::linalg::symmetric_extremes;
use crate::problem::SaddleProblem;
use crate::scalar::{from_usize, lit, Scalar};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Observed transitions `(φ(s_t), φ(s_{t+1}))` with rewards `r_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct MspbeInstance<T: Scalar> {
    pub features: Vec<(DVector<T>, DVector<T>)>,
    pub rewards: DVector<T>,
    pub gamma: T,
    /// Divide `A`, `b`, `C` by the number of transitions.
    pub normalize: bool,
}

/// The assembled `(A, b, C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MspbeMatrices<T: Scalar> {
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub c: DMatrix<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MspbeDocument {
    /// Pairs `[φ(s_t), φ(s_{t+1})]`.
    pub features: Vec<[Vec<f64>; 2]>,
    pub rewards: Vec<f64>,
    pub gamma: f64,
    #[serde(default)]
    pub normalize: bool,
}

impl<T: Scalar> MspbeInstance<T> {
    pub fn new(features: Vec<(DVector<T>, DVector<T>)>, rewards: DVector<T>, gamma: T, normalize: bool) -> Result<Self> {
        let d = features
            .first()
            .map(|f| f.0.len())
            .ok_or_else(|| Error::InvalidParameter("MSPBE needs at least one transition".into()))?;
        if d == 0 || features.iter().any(|(p, q)| p.len() != d || q.len() != d) {
            return Err(Error::InvalidParameter("all feature vectors must share one positive dimension".into()));
        }
        if rewards.len() != features.len() {
            return Err(Error::DimensionMismatch {
                context: "rewards",
                expected: features.len(),
                got: rewards.len(),
            });
        }
        if !(gamma >= T::zero() && gamma < T::one()) {
            return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        Ok(Self {
            features,
            rewards,
            gamma,
            normalize,
        })
    }

    pub fn dim(&self) -> usize {
        self.features[0].0.len()
    }

    pub fn matrices(&self) -> MspbeMatrices<T> {
        let d = self.dim();
        let mut a = DMatrix::zeros(d, d);
        let mut b = DVector::zeros(d);
        let mut c = DMatrix::zeros(d, d);
        for ((phi, next), &r) in self.features.iter().zip(self.rewards.iter()) {
            let td = phi - next * self.gamma;
            a.ger(T::one(), phi, &td, T::one());
            b.axpy(r, phi, T::one());
            c.ger(T::one(), phi, phi, T::one());
        }
        if self.normalize {
            let inv = T::one() / from_usize::<T>(self.features.len());
            a *= inv;
            b *= inv;
            c *= inv;
        }
        MspbeMatrices { a, b, c }
    }

    /// Saddle form with `f = 0`, coupling `−A`, `g(y) = ½yᵀCy − bᵀy`.
    pub fn to_problem(&self) -> Result<SaddleProblem<T>> {
        let MspbeMatrices { a, b, c } = self.matrices();
        let (alpha, beta) = symmetric_extremes(&c);
        if !(alpha > T::zero()) {
            return Err(Error::NotPositiveDefinite(format!("feature covariance C (smallest eigenvalue {alpha})")));
        }
        let d = self.dim();
        let f = Arc::new(Quadratic::<T>::zero(d));
        let g = Arc::new(Quadratic::new(c, -b)?);
        SaddleProblem::new(f, g, -a, T::zero(), alpha, beta)
    }

    /// `½(Ax − b)ᵀC⁻¹(Ax − b)`.
    pub fn objective(&self, x: &DVector<T>) -> Result<T> {
        let MspbeMatrices { a, b, c } = self.matrices();
        let r = a * x - b;
        let chol = c.cholesky().ok_or_else(|| Error::NotPositiveDefinite("feature covariance C".into()))?;
        Ok(lit::<T>(0.5) * r.dot(&chol.solve(&r)))
    }

    /// Closed-form minimizer `(AᵀC⁻¹A)⁻¹AᵀC⁻¹b`.
    pub fn minimizer(&self) -> Result<DVector<T>> {
        let MspbeMatrices { a, b, c } = self.matrices();
        let chol = c.cholesky().ok_or_else(|| Error::NotPositiveDefinite("feature covariance C".into()))?;
        let cinv_a = chol.solve(&a);
        let cinv_b = chol.solve(&b);
        let normal = a.tr_mul(&cinv_a);
        let rhs = a.tr_mul(&cinv_b);
        normal
            .cholesky()
            .map(|n| n.solve(&rhs))
            .ok_or_else(|| Error::NotPositiveDefinite("AᵀC⁻¹A".into()))
    }

    pub fn to_document(&self) -> MspbeDocument {
        MspbeDocument {
            features: self.features.iter().map(|(p, q)| [vec_of(p), vec_of(q)]).collect(),
            rewards: vec_of(&self.rewards),
            gamma: crate::scalar::to_f64(self.gamma),
            normalize: self.normalize,
        }
    }

    pub fn from_document(doc: &MspbeDocument) -> Result<Self> {
        let features = doc.features.iter().map(|[p, q]| (vec_from(p), vec_from(q))).collect();
        Self::new(features, vec_from(&doc.rewards), lit(doc.gamma), doc.normalize)
    }
}

/// A trajectory of `n` transitions through Gaussian features in `ℝᵈ` with
/// Gaussian rewards; consecutive transitions share states.
pub fn random_mspbe<T: Scalar, R: Rng + ?Sized>(n: usize, d: usize, gamma: f64, normalize: bool, rng: &mut R) -> Result<MspbeInstance<T>> {
    let states: Vec<DVector<T>> = (0..=n)
        .map(|_| DVector::from_fn(d, |_, _| lit::<T>(rng.sample::<f64, _>(StandardNormal))))
        .collect();
    let features = states.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    let rewards = DVector::from_fn(n, |_, _| lit::<T>(rng.sample::<f64, _>(StandardNormal)));
    MspbeInstance::new(features, rewards, lit(gamma), normalize)
}
