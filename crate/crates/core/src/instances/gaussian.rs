//! Correlated Gaussian design matrices.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Covariance of the rows of a design matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CovarianceSpec {
    /// `Σ = I`.
    Identity,
    /// `Σ_ij = 2^{−|i−j|/c}`.
    ExpDecay { c: f64 },
}

impl CovarianceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CovarianceSpec::Identity => Ok(()),
            CovarianceSpec::ExpDecay { c } if c > 0.0 && c.is_finite() => Ok(()),
            CovarianceSpec::ExpDecay { c } => Err(Error::InvalidParameter(format!("covariance decay c must be positive, got {c}"))),
        }
    }

    /// The `d × d` covariance matrix.
    pub fn matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        self.validate()?;
        Ok(match *self {
            CovarianceSpec::Identity => DMatrix::identity(d, d),
            CovarianceSpec::ExpDecay { c } => DMatrix::from_fn(d, d, |i, j| 2f64.powf(-(i.abs_diff(j) as f64) / c)),
        })
    }
}

/// `n` rows drawn i.i.d. from `N(0, Σ)` as `z ↦ Lz` with `Σ = LLᵀ`, deterministic under `seed`.
pub fn gaussian_data<T: Scalar>(n: usize, d: usize, spec: CovarianceSpec, seed: u64) -> Result<DMatrix<T>> {
    let sigma = spec.matrix(d)?;
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("covariance {spec:?} in dimension {d}")))?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::<f64>::from_fn(n, d, |_, _| rng.sample(StandardNormal));
    let rows = z * l.transpose();
    Ok(rows.map(lit::<T>))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_decay_entries() {
        let s = CovarianceSpec::ExpDecay { c: 2.0 }.matrix(3).unwrap();
        assert!((s[(0, 1)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((s[(0, 2)] - 0.5).abs() < 1e-15);
        assert_eq!(s[(1, 1)], 1.0);
        assert!(CovarianceSpec::ExpDecay { c: 0.0 }.matrix(3).is_err());
    }

    #[test]
    fn identity_sample_covariance() {
        let n = 100_000;
        let x = gaussian_data::<f64>(n, 5, CovarianceSpec::Identity, 3).unwrap();
        let cov = x.tr_mul(&x) / n as f64;
        let err = (cov - DMatrix::<f64>::identity(5, 5)).abs().max();
        assert!(err <= 0.02, "max deviation {err}");
    }

    #[test]
    fn seeded_draws_repeat() {
        let spec = CovarianceSpec::ExpDecay { c: 10.0 };
        let a = gaussian_data::<f64>(20, 7, spec, 11).unwrap();
        let b = gaussian_data::<f64>(20, 7, spec, 11).unwrap();
        let c = gaussian_data::<f64>(20, 7, spec, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
