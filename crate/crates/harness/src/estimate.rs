//! `estimate`: the constants of an instance and the schedule they imply.

use crate::config::InstanceSpec;
use crate::error::{HarnessError, Result};
use crate::instance::{Instance, TheoryParams};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub family: &'static str,
    pub params: TheoryParams,
    /// Largest primal step of the batch primal descent, `2/(L+μ)`.
    pub primal_step_bound: f64,
    /// Condition number `σ_max(A)/σ_min(A)` of the coupling.
    pub coupling_condition: f64,
}

/// Estimates `(ρ, α, β, σ_max, σ_min, M)` and the batch schedule. A
/// coupling without full column rank is reported with its singular values.
pub fn cmd_estimate(spec: &InstanceSpec) -> Result<EstimateReport> {
    let instance = Instance::build(spec)?;
    let params = instance.theory_params()?;
    Ok(EstimateReport {
        family: instance.family,
        primal_step_bound: instance.problem.params().primal_step_bound(),
        coupling_condition: params.sigma_max / params.sigma_min,
        params,
    })
}

/// Human-readable explanation of an estimate failure.
pub fn diagnose(err: &HarnessError) -> Option<String> {
    match err {
        HarnessError::Core(saddle_core::Error::RankDeficient {
            sigma_min,
            sigma_max,
            rows,
            cols,
        }) => Some(format!(
            "the coupling matrix A ({rows}x{cols}) does not have full column rank: sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e}. \
             Linear convergence of the primal-dual methods requires rank(A) = d1 (in particular d2 >= d1); \
             no schedule or rate can be certified for this instance."
        )),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use saddle_core::instances::quadratic::QuadraticDocument;
    use saddle_core::InstanceDocument;

    fn doc(a: Vec<Vec<f64>>, d1: usize, d2: usize) -> InstanceSpec {
        let eye = |n: usize, v: f64| (0..n).map(|i| (0..n).map(|j| if i == j { v } else { 0.0 }).collect()).collect();
        InstanceSpec::Document {
            document: InstanceDocument::Quadratic(QuadraticDocument {
                b_mat: eye(d1, 0.0),
                b: vec![0.0; d1],
                a,
                c_mat: eye(d2, 0.5),
                c: vec![0.0; d2],
            }),
            components: 2,
            split_scale: 0.1,
            seed: 0,
        }
    }

    #[test]
    fn unit_quadratic_schedule() {
        let r = cmd_estimate(&doc(vec![vec![1.0]], 1, 1)).unwrap();
        let p = &r.params;
        assert!((p.lambda - 2.0).abs() < 1e-12);
        assert!((p.eta1 - 1.0 / 6.0).abs() < 1e-12);
        assert!((p.eta2 - 1.0).abs() < 1e-12);
        assert!((p.rate - 11.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn padded_diagonal_coupling() {
        let a = vec![vec![3.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]];
        let r = cmd_estimate(&doc(a, 2, 3)).unwrap();
        assert!((r.params.sigma_max - 3.0).abs() < 1e-12);
        assert!((r.params.sigma_min - 1.0).abs() < 1e-12);
        assert!((r.coupling_condition - 3.0).abs() < 1e-12);
    }

    #[test]
    fn wide_coupling_is_diagnosed() {
        let a = vec![vec![1.0, 0.0, 2.0], vec![0.0, 1.0, 1.0]];
        let err = cmd_estimate(&doc(a, 3, 2)).unwrap_err();
        let msg = diagnose(&err).expect("rank diagnostic");
        assert!(msg.contains("full column rank"), "{msg}");
        assert!(err.is_validation());
    }
}
