//! Building problem instances from their configuration.

use crate::config::InstanceSpec;
use crate::error::Result;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saddle_core::{
    random_mspbe, random_quadratic, FiniteSumSaddleProblem, InstanceDocument, MspbeInstance, PrimalFiniteSum, QuadraticSaddle, QuadraticSpec,
    ReferenceMode, SaddleProblem, SmoothedL1Regression,
};
use serde::Serialize;
use std::sync::Arc;

/// A constructed instance with whatever finite-sum views its family offers.
pub struct Instance {
    pub family: &'static str,
    pub problem: Arc<SaddleProblem<f64>>,
    pub finite_sum: Option<FiniteSumSaddleProblem<f64>>,
    pub primal_sum: Option<PrimalFiniteSum<f64>>,
    pub default_reference: ReferenceMode,
    /// Strong convexity and smoothness of `f`, when `f` is strongly convex.
    pub f_curvature: Option<(f64, f64)>,
}

/// Constants of an instance and the batch schedule they imply.
#[derive(Clone, Debug, Serialize)]
pub struct TheoryParams {
    pub d1: usize,
    pub d2: usize,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Bound on the component coupling norms, for finite-sum instances.
    pub m: Option<f64>,
    pub components: Option<usize>,
    pub lambda: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub rate: f64,
    /// Primal objective condition number `(ρ + σ_max²/α)/(σ_min²/β)`.
    pub primal_condition: f64,
}

impl Instance {
    pub fn build(spec: &InstanceSpec) -> Result<Self> {
        match *spec {
            InstanceSpec::Quadratic {
                d1,
                d2,
                strongly_convex,
                components,
                split_scale,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let qs = if strongly_convex {
                    QuadraticSpec::strongly_convex(d1, d2)
                } else {
                    QuadraticSpec::convex(d1, d2)
                };
                let q = random_quadratic::<f64, _>(&qs, &mut rng)?;
                Self::quadratic(&q, components, split_scale, &mut rng)
            }
            InstanceSpec::Regression {
                n,
                d,
                covariance,
                sharpness,
                lambda,
                seed,
            } => {
                let lambda = lambda.unwrap_or(0.01 / n as f64);
                Self::regression(&SmoothedL1Regression::generate(n, d, covariance, sharpness, lambda, seed)?)
            }
            InstanceSpec::Mspbe {
                n,
                d,
                gamma,
                normalize,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Self::mspbe(&random_mspbe::<f64, _>(n, d, gamma, normalize, &mut rng)?)
            }
            InstanceSpec::Document {
                ref document,
                components,
                split_scale,
                seed,
            } => match document {
                InstanceDocument::Quadratic(doc) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    Self::quadratic(&QuadraticSaddle::from_document(doc)?, components, split_scale, &mut rng)
                }
                InstanceDocument::SmoothedL1(doc) => Self::regression(&SmoothedL1Regression::from_document(doc)?),
                InstanceDocument::Mspbe(doc) => Self::mspbe(&MspbeInstance::from_document(doc)?),
            },
        }
    }

    fn quadratic(q: &QuadraticSaddle<f64>, components: usize, scale: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let problem = Arc::new(q.to_problem()?);
        let finite_sum = q.split(components, scale, rng)?;
        let primal_sum = q.primal_split(components, scale, rng)?;
        let c = q.curvature();
        Ok(Self {
            family: "quadratic",
            problem,
            finite_sum: Some(finite_sum),
            primal_sum: Some(primal_sum),
            default_reference: ReferenceMode::Direct,
            f_curvature: (c.f_min > 0.0).then_some((c.f_min, c.f_max)),
        })
    }

    fn regression(reg: &SmoothedL1Regression<f64>) -> Result<Self> {
        Ok(Self {
            family: "regression",
            problem: Arc::new(reg.to_problem()?),
            finite_sum: Some(reg.to_finite_sum()?),
            primal_sum: Some(reg.primal_finite_sum()?),
            default_reference: ReferenceMode::newton(),
            f_curvature: None,
        })
    }

    fn mspbe(m: &MspbeInstance<f64>) -> Result<Self> {
        Ok(Self {
            family: "mspbe",
            problem: Arc::new(m.to_problem()?),
            finite_sum: None,
            primal_sum: None,
            default_reference: ReferenceMode::Direct,
            f_curvature: None,
        })
    }

    pub fn theory_params(&self) -> Result<TheoryParams> {
        let p = *self.problem.params();
        let s = saddle_core::pdg_schedule(&p)?;
        Ok(TheoryParams {
            d1: self.problem.d1(),
            d2: self.problem.d2(),
            rho: p.rho,
            alpha: p.alpha,
            beta: p.beta,
            sigma_max: p.sigma_max,
            sigma_min: p.sigma_min,
            m: self.finite_sum.as_ref().map(|f| f.m_bound()),
            components: self.finite_sum.as_ref().map(|f| f.n()),
            lambda: s.lambda,
            eta1: s.eta1,
            eta2: s.eta2,
            rate: s.rate,
            primal_condition: p.primal_smoothness() / p.primal_strong_convexity(),
        })
    }
}
