//! Running one solver with resolved step sizes.

use crate::config::{SolverKind, StepParams};
use crate::error::{HarnessError, Result};
use crate::instance::Instance;
use nalgebra::DVector;
use saddle_core::{
    pdg_schedule, run_pdg, run_pdsvrg, run_primal_gd, run_primal_svrg, Iterate, PdgSteps, ReferenceSolution, Run, RunOptions, SnapshotRule,
    StoppingRule, SvrgConfig,
};

/// Everything shared by the runs of one experiment.
pub struct RunContext<'a> {
    pub instance: &'a Instance,
    pub reference: &'a ReferenceSolution<f64>,
}

impl RunContext<'_> {
    pub fn options(&self, stop: StoppingRule, diagnostics: bool) -> RunOptions<f64> {
        let opts = RunOptions::new(stop).with_reference(self.reference.x.clone(), Some(self.reference.y.clone()));
        if diagnostics {
            opts
        } else {
            opts.without_diagnostics()
        }
    }
}

/// Step sizes a solver uses when none are configured: the provable batch
/// schedule, `η = 2/(L+μ)` for primal descent, and the documented SVRG
/// defaults (`η₁ = η₂ = α/(10M²)`, `N = 2n`, `μ = 1`; a tenth of the batch
/// step and `N = 2n` for primal SVRG).
pub fn theory_steps(kind: SolverKind, instance: &Instance) -> Result<StepParams> {
    let p = instance.problem.params();
    Ok(match kind {
        SolverKind::Pdg => {
            let s = pdg_schedule(p)?;
            StepParams {
                eta1: s.eta1,
                eta2: Some(s.eta2),
                inner_iters: None,
                mu: None,
                snapshot: None,
            }
        }
        SolverKind::PrimalGd => StepParams {
            eta1: p.primal_step_bound(),
            eta2: None,
            inner_iters: None,
            mu: None,
            snapshot: None,
        },
        SolverKind::Pdsvrg => {
            let fsp = finite_sum(instance)?;
            let c = SvrgConfig::defaults_for(fsp, 1, 0);
            StepParams {
                eta1: c.eta1,
                eta2: Some(c.eta2),
                inner_iters: Some(c.inner_iters),
                mu: Some(c.mu),
                snapshot: Some(c.snapshot),
            }
        }
        SolverKind::PrimalSvrg => {
            let pfs = primal_sum(instance)?;
            StepParams {
                eta1: 0.1 * p.primal_step_bound(),
                eta2: None,
                inner_iters: Some(2 * pfs.n()),
                mu: None,
                snapshot: Some(SnapshotRule::Uniform),
            }
        }
    })
}

/// Fills the fields `steps` leaves open from the theory defaults and drops
/// the ones `kind` does not use.
pub fn complete_steps(kind: SolverKind, steps: &StepParams, instance: &Instance) -> Result<StepParams> {
    let base = theory_steps(kind, instance)?;
    let mut out = StepParams {
        eta1: steps.eta1,
        eta2: steps.eta2.or(base.eta2),
        inner_iters: steps.inner_iters.or(base.inner_iters),
        mu: steps.mu.or(base.mu),
        snapshot: steps.snapshot.or(base.snapshot),
    };
    if !kind.has_dual_step() {
        out.eta2 = None;
        out.mu = None;
    }
    if !kind.is_stochastic() {
        out.inner_iters = None;
        out.mu = None;
        out.snapshot = None;
    }
    Ok(out)
}

fn finite_sum(instance: &Instance) -> Result<&saddle_core::FiniteSumSaddleProblem<f64>> {
    instance
        .finite_sum
        .as_ref()
        .ok_or_else(|| HarnessError::Unsupported(format!("the {} family has no finite-sum decomposition", instance.family)))
}

fn primal_sum(instance: &Instance) -> Result<&saddle_core::PrimalFiniteSum<f64>> {
    instance
        .primal_sum
        .as_ref()
        .ok_or_else(|| HarnessError::Unsupported(format!("the {} family has no primal finite-sum decomposition", instance.family)))
}

fn svrg_config(steps: &StepParams, epochs: usize, seed: u64) -> SvrgConfig<f64> {
    SvrgConfig {
        eta1: steps.eta1,
        eta2: steps.eta2.unwrap_or(steps.eta1),
        inner_iters: steps.inner_iters.unwrap_or(1),
        mu: steps.mu.unwrap_or(1.0),
        epochs,
        seed,
        snapshot: steps.snapshot.unwrap_or_default(),
        verbose: false,
    }
}

/// Runs `kind` from the origin with completed `steps`. For the stochastic
/// solvers `stop.max_iters` bounds the number of epochs.
pub fn run_solver(kind: SolverKind, steps: &StepParams, ctx: &RunContext<'_>, stop: StoppingRule, seed: u64, diagnostics: bool) -> Result<Run<f64>> {
    let problem = &ctx.instance.problem;
    let (d1, d2) = (problem.d1(), problem.d2());
    let opts = ctx.options(stop, diagnostics);
    let run = match kind {
        SolverKind::Pdg => {
            let eta2 = steps.eta2.ok_or_else(|| HarnessError::Unsupported("pdg needs eta2".into()))?;
            run_pdg(problem, &Iterate::zeros(d1, d2), PdgSteps::Explicit { eta1: steps.eta1, eta2 }, &opts)?
        }
        SolverKind::PrimalGd => run_primal_gd(problem, &DVector::zeros(d1), steps.eta1, &opts)?,
        SolverKind::Pdsvrg => {
            let fsp = finite_sum(ctx.instance)?;
            run_pdsvrg(fsp, &Iterate::zeros(d1, d2), &svrg_config(steps, stop.max_iters.max(1), seed), &opts)?
        }
        SolverKind::PrimalSvrg => {
            let pfs = primal_sum(ctx.instance)?;
            run_primal_svrg(pfs, &DVector::zeros(d1), &svrg_config(steps, stop.max_iters.max(1), seed), &opts)?
        }
    };
    Ok(run)
}
