//! `verify`: contraction certificates and one-step inequalities on seeded
//! random quadratic instances.

use crate::error::Result;
use nalgebra::DVector;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saddle_core::theory::{certify_one_step, certify_pdg, certify_strongly_convex};
use saddle_core::{
    pdg_schedule, random_quadratic, reference_solution, run_pdg, run_pdsvrg, FiniteSumSaddleProblem, Iterate, QuadraticSpec, ReferenceMode,
    RunOptions, SnapshotRule, StopReason, StoppingRule, SvrgConfig,
};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suite {
    /// Per-step contraction of the batch potential under the provable schedule.
    #[serde(rename = "theorem1")]
    Theorem1,
    /// The provable iteration budget to reach `‖x − x*‖ ≤ 10⁻⁶`.
    #[serde(rename = "iteration_budget")]
    IterationBudget,
    /// Per-step contraction when both blocks are strongly convex.
    #[serde(rename = "appendixB")]
    AppendixB,
    /// The one-step inequalities behind the batch certificate.
    #[serde(rename = "props")]
    Props,
    /// Existence of an SVRG configuration halving its potential per epoch.
    #[serde(rename = "svrg_halving")]
    SvrgHalving,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Theorem1,
        Suite::IterationBudget,
        Suite::AppendixB,
        Suite::Props,
        Suite::SvrgHalving,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::IterationBudget => "iteration_budget",
            Suite::AppendixB => "appendixB",
            Suite::Props => "props",
            Suite::SvrgHalving => "svrg_halving",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }

    fn default_iters(self) -> usize {
        match self {
            Suite::Theorem1 | Suite::AppendixB => 500,
            Suite::Props => 200,
            Suite::IterationBudget => 0,
            Suite::SvrgHalving => 10,
        }
    }
}

/// Grid of SVRG configurations searched by the halving suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalvingGrid {
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub inner_iters: Vec<usize>,
    pub mu: Vec<f64>,
    /// Seeds used to screen every configuration; the best is then re-run on `seeds`.
    pub screen_seeds: u64,
    pub seeds: u64,
    pub components: usize,
    pub dim: usize,
    pub split_scale: f64,
    /// Largest acceptable mean per-epoch ratio.
    pub target_ratio: f64,
}

impl Default for HalvingGrid {
    fn default() -> Self {
        Self {
            eta1: vec![0.003, 0.01, 0.03, 0.1],
            eta2: vec![0.03, 0.1, 0.3],
            inner_iters: vec![100, 500],
            mu: vec![1.0],
            screen_seeds: 5,
            seeds: 30,
            components: 50,
            dim: 10,
            split_scale: 0.3,
            target_ratio: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    /// Steps per run (epochs for the halving suite); suite default when `None`.
    pub iters: Option<usize>,
    /// Props only: set `η₁` to this multiple of the primal step bound instead
    /// of the schedule's value.
    pub eta1_scale: Option<f64>,
    pub halving: HalvingGrid,
}

impl VerifyOptions {
    pub fn new(suite: Suite, trials: usize, seed: u64) -> Self {
        Self {
            suite,
            trials,
            seed,
            iters: None,
            eta1_scale: None,
            halving: HalvingGrid::default(),
        }
    }
}

/// Result of one random instance.
#[derive(Clone, Debug, Serialize)]
pub struct TrialReport {
    pub trial: usize,
    pub d1: usize,
    pub d2: usize,
    pub passed: bool,
    /// Inequality or contraction failures while the hypotheses held.
    pub violations: usize,
    /// Failures outside the hypotheses (props only); not refutations.
    pub out_of_precondition: usize,
    /// Largest observed one-step ratio, or the mean epoch ratio for the halving suite.
    pub worst_ratio: Option<f64>,
    /// Rate the ratio is compared with.
    pub rate: Option<f64>,
    /// Iterations used against the allowed budget (iteration_budget only).
    pub iterations: Option<usize>,
    pub budget: Option<usize>,
    /// Achieving SVRG configuration (halving only).
    pub config: Option<SvrgConfig<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub suite: &'static str,
    pub trials: usize,
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub out_of_precondition: usize,
    /// Largest `worst_ratio` over trials.
    pub worst_ratio: Option<f64>,
    /// Largest `worst_ratio − rate` over trials (negative when every trial beat its rate).
    pub worst_margin: Option<f64>,
    pub elapsed_seconds: f64,
    pub details: Vec<TrialReport>,
}

impl VerifyReport {
    /// Whether any trial contradicted the claim being checked.
    pub fn refuted(&self) -> bool {
        self.failed > 0
    }

    pub fn line(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.6e}"));
        format!(
            "{}: {}/{} passed, {} out-of-precondition, worst ratio {}, worst margin {} ({:.2}s)",
            self.suite,
            self.passed,
            self.trials,
            self.out_of_precondition,
            fmt(self.worst_ratio),
            fmt(self.worst_margin),
            self.elapsed_seconds
        )
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64))
}

fn blank(trial: usize, d1: usize, d2: usize) -> TrialReport {
    TrialReport {
        trial,
        d1,
        d2,
        passed: true,
        violations: 0,
        out_of_precondition: 0,
        worst_ratio: None,
        rate: None,
        iterations: None,
        budget: None,
        config: None,
    }
}

/// Samples `trials` random instances (dimensions at most 20) and runs the suite's check on each.
pub fn cmd_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let start = Instant::now();
    let iters = opts.iters.unwrap_or(opts.suite.default_iters());
    let mut details = Vec::with_capacity(opts.trials);
    for trial in 0..opts.trials {
        let mut rng = trial_rng(opts.seed, trial);
        let report = match opts.suite {
            Suite::SvrgHalving => halving_trial(trial, &opts.halving, iters, &mut rng)?,
            suite => {
                let (d1, d2) = QuadraticSpec::random_dims(&mut rng);
                let spec = if suite == Suite::AppendixB {
                    QuadraticSpec::strongly_convex(d1, d2)
                } else {
                    QuadraticSpec::convex(d1, d2)
                };
                let q = random_quadratic::<f64, _>(&spec, &mut rng)?;
                let problem = q.to_problem()?;
                let sol = reference_solution(&problem, ReferenceMode::Direct)?;
                let mut t = blank(trial, d1, d2);
                match suite {
                    Suite::Theorem1 => {
                        let c = certify_pdg(&problem, &sol.x, iters)?;
                        t.violations = c.violations;
                        t.worst_ratio = Some(c.worst_ratio);
                        t.rate = Some(c.rate);
                    }
                    Suite::AppendixB => {
                        let curv = q.curvature();
                        let c = certify_strongly_convex(&problem, &sol.x, &sol.y, curv.f_min, curv.f_max, iters)?;
                        t.violations = c.violations;
                        t.worst_ratio = Some(c.worst_ratio);
                        t.rate = Some(c.rate);
                    }
                    Suite::Props => {
                        let s = pdg_schedule(problem.params())?;
                        let eta1 = opts.eta1_scale.map_or(s.eta1, |k| k * problem.params().primal_step_bound());
                        let r = certify_one_step(&problem, &sol.x, eta1, s.eta2, iters)?;
                        t.violations = r.refuted();
                        t.out_of_precondition = r.out_of_precondition();
                    }
                    Suite::IterationBudget => {
                        let s = pdg_schedule(problem.params())?;
                        let zero = Iterate::zeros(d1, d2);
                        let p0 = saddle_core::potential_p(&problem, &zero.x, &zero.y, &sol.x, s.lambda)?;
                        let budget = s.iteration_budget(problem.params(), p0, 1e-6);
                        let run_opts = RunOptions::new(StoppingRule::new(budget, Some(1e-6))?)
                            .with_reference(sol.x.clone(), None)
                            .without_diagnostics();
                        let run = run_pdg(&problem, &zero, s, &run_opts)?;
                        let reached = run.trace.stop_reason == Some(StopReason::DistanceTolerance);
                        t.violations = usize::from(!reached);
                        t.iterations = Some(run.last.iter);
                        t.budget = Some(budget);
                    }
                    Suite::SvrgHalving => unreachable!(),
                }
                t.passed = t.violations == 0;
                t
            }
        };
        details.push(report);
    }
    let passed = details.iter().filter(|t| t.passed).count();
    let worst_ratio = details.iter().filter_map(|t| t.worst_ratio).reduce(f64::max);
    let worst_margin = details.iter().filter_map(|t| Some(t.worst_ratio? - t.rate?)).reduce(f64::max);
    Ok(VerifyReport {
        suite: opts.suite.name(),
        trials: opts.trials,
        seed: opts.seed,
        passed,
        failed: opts.trials - passed,
        out_of_precondition: details.iter().map(|t| t.out_of_precondition).sum(),
        worst_ratio,
        worst_margin,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        details,
    })
}

/// Mean of `Q_{t+1}/Q_t` over `seeds` runs of `epochs` epochs from `(1, 1)`.
pub fn mean_epoch_ratio(
    fsp: &FiniteSumSaddleProblem<f64>,
    x_star: &DVector<f64>,
    y_star: &DVector<f64>,
    cfg: SvrgConfig<f64>,
    seeds: u64,
) -> Result<f64> {
    let opts = RunOptions::new(StoppingRule::iterations(0)).with_reference(x_star.clone(), Some(y_star.clone()));
    let init = Iterate::new(DVector::from_element(fsp.d1(), 1.0), DVector::from_element(fsp.d2(), 1.0));
    let (mut sum, mut count) = (0.0, 0usize);
    for seed in 0..seeds {
        let run = match run_pdsvrg(fsp, &init, &SvrgConfig { seed, ..cfg }, &opts) {
            Ok(run) => run,
            Err(saddle_core::Error::Diverged { .. }) => return Ok(f64::INFINITY),
            Err(e) => return Err(e.into()),
        };
        for w in run.trace.rows.windows(2) {
            let (a, b) = (w[0].potential.unwrap_or(f64::NAN), w[1].potential.unwrap_or(f64::NAN));
            sum += b / a;
            count += 1;
        }
    }
    let mean = sum / count.max(1) as f64;
    Ok(if mean.is_finite() { mean } else { f64::INFINITY })
}

fn halving_trial(trial: usize, grid: &HalvingGrid, epochs: usize, rng: &mut ChaCha8Rng) -> Result<TrialReport> {
    let d = grid.dim;
    let q = random_quadratic::<f64, _>(&QuadraticSpec::convex(d, d), rng)?;
    let fsp = q.split(grid.components, grid.split_scale, rng)?;
    let sol = reference_solution(fsp.aggregate(), ReferenceMode::Direct)?;
    let base = SvrgConfig {
        eta1: 1.0,
        eta2: 1.0,
        inner_iters: 1,
        mu: 1.0,
        epochs,
        seed: 0,
        snapshot: SnapshotRule::Uniform,
        verbose: false,
    };
    let mut best: Option<(f64, SvrgConfig<f64>)> = None;
    for &eta1 in &grid.eta1 {
        for &eta2 in &grid.eta2 {
            for &inner_iters in &grid.inner_iters {
                for &mu in &grid.mu {
                    let cfg = SvrgConfig {
                        eta1,
                        eta2,
                        inner_iters,
                        mu,
                        ..base
                    };
                    let r = mean_epoch_ratio(&fsp, &sol.x, &sol.y, cfg, grid.screen_seeds)?;
                    if best.as_ref().is_none_or(|(b, _)| r < *b) {
                        best = Some((r, cfg));
                    }
                }
            }
        }
    }
    let mut t = blank(trial, d, d);
    if let Some((_, cfg)) = best {
        let ratio = mean_epoch_ratio(&fsp, &sol.x, &sol.y, cfg, grid.seeds)?;
        t.worst_ratio = Some(ratio);
        t.rate = Some(grid.target_ratio);
        t.config = Some(cfg);
        t.violations = usize::from(!(ratio <= grid.target_ratio));
    } else {
        t.violations = 1;
    }
    t.passed = t.violations == 0;
    Ok(t)
}
