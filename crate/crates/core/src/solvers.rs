//! Batch first-order solvers: the simultaneous primal-dual gradient method and
//! gradient descent on the primal objective, both producing diagnostic traces.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, dist, joint_norm};
use crate::problem::{Iterate, SaddleProblem};
use crate::scalar::{lit, to_f64, Scalar};
use crate::theory::{pdg_schedule, PdgSchedule};
use crate::trace::{PotentialKind, StopReason, Trace, TraceRow};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// A run is declared divergent once its tracked error measure exceeds this
/// multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Backstop on the iterate norm, relative to `1 + ‖initial iterate‖`, used
/// when no error measure is tracked.
const NORM_BLOWUP_FACTOR: f64 = 1e12;

/// When to stop a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// Maximum number of iterations (epochs for the stochastic solvers). Zero
    /// yields a trace holding just the initial row.
    pub max_iters: usize,
    /// Stop once the gradient norm, or `‖x − x*‖` when `x*` is known, is at
    /// most this value.
    #[serde(default)]
    pub tol: Option<f64>,
    /// Stop once this many full-gradient units have been spent.
    #[serde(default)]
    pub budget: Option<f64>,
}

impl StoppingRule {
    pub fn new(max_iters: usize, tol: Option<f64>) -> Result<Self> {
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!("tolerance must be positive, got {t}")));
            }
        }
        Ok(Self {
            max_iters,
            tol,
            budget: None,
        })
    }

    /// Exactly `max_iters` iterations, no tolerance.
    pub fn iterations(max_iters: usize) -> Self {
        Self {
            max_iters,
            tol: None,
            budget: None,
        }
    }

    pub fn with_budget(mut self, units: f64) -> Self {
        self.budget = Some(units);
        self
    }

    /// Whether `units` exhausts the budget.
    pub fn out_of_budget(&self, units: f64) -> bool {
        self.budget.is_some_and(|b| units >= b)
    }
}

/// Options shared by all solver runs.
#[derive(Clone, Debug)]
pub struct RunOptions<T: Scalar> {
    pub stop: StoppingRule,
    pub x_star: Option<DVector<T>>,
    pub y_star: Option<DVector<T>>,
    /// Which potential to record; `None` picks the solver's natural one when `x*` is known.
    pub potential: Option<PotentialKind>,
    /// Record `b_t` and the potential (costs one extra coupling product per row).
    pub diagnostics: bool,
    /// Record the primal objective value when value oracles exist.
    pub primal_values: bool,
}

impl<T: Scalar> RunOptions<T> {
    pub fn new(stop: StoppingRule) -> Self {
        Self {
            stop,
            x_star: None,
            y_star: None,
            potential: None,
            diagnostics: true,
            primal_values: false,
        }
    }

    pub fn with_reference(mut self, x_star: DVector<T>, y_star: Option<DVector<T>>) -> Self {
        self.x_star = Some(x_star);
        self.y_star = y_star;
        self
    }

    pub fn with_potential(mut self, kind: PotentialKind) -> Self {
        self.potential = Some(kind);
        self
    }

    pub fn without_diagnostics(mut self) -> Self {
        self.diagnostics = false;
        self
    }

    pub fn with_primal_values(mut self) -> Self {
        self.primal_values = true;
        self
    }

    fn check(&self, d1: usize, d2: usize) -> Result<()> {
        if let Some(xs) = &self.x_star {
            check_dim("x_star", d1, xs.len())?;
        }
        if let Some(ys) = &self.y_star {
            check_dim("y_star", d2, ys.len())?;
        }
        Ok(())
    }
}

/// A finished run: the trace and the final iterate.
#[derive(Clone, Debug)]
pub struct Run<T: Scalar> {
    pub trace: Trace,
    pub last: Iterate<T>,
}

/// Step sizes for [`run_pdg`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PdgSteps<T: Scalar> {
    Schedule(PdgSchedule<T>),
    Explicit { eta1: T, eta2: T },
}

impl<T: Scalar> PdgSteps<T> {
    pub fn etas(&self) -> (T, T) {
        match *self {
            PdgSteps::Schedule(s) => (s.eta1, s.eta2),
            PdgSteps::Explicit { eta1, eta2 } => (eta1, eta2),
        }
    }
}

impl<T: Scalar> From<PdgSchedule<T>> for PdgSteps<T> {
    fn from(s: PdgSchedule<T>) -> Self {
        PdgSteps::Schedule(s)
    }
}

fn check_step<T: Scalar>(name: &str, eta: T) -> Result<()> {
    if !(eta > T::zero() && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {eta}")));
    }
    Ok(())
}

/// Tracks divergence against the first recorded value of an error measure.
pub(crate) struct BlowupGuard {
    potential0: Option<f64>,
    dist0: Option<f64>,
    norm_bound: f64,
}

impl BlowupGuard {
    pub(crate) fn new(first: &TraceRow, initial_norm: f64) -> Self {
        Self {
            potential0: first.potential.filter(|p| *p > 0.0),
            dist0: first.dist_x.filter(|d| *d > 0.0),
            norm_bound: NORM_BLOWUP_FACTOR * (1.0 + initial_norm),
        }
    }

    /// A description of the blow-up, if any.
    pub(crate) fn check(&self, row: &TraceRow, norm: f64) -> Option<String> {
        if !norm.is_finite() {
            return Some("non-finite iterate".into());
        }
        if let (Some(p0), Some(p)) = (self.potential0, row.potential) {
            if !(p <= DIVERGENCE_FACTOR * p0) {
                return Some(format!("potential {p:e} exceeds {DIVERGENCE_FACTOR:e} times its initial value {p0:e}"));
            }
        } else if let (Some(d0), Some(d)) = (self.dist0, row.dist_x) {
            if !(d <= DIVERGENCE_FACTOR * d0) {
                return Some(format!("distance {d:e} exceeds {DIVERGENCE_FACTOR:e} times its initial value {d0:e}"));
            }
        }
        if !(norm <= self.norm_bound) {
            return Some(format!("iterate norm {norm:e} exceeds {:e}", self.norm_bound));
        }
        None
    }
}

pub(crate) fn diverged(iteration: usize, reason: String, trace: Trace) -> Error {
    Error::Diverged {
        iteration,
        reason,
        trace: Box::new(trace),
    }
}

/// Computes trace rows for saddle iterates.
pub(crate) struct Recorder<'a, T: Scalar> {
    pub(crate) problem: &'a SaddleProblem<T>,
    pub(crate) opts: &'a RunOptions<T>,
    pub(crate) kind: Option<PotentialKind>,
    /// `λ` for `P`, `μ` for `Q`.
    pub(crate) weight: T,
    /// `(η₁, η₂)` for `R`.
    pub(crate) etas: (T, T),
    start: Instant,
}

impl<'a, T: Scalar> Recorder<'a, T> {
    pub(crate) fn new(problem: &'a SaddleProblem<T>, opts: &'a RunOptions<T>, kind: Option<PotentialKind>, weight: T, etas: (T, T)) -> Self {
        Self {
            problem,
            opts,
            kind,
            weight,
            etas,
            start: Instant::now(),
        }
    }

    pub(crate) fn row(&self, trace: &mut Trace, iter: usize, grad_evals: f64, x: &DVector<T>, y: &DVector<T>) -> Result<TraceRow> {
        let dist_x = self.opts.x_star.as_ref().map(|xs| dist(x, xs));
        let dist_y = self.opts.y_star.as_ref().map(|ys| dist(y, ys));
        let mut b_t = None;
        if self.opts.diagnostics && all_finite(x) && all_finite(y) {
            let (target, evals) = self.problem.conj_grad_counted(&(self.problem.coupling() * x))?;
            trace.inner_evals += evals as u64;
            b_t = Some(dist(y, &target));
        }
        let potential = match (self.kind, dist_x, b_t) {
            (Some(PotentialKind::P), Some(a), Some(b)) => Some(self.weight * a + b),
            (Some(PotentialKind::Q), Some(a), Some(b)) => Some(a * a + self.weight * b * b),
            (Some(PotentialKind::R), Some(a), _) => dist_y.map(|dy| self.etas.1 * a * a + self.etas.0 * dy * dy),
            _ => None,
        };
        let primal_value = if self.opts.primal_values && all_finite(x) {
            self.problem.primal_value(x)?.map(to_f64)
        } else {
            None
        };
        Ok(TraceRow {
            iter,
            grad_evals,
            dist_x: dist_x.map(to_f64),
            dist_y: dist_y.map(to_f64),
            b_t: b_t.map(to_f64),
            potential: potential.map(to_f64),
            primal_value,
            elapsed_seconds: self.start.elapsed().as_secs_f64(),
        })
    }
}

/// One simultaneous primal-dual gradient step: both blocks read `(x_t, y_t)`.
/// Costs one full-gradient unit.
pub fn pdg_step<T: Scalar>(problem: &SaddleProblem<T>, it: &Iterate<T>, eta1: T, eta2: T) -> Result<Iterate<T>> {
    check_step("eta1", eta1)?;
    check_step("eta2", eta2)?;
    let (gx, gy) = problem.grad_lagrangian(&it.x, &it.y)?;
    let x = &it.x - gx * eta1;
    let y = &it.y + gy * eta2;
    if !(all_finite(&x) && all_finite(&y)) {
        return Err(diverged(it.iter + 1, "non-finite iterate".into(), Trace::default()));
    }
    Ok(Iterate {
        x,
        y,
        iter: it.iter + 1,
        grad_evals: it.grad_evals + 1.0,
    })
}

/// Runs the primal-dual gradient method from `init`.
///
/// When `x*` is known the trace records `P_t` with the `λ` of the
/// problem's theoretical schedule (or `R_t` when requested and `y*` is known).
pub fn run_pdg<T: Scalar>(problem: &SaddleProblem<T>, init: &Iterate<T>, steps: impl Into<PdgSteps<T>>, opts: &RunOptions<T>) -> Result<Run<T>> {
    let steps = steps.into();
    let (eta1, eta2) = steps.etas();
    check_step("eta1", eta1)?;
    check_step("eta2", eta2)?;
    check_dim("initial x", problem.d1(), init.x.len())?;
    check_dim("initial y", problem.d2(), init.y.len())?;
    opts.check(problem.d1(), problem.d2())?;

    let kind = match opts.potential {
        Some(PotentialKind::Q) => {
            return Err(Error::InvalidParameter("the batch method records P or R, not Q".into()));
        }
        Some(k) => Some(k),
        None if opts.x_star.is_some() => Some(PotentialKind::P),
        None => None,
    };
    let lambda = match steps {
        PdgSteps::Schedule(s) => s.lambda,
        PdgSteps::Explicit { .. } => pdg_schedule(problem.params())?.lambda,
    };
    let rec = Recorder::new(problem, opts, kind, lambda, (eta1, eta2));
    let mut trace = Trace::new(kind);

    let mut x = init.x.clone();
    let mut y = init.y.clone();
    let mut units = init.grad_evals;
    let first = rec.row(&mut trace, 0, units, &x, &y)?;
    let guard = BlowupGuard::new(&first, to_f64(joint_norm(&x, &y)));
    trace.rows.push(first);

    let tol = opts.stop.tol;
    let reached = |row: &TraceRow| matches!((tol, row.dist_x), (Some(t), Some(d)) if d <= t);
    if reached(&trace.rows[0]) {
        trace.stop_reason = Some(StopReason::DistanceTolerance);
        return Ok(Run {
            trace,
            last: Iterate {
                x,
                y,
                iter: init.iter,
                grad_evals: units,
            },
        });
    }

    let mut gx = DVector::zeros(problem.d1());
    let mut gy = DVector::zeros(problem.d2());
    let mut stop_reason = StopReason::MaxIterations;
    for t in 0..opts.stop.max_iters {
        problem.grad_lagrangian_into(&x, &y, &mut gx, &mut gy);
        if let (Some(tl), None) = (tol, &opts.x_star) {
            if to_f64(joint_norm(&gx, &gy)) <= tl {
                stop_reason = StopReason::GradientTolerance;
                break;
            }
        }
        x.axpy(-eta1, &gx, T::one());
        y.axpy(eta2, &gy, T::one());
        units += 1.0;

        let row = rec.row(&mut trace, t + 1, units, &x, &y)?;
        let why = guard.check(&row, to_f64(joint_norm(&x, &y)));
        let done = reached(&row);
        trace.rows.push(row);
        if let Some(reason) = why {
            return Err(diverged(t + 1, reason, trace));
        }
        if done {
            stop_reason = StopReason::DistanceTolerance;
            break;
        }
        if opts.stop.out_of_budget(units) {
            stop_reason = StopReason::Budget;
            break;
        }
    }
    trace.stop_reason = Some(stop_reason);
    let iter = init.iter + trace.rows.len() - 1;
    Ok(Run {
        trace,
        last: Iterate {
            x,
            y,
            iter,
            grad_evals: units,
        },
    })
}

/// Gradient descent on the primal objective `P(x) = f(x) + g*(Ax)`, one
/// full-gradient unit per step. Rows report `dist_y` for the implied dual
/// point `∇g*(Ax)` when `y*` is known.
pub fn run_primal_gd<T: Scalar>(problem: &SaddleProblem<T>, x0: &DVector<T>, eta: T, opts: &RunOptions<T>) -> Result<Run<T>> {
    check_step("eta", eta)?;
    check_dim("initial x", problem.d1(), x0.len())?;
    opts.check(problem.d1(), problem.d2())?;
    let start = Instant::now();
    let mut trace = Trace::new(None);
    let a = problem.coupling();

    let mut x = x0.clone();
    let mut grad = DVector::zeros(problem.d1());
    let mut units = 0.0;
    let tol = opts.stop.tol;
    let mut stop_reason = StopReason::MaxIterations;
    let mut guard: Option<BlowupGuard> = None;

    for t in 0..=opts.stop.max_iters {
        let (y, evals) = problem.conj_grad_counted(&(a * &x))?;
        trace.inner_evals += evals as u64;
        let row = TraceRow {
            iter: t,
            grad_evals: units,
            dist_x: opts.x_star.as_ref().map(|xs| to_f64(dist(&x, xs))),
            dist_y: opts.y_star.as_ref().map(|ys| to_f64(dist(&y, ys))),
            b_t: None,
            potential: None,
            primal_value: if opts.primal_values {
                problem.primal_value(&x)?.map(to_f64)
            } else {
                None
            },
            elapsed_seconds: start.elapsed().as_secs_f64(),
        };
        let norm = to_f64(x.norm());
        let why = match &guard {
            Some(g) => g.check(&row, norm),
            None => {
                guard = Some(BlowupGuard::new(&row, norm));
                None
            }
        };
        let done = matches!((tol, row.dist_x), (Some(tl), Some(d)) if d <= tl);
        trace.rows.push(row);
        if let Some(reason) = why {
            return Err(diverged(t, reason, trace));
        }
        if done {
            stop_reason = StopReason::DistanceTolerance;
            break;
        }
        if t == opts.stop.max_iters {
            break;
        }
        if opts.stop.out_of_budget(units) {
            stop_reason = StopReason::Budget;
            break;
        }
        problem.f().gradient_into(&x, &mut grad);
        grad.gemv_tr(T::one(), a, &y, T::one());
        if let (Some(tl), None) = (tol, &opts.x_star) {
            if to_f64(grad.norm()) <= tl {
                stop_reason = StopReason::GradientTolerance;
                break;
            }
        }
        x.axpy(-eta, &grad, T::one());
        units += 1.0;
    }
    trace.stop_reason = Some(stop_reason);
    let y = problem.conj_grad(&(a * &x))?;
    let iter = trace.rows.len() - 1;
    Ok(Run {
        trace,
        last: Iterate {
            x,
            y,
            iter,
            grad_evals: units,
        },
    })
}

/// How [`reference_solution`] computes `(x*, y*)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ReferenceMode {
    /// Dense solve of the stationarity system; both blocks must be quadratic.
    Direct,
    /// Primal gradient descent with step `2/(γ+δ)` until `‖∇P(x)‖ ≤ tol`.
    Iterate { tol: f64, max_iters: usize },
    /// Damped Newton iterations on the primal objective until `‖∇P(x)‖ ≤ tol`;
    /// needs Hessian oracles.
    Newton { tol: f64, max_iters: usize },
}

impl ReferenceMode {
    pub fn iterate() -> Self {
        ReferenceMode::Iterate {
            tol: 1e-12,
            max_iters: 1_000_000,
        }
    }

    pub fn newton() -> Self {
        ReferenceMode::Newton { tol: 1e-12, max_iters: 100 }
    }
}

/// A saddle point with its relative optimality residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSolution<T: Scalar> {
    pub x: DVector<T>,
    pub y: DVector<T>,
    /// `‖∇f(x) + Aᵀy‖` relative to the magnitude of its terms.
    pub residual_x: T,
    /// `‖Ax − ∇g(y)‖` relative to the magnitude of its terms.
    pub residual_y: T,
}

impl<T: Scalar> ReferenceSolution<T> {
    /// Both relative residuals are at most `tol`.
    pub fn certified(&self, tol: f64) -> bool {
        to_f64(self.residual_x) <= tol && to_f64(self.residual_y) <= tol
    }
}

/// Computes the saddle point `(x*, y*)`.
pub fn reference_solution<T: Scalar>(problem: &SaddleProblem<T>, mode: ReferenceMode) -> Result<ReferenceSolution<T>> {
    let (x, y) = match mode {
        ReferenceMode::Direct => problem.solve_quadratic_stationarity()?,
        ReferenceMode::Iterate { tol, max_iters } => {
            let eta = problem.params().primal_step_bound();
            let opts = RunOptions::new(StoppingRule::new(max_iters, Some(tol))?);
            let run = run_primal_gd(problem, &DVector::zeros(problem.d1()), eta, &opts)?;
            if run.trace.stop_reason != Some(StopReason::GradientTolerance) {
                let residual = to_f64(problem.grad_primal(&run.last.x)?.norm());
                return Err(Error::ConvergenceFailure {
                    what: "primal gradient descent reference solve",
                    iterations: max_iters,
                    residual,
                });
            }
            (run.last.x, run.last.y)
        }
        ReferenceMode::Newton { tol, max_iters } => {
            let x = newton_primal(problem, tol, max_iters)?;
            let y = problem.conj_grad(&(problem.coupling() * &x))?;
            (x, y)
        }
    };
    let (residual_x, residual_y) = problem.relative_optimality_residuals(&x, &y)?;
    Ok(ReferenceSolution {
        x,
        y,
        residual_x,
        residual_y,
    })
}

/// Damped Newton on `P`, backtracking on the objective value when available
/// and on the gradient norm otherwise.
fn newton_primal<T: Scalar>(problem: &SaddleProblem<T>, tol: f64, max_iters: usize) -> Result<DVector<T>> {
    let merit = |x: &DVector<T>, g: &DVector<T>| -> Result<T> {
        Ok(match problem.primal_value(x)? {
            Some(v) => v,
            None => g.norm(),
        })
    };
    let mut x = DVector::zeros(problem.d1());
    let mut g = problem.grad_primal(&x)?;
    let mut m = merit(&x, &g)?;
    for _ in 0..max_iters {
        if to_f64(g.norm()) <= tol {
            return Ok(x);
        }
        let h = problem.primal_hessian(&x)?;
        let chol = h.cholesky().ok_or_else(|| Error::NotPositiveDefinite("primal Hessian".into()))?;
        let dir = chol.solve(&g);
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &x - &dir * step;
            let gc = problem.grad_primal(&cand)?;
            let mc = merit(&cand, &gc)?;
            if mc < m || (mc <= m && gc.norm() < g.norm()) {
                x = cand;
                g = gc;
                m = mc;
                accepted = true;
                break;
            }
            step *= lit(0.5);
        }
        if !accepted {
            // the merit no longer resolves progress; take the full step if it
            // shrinks the gradient
            let cand = &x - &dir;
            let gc = problem.grad_primal(&cand)?;
            if gc.norm() < g.norm() {
                x = cand;
                g = gc;
                m = merit(&x, &g)?;
            } else {
                break;
            }
        }
    }
    let residual = to_f64(g.norm());
    if residual <= tol {
        Ok(x)
    } else {
        Err(Error::ConvergenceFailure {
            what: "Newton reference solve",
            iterations: max_iters,
            residual,
        })
    }
}
