//! Step-size grid search.
//!
//! Every grid point runs to a fixed grad-unit budget. Without a distance
//! target the point with the smallest final `‖x − x*‖` wins. With a target
//! (`stopping.tol`) points that reach it are ranked first, by the grad-units
//! they needed, and the budget of later points is capped at the best count
//! so far, since a slower point cannot win. Ties go to the smaller `η₁`, then
//! the smaller `η₂`.

use crate::config::{GridSpec, SolverKind, StepParams};
use crate::error::{HarnessError, Result};
use crate::runner::{complete_steps, run_solver, RunContext};
use saddle_core::{Error as CoreError, StoppingRule};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    /// Reached the distance target.
    Converged,
    /// Used its budget (or iteration limit) without reaching the target.
    Finished,
    Diverged,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridRow {
    pub steps: StepParams,
    pub status: PointStatus,
    pub final_dist_x: Option<f64>,
    pub units_to_target: Option<f64>,
    pub grad_evals: f64,
    /// Budget the point actually ran with, after pruning.
    pub budget: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the selected point; `None` when every point diverged.
    pub best: Option<usize>,
}

impl GridResult {
    pub fn best_row(&self) -> Option<&GridRow> {
        self.best.map(|k| &self.rows[k])
    }

    /// The selected point, or the "no convergent schedule" error.
    pub fn require_best(&self, solver: &str) -> Result<&GridRow> {
        self.best_row().ok_or_else(|| HarnessError::NoConvergentSchedule {
            solver: solver.to_string(),
            points: self.rows.len(),
        })
    }

    pub fn count(&self, status: PointStatus) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }
}

/// All grid points with theory defaults filled in, in `η₁`, `η₂`, `N`, `μ` order.
pub fn expand(kind: SolverKind, spec: &GridSpec, ctx: &RunContext<'_>) -> Result<Vec<StepParams>> {
    let eta2: Vec<Option<f64>> = match (&spec.eta2, kind.has_dual_step()) {
        (Some(axis), true) => axis.values().into_iter().map(Some).collect(),
        _ => vec![None],
    };
    let inner: Vec<Option<usize>> = if kind.is_stochastic() && !spec.inner_iters.is_empty() {
        spec.inner_iters.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let mu: Vec<Option<f64>> = if kind == SolverKind::Pdsvrg && !spec.mu.is_empty() {
        spec.mu.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let mut e1 = spec.eta1.values();
    e1.sort_by(f64::total_cmp);
    e1.dedup();
    let mut points = Vec::new();
    for &eta1 in &e1 {
        for &eta2 in &eta2 {
            for &n in &inner {
                for &m in &mu {
                    let raw = StepParams {
                        eta1,
                        eta2,
                        inner_iters: n,
                        mu: m,
                        snapshot: None,
                    };
                    points.push(complete_steps(kind, &raw, ctx.instance)?);
                }
            }
        }
    }
    Ok(points)
}

/// Runs every point of `spec` for `kind` under `stop` (with the default
/// budget when it sets none) and selects the best one.
pub fn run_grid(kind: SolverKind, spec: &GridSpec, ctx: &RunContext<'_>, stop: StoppingRule, seed: u64) -> Result<GridResult> {
    let points = expand(kind, spec, ctx)?;
    let budget = stop.budget.unwrap_or(crate::config::DEFAULT_BUDGET);
    let target = stop.tol;
    let mut rows: Vec<Option<GridRow>> = vec![None; points.len()];
    let mut best_units = f64::INFINITY;
    // Large steps first: they diverge or converge quickly, which tightens the
    // pruning budget before the slow small-step points run.
    for (k, steps) in points.iter().enumerate().rev() {
        let cap = budget.min(best_units);
        let rule = StoppingRule { budget: Some(cap), ..stop };
        let row = match run_solver(kind, steps, ctx, rule, seed, false) {
            Ok(run) => {
                let reached = target.and_then(|t| run.trace.units_to_reach(t));
                if let Some(u) = reached {
                    best_units = best_units.min(u);
                }
                let final_dist = run.trace.final_dist_x();
                let finite = final_dist.is_some_and(f64::is_finite);
                GridRow {
                    steps: *steps,
                    status: match (reached, finite) {
                        (_, false) => PointStatus::Diverged,
                        (Some(_), true) => PointStatus::Converged,
                        (None, true) => PointStatus::Finished,
                    },
                    final_dist_x: final_dist,
                    units_to_target: reached,
                    grad_evals: run.last.grad_evals,
                    budget: cap,
                }
            }
            Err(HarnessError::Core(CoreError::Diverged { trace, .. })) => GridRow {
                steps: *steps,
                status: PointStatus::Diverged,
                final_dist_x: trace.final_dist_x(),
                units_to_target: None,
                grad_evals: trace.last().map_or(0.0, |r| r.grad_evals),
                budget: cap,
            },
            Err(e) => return Err(e),
        };
        rows[k] = Some(row);
    }
    let rows: Vec<GridRow> = rows.into_iter().map(|r| r.expect("every point ran")).collect();
    let best = select(&rows);
    Ok(GridResult { rows, best })
}

fn select(rows: &[GridRow]) -> Option<usize> {
    let key = |r: &GridRow| {
        (
            r.units_to_target.unwrap_or(f64::INFINITY),
            r.final_dist_x.unwrap_or(f64::INFINITY),
            r.steps.eta1,
            r.steps.eta2.unwrap_or(0.0),
        )
    };
    let cmp = |a: &GridRow, b: &GridRow| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
    };
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.status != PointStatus::Diverged)
        .min_by(|(_, a), (_, b)| cmp(a, b))
        .map(|(i, _)| i)
}

/// Writes the sweep as CSV: one row per grid point.
pub fn write_sweep(path: &Path, result: &GridResult) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record([
        "eta1",
        "eta2",
        "inner_iters",
        "mu",
        "status",
        "final_dist_x",
        "units_to_target",
        "grad_evals",
        "budget",
        "selected",
    ])?;
    for (k, r) in result.rows.iter().enumerate() {
        let status = match r.status {
            PointStatus::Converged => "converged",
            PointStatus::Finished => "finished",
            PointStatus::Diverged => "diverged",
        };
        w.write_record([
            r.steps.eta1.to_string(),
            opt(r.steps.eta2),
            r.steps.inner_iters.map_or(String::new(), |n| n.to_string()),
            opt(r.steps.mu),
            status.to_string(),
            opt(r.final_dist_x),
            opt(r.units_to_target),
            r.grad_evals.to_string(),
            r.budget.to_string(),
            (Some(k) == result.best).to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::io(path, e.into_error()))?
        .flush()
        .map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(eta1: f64, status: PointStatus, dist: f64, units: Option<f64>) -> GridRow {
        GridRow {
            steps: StepParams {
                eta1,
                eta2: Some(1.0),
                inner_iters: None,
                mu: None,
                snapshot: None,
            },
            status,
            final_dist_x: Some(dist),
            units_to_target: units,
            grad_evals: 0.0,
            budget: 0.0,
        }
    }

    #[test]
    fn selection_prefers_target_then_distance_then_small_steps() {
        let rows = vec![
            row(0.1, PointStatus::Finished, 1e-3, None),
            row(0.2, PointStatus::Converged, 1e-7, Some(50.0)),
            row(0.3, PointStatus::Converged, 1e-8, Some(40.0)),
            row(0.4, PointStatus::Diverged, 0.0, None),
        ];
        assert_eq!(select(&rows), Some(2));
        let rows = vec![row(0.2, PointStatus::Finished, 1e-3, None), row(0.1, PointStatus::Finished, 1e-3, None)];
        assert_eq!(select(&rows), Some(1));
        assert_eq!(select(&[row(0.1, PointStatus::Diverged, 1.0, None)]), None);
    }
}
