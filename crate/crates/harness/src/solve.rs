//! `solve` and `grid`: run the configured solvers and write traces and summaries.

use crate::config::{ExperimentConfig, ScheduleSource, SolverKind, StepParams, DEFAULT_BUDGET};
use crate::error::{HarnessError, Result};
use crate::grid::{opt, run_grid, write_sweep, GridResult, PointStatus};
use crate::instance::{Instance, TheoryParams};
use crate::runner::{complete_steps, run_solver, theory_steps, RunContext};
use saddle_core::{reference_solution, Error as CoreError, ReferenceMode, StopReason, StoppingRule, Trace};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Fraction of leading rows ignored by the fitted slope.
pub const SLOPE_BURN_IN: f64 = 0.1;

pub const TRACE_HEADER: [&str; 7] = ["iter", "grad_evals", "dist_x", "dist_y", "b_t", "potential", "elapsed_seconds"];

/// Command-line overrides of a configuration.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(b) = self.budget {
            cfg.stopping.budget = Some(b);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Ok,
    Diverged,
    NoConvergentSchedule,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSummary {
    pub points: usize,
    pub converged: usize,
    pub diverged: usize,
    pub sweep_csv: PathBuf,
    pub selected: Option<StepParams>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverSummary {
    pub name: String,
    pub kind: SolverKind,
    pub schedule_source: &'static str,
    pub status: SolverStatus,
    pub error: Option<String>,
    /// Step sizes actually used.
    pub schedule: Option<StepParams>,
    pub csv: Option<PathBuf>,
    pub iterations: Option<usize>,
    pub grad_evals: Option<f64>,
    pub stop_reason: Option<StopReason>,
    pub final_dist_x: Option<f64>,
    pub final_dist_y: Option<f64>,
    /// Least-squares slope of `log10(dist_x)` against grad-units.
    pub slope: Option<f64>,
    /// Grad-units to reach `stopping.tol`, if set and reached.
    pub units_to_target: Option<f64>,
    pub repetitions: usize,
    /// Per-row mean of the recorded potential over repetitions.
    pub mean_potential: Option<Vec<f64>>,
    /// Mean over repetitions and rows of `V_{t+1}/V_t`.
    pub mean_potential_ratio: Option<f64>,
    pub grid: Option<GridSummary>,
}

impl SolverSummary {
    fn new(name: String, kind: SolverKind, source: &'static str) -> Self {
        Self {
            name,
            kind,
            schedule_source: source,
            status: SolverStatus::Ok,
            error: None,
            schedule: None,
            csv: None,
            iterations: None,
            grad_evals: None,
            stop_reason: None,
            final_dist_x: None,
            final_dist_y: None,
            slope: None,
            units_to_target: None,
            repetitions: 0,
            mean_potential: None,
            mean_potential_ratio: None,
            grid: None,
        }
    }

    fn fill_from(&mut self, trace: &Trace, tol: Option<f64>) {
        let last = trace.last();
        self.iterations = last.map(|r| r.iter);
        self.grad_evals = last.map(|r| r.grad_evals);
        self.stop_reason = trace.stop_reason;
        self.final_dist_x = last.and_then(|r| r.dist_x);
        self.final_dist_y = last.and_then(|r| r.dist_y);
        self.slope = trace.log_slope(SLOPE_BURN_IN);
        self.units_to_target = tol.and_then(|t| trace.units_to_reach(t));
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReferenceSummary {
    pub mode: ReferenceMode,
    pub residual_x: f64,
    pub residual_y: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub name: Option<String>,
    pub family: &'static str,
    pub seed: u64,
    pub params: TheoryParams,
    pub reference: ReferenceSummary,
    pub solvers: Vec<SolverSummary>,
}

impl Summary {
    pub fn solver(&self, name: &str) -> Option<&SolverSummary> {
        self.solvers.iter().find(|s| s.name == name)
    }
}

/// The instance, its constants and its reference solution.
pub struct Prepared {
    pub instance: Instance,
    pub params: TheoryParams,
    pub reference: saddle_core::ReferenceSolution<f64>,
    pub reference_mode: ReferenceMode,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let instance = Instance::build(&cfg.instance)?;
    let params = instance.theory_params()?;
    let mode = cfg.reference.unwrap_or(instance.default_reference);
    let reference = reference_solution(&instance.problem, mode)?;
    Ok(Prepared {
        instance,
        params,
        reference,
        reference_mode: mode,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// Runs every solver of `cfg`, writing `<name>.csv` traces (and
/// `<name>_grid.csv` sweeps) plus `summary.json` into `out`. A solver that
/// diverges or has no convergent grid point is recorded as such; the others
/// still run.
pub fn cmd_solve(cfg: &ExperimentConfig, out: &Path) -> Result<Summary> {
    create_dir(out)?;
    let prep = prepare(cfg)?;
    let ctx = RunContext {
        instance: &prep.instance,
        reference: &prep.reference,
    };
    let stop = cfg.stopping.rule();
    let mut solvers = Vec::with_capacity(cfg.solvers.len());
    for (k, spec) in cfg.solvers.iter().enumerate() {
        let name = cfg.solver_name(k);
        let mut s = SolverSummary::new(name.clone(), spec.kind, spec.schedule.label());
        // grid-selected schedules are re-run under the budget they were chosen with
        let run_stop = match spec.schedule {
            ScheduleSource::Grid(_) => grid_stop(stop),
            _ => stop,
        };
        let steps = match &spec.schedule {
            ScheduleSource::Theory => theory_steps(spec.kind, &prep.instance),
            ScheduleSource::Explicit(p) => complete_steps(spec.kind, p, &prep.instance),
            ScheduleSource::Grid(g) => {
                let sweep_csv = out.join(format!("{name}_grid.csv"));
                match run_grid(spec.kind, g, &ctx, run_stop, cfg.seed) {
                    Ok(result) => {
                        write_sweep(&sweep_csv, &result)?;
                        s.grid = Some(grid_summary(&result, sweep_csv));
                        match result.require_best(&name) {
                            Ok(row) => Ok(row.steps),
                            Err(e) => {
                                s.status = SolverStatus::NoConvergentSchedule;
                                s.error = Some(e.to_string());
                                solvers.push(s);
                                continue;
                            }
                        }
                    }
                    Err(e) => Err(e),
                }
            }
        };
        let steps = match steps {
            Ok(p) => p,
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => {
                s.status = SolverStatus::Failed;
                s.error = Some(e.to_string());
                solvers.push(s);
                continue;
            }
        };
        s.schedule = Some(steps);
        run_repetitions(cfg, &ctx, spec.kind, &steps, run_stop, out, &mut s)?;
        solvers.push(s);
    }
    let summary = Summary {
        name: cfg.name.clone(),
        family: prep.instance.family,
        seed: cfg.seed,
        params: prep.params,
        reference: ReferenceSummary {
            mode: prep.reference_mode,
            residual_x: prep.reference.residual_x,
            residual_y: prep.reference.residual_y,
        },
        solvers,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// `stop` with the default grid budget when it has none.
fn grid_stop(stop: StoppingRule) -> StoppingRule {
    StoppingRule {
        budget: Some(stop.budget.unwrap_or(DEFAULT_BUDGET)),
        ..stop
    }
}

fn grid_summary(result: &GridResult, sweep_csv: PathBuf) -> GridSummary {
    GridSummary {
        points: result.rows.len(),
        converged: result.count(PointStatus::Converged),
        diverged: result.count(PointStatus::Diverged),
        sweep_csv,
        selected: result.best_row().map(|r| r.steps),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_repetitions(
    cfg: &ExperimentConfig,
    ctx: &RunContext<'_>,
    kind: SolverKind,
    steps: &StepParams,
    stop: StoppingRule,
    out: &Path,
    s: &mut SolverSummary,
) -> Result<()> {
    let reps = if kind.is_stochastic() { cfg.repetitions } else { 1 };
    let mut potentials: Vec<Vec<f64>> = Vec::with_capacity(reps);
    for rep in 0..reps {
        let seed = cfg.seed.wrapping_add(rep as u64);
        let (trace, failure) = match run_solver(kind, steps, ctx, stop, seed, true) {
            Ok(run) => (run.trace, None),
            Err(HarnessError::Core(CoreError::Diverged { trace, reason, iteration })) => {
                (*trace, Some(format!("diverged at iteration {iteration}: {reason}")))
            }
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => {
                s.status = SolverStatus::Failed;
                s.error = Some(e.to_string());
                return Ok(());
            }
        };
        if rep == 0 {
            let path = out.join(format!("{}.csv", s.name));
            write_trace(&path, &trace)?;
            s.csv = Some(path);
            s.fill_from(&trace, stop.tol);
        }
        s.repetitions += 1;
        if let Some(reason) = failure {
            s.status = SolverStatus::Diverged;
            s.error = Some(reason);
            return Ok(());
        }
        potentials.push(trace.rows.iter().filter_map(|r| r.potential).collect());
    }
    if potentials.iter().all(|p| !p.is_empty()) && !potentials.is_empty() {
        let len = potentials.iter().map(Vec::len).max().unwrap_or(0);
        let mean: Vec<f64> = (0..len)
            .map(|t| {
                let vals: Vec<f64> = potentials.iter().filter_map(|p| p.get(t).copied()).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect();
        let ratios: Vec<f64> = potentials
            .iter()
            .flat_map(|p| p.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect::<Vec<_>>())
            .collect();
        s.mean_potential_ratio = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
        s.mean_potential = Some(mean);
    }
    Ok(())
}

/// Writes a trace as CSV with the fixed column order; unknown values are empty fields.
pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(TRACE_HEADER)?;
    for r in &trace.rows {
        w.write_record([
            r.iter.to_string(),
            r.grad_evals.to_string(),
            opt(r.dist_x),
            opt(r.dist_y),
            opt(r.b_t),
            opt(r.potential),
            r.elapsed_seconds.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| HarnessError::io(path, e.into_error()))?
        .flush()
        .map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

#[derive(Clone, Debug, Serialize)]
pub struct GridEntry {
    pub solver: String,
    pub kind: SolverKind,
    pub status: SolverStatus,
    pub message: Option<String>,
    pub best: Option<crate::grid::GridRow>,
    pub sweep_csv: Option<PathBuf>,
}

/// Runs only the grid searches of `cfg`, writing each sweep and `grid.json`.
pub fn cmd_grid(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<GridEntry>> {
    let grids: Vec<usize> = (0..cfg.solvers.len())
        .filter(|&k| matches!(cfg.solvers[k].schedule, ScheduleSource::Grid(_)))
        .collect();
    if grids.is_empty() {
        return Err(HarnessError::Config {
            path: cfg.name.clone().unwrap_or_else(|| "config".into()),
            field: "solvers".into(),
            message: "no solver has a grid schedule".into(),
        });
    }
    create_dir(out)?;
    let prep = prepare(cfg)?;
    let ctx = RunContext {
        instance: &prep.instance,
        reference: &prep.reference,
    };
    let stop = grid_stop(cfg.stopping.rule());
    let mut entries = Vec::new();
    for k in grids {
        let spec = &cfg.solvers[k];
        let ScheduleSource::Grid(g) = &spec.schedule else { unreachable!() };
        let name = cfg.solver_name(k);
        let result = run_grid(spec.kind, g, &ctx, stop, cfg.seed)?;
        let path = out.join(format!("{name}_grid.csv"));
        write_sweep(&path, &result)?;
        let (status, message) = match result.require_best(&name) {
            Ok(_) => (SolverStatus::Ok, None),
            Err(e) => (SolverStatus::NoConvergentSchedule, Some(e.to_string())),
        };
        let entry = GridEntry {
            solver: name,
            kind: spec.kind,
            status,
            message,
            best: result.best_row().cloned(),
            sweep_csv: Some(path),
        };
        entries.push(entry);
    }
    write_json(&out.join("grid.json"), &entries)?;
    Ok(entries)
}
