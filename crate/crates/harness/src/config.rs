//! Experiment configuration: a single JSON document naming the instance, the
//! solvers and how their step sizes are chosen, the stopping rule and where
//! outputs go.

use crate::error::{HarnessError, Result};
use saddle_core::{CovarianceSpec, InstanceDocument, ReferenceMode, SnapshotRule, StoppingRule};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

/// Grad-unit budget for grid points when the configuration sets none.
pub const DEFAULT_BUDGET: f64 = 2000.0;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub instance: InstanceSpec,
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub stopping: StoppingSpec,
    /// Seeded runs per stochastic solver; batch solvers run once.
    #[serde(default = "one")]
    pub repetitions: usize,
    /// First seed of the stochastic solvers; repetition `k` uses `seed + k`.
    #[serde(default)]
    pub seed: u64,
    /// How the reference saddle point is computed; defaults per family.
    #[serde(default)]
    pub reference: Option<ReferenceMode>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn one() -> usize {
    1
}

/// A problem instance: a generated family member or a pinned document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum InstanceSpec {
    /// Random quadratic saddle with pinned spectra, split into `components`
    /// random terms for the stochastic solvers.
    Quadratic {
        d1: usize,
        d2: usize,
        #[serde(default)]
        strongly_convex: bool,
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default = "default_split_scale")]
        split_scale: f64,
        seed: u64,
    },
    /// Smoothed-L1 regularized least squares on correlated Gaussian data.
    Regression {
        n: usize,
        d: usize,
        covariance: CovarianceSpec,
        #[serde(default = "default_sharpness")]
        sharpness: f64,
        /// Regularization weight; `0.01/n` when absent.
        #[serde(default)]
        lambda: Option<f64>,
        seed: u64,
    },
    /// Policy evaluation on random synthetic transitions.
    Mspbe {
        n: usize,
        d: usize,
        gamma: f64,
        #[serde(default)]
        normalize: bool,
        seed: u64,
    },
    /// An exact instance, e.g. one written by a previous run.
    Document {
        document: InstanceDocument,
        #[serde(default = "default_components")]
        components: usize,
        #[serde(default = "default_split_scale")]
        split_scale: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_components() -> usize {
    50
}

fn default_split_scale() -> f64 {
    0.3
}

fn default_sharpness() -> f64 {
    10.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Pdg,
    PrimalGd,
    Pdsvrg,
    PrimalSvrg,
}

impl SolverKind {
    pub fn is_stochastic(self) -> bool {
        matches!(self, SolverKind::Pdsvrg | SolverKind::PrimalSvrg)
    }

    /// Whether the method has a dual step size.
    pub fn has_dual_step(self) -> bool {
        matches!(self, SolverKind::Pdg | SolverKind::Pdsvrg)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Pdg => "pdg",
            SolverKind::PrimalGd => "primal_gd",
            SolverKind::Pdsvrg => "pdsvrg",
            SolverKind::PrimalSvrg => "primal_svrg",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Output file stem; defaults to the solver kind.
    #[serde(default)]
    pub name: Option<String>,
    pub kind: SolverKind,
    #[serde(default)]
    pub schedule: ScheduleSource,
}

/// Where a solver's step sizes come from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum ScheduleSource {
    /// The provable schedule (or the documented default for the stochastic solvers).
    #[default]
    Theory,
    Explicit(StepParams),
    Grid(GridSpec),
}

impl ScheduleSource {
    pub fn label(&self) -> &'static str {
        match self {
            ScheduleSource::Theory => "theory",
            ScheduleSource::Explicit(_) => "explicit",
            ScheduleSource::Grid(_) => "grid",
        }
    }
}

/// Step sizes and, for the stochastic solvers, the epoch shape. Fields a
/// solver does not use are ignored; missing ones fall back to the theory
/// defaults.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepParams {
    /// Primal step (the only step of the primal-only solvers).
    pub eta1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<SnapshotRule>,
}

/// A finite grid over step sizes (and epoch length and `μ` for SVRG).
/// Empty or absent axes use the theory default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub eta1: Axis,
    #[serde(default)]
    pub eta2: Option<Axis>,
    #[serde(default)]
    pub inner_iters: Vec<usize>,
    #[serde(default)]
    pub mu: Vec<f64>,
}

/// Grid axis: explicit values or `points` log-spaced values from `from` to `to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Log { from: f64, to: f64, points: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Axis::Values(ref v) => v.clone(),
            Axis::Log { from, to, points } => match points {
                0 => Vec::new(),
                1 => vec![from],
                _ => {
                    let (a, b) = (from.ln(), to.ln());
                    (0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()).collect()
                }
            },
        }
    }
}

/// Stopping rule of every run. For the stochastic solvers `max_iters` counts epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingSpec {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Stop when `‖x − x*‖` reaches this value.
    #[serde(default)]
    pub tol: Option<f64>,
    /// Grad-unit budget; grid points fall back to [`DEFAULT_BUDGET`].
    #[serde(default)]
    pub budget: Option<f64>,
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

impl Default for StoppingSpec {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            tol: None,
            budget: None,
        }
    }
}

impl StoppingSpec {
    pub fn rule(&self) -> StoppingRule {
        StoppingRule {
            max_iters: self.max_iters,
            tol: self.tol,
            budget: self.budget,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for Outputs {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Config {
            path: origin.to_string(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self, origin: &str) -> Result<()> {
        let bad = |field: String, message: String| {
            Err(HarnessError::Config {
                path: origin.to_string(),
                field,
                message,
            })
        };
        if self.solvers.is_empty() {
            return bad("solvers".into(), "at least one solver is required".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions".into(), "must be at least 1".into());
        }
        let s = &self.stopping;
        if let Some(t) = s.tol {
            if !(t > 0.0 && t.is_finite()) {
                return bad("stopping.tol".into(), format!("must be positive, got {t}"));
            }
        }
        if let Some(b) = s.budget {
            if !(b > 0.0 && b.is_finite()) {
                return bad("stopping.budget".into(), format!("must be positive, got {b}"));
            }
        }
        let mut names = std::collections::HashSet::new();
        for (k, solver) in self.solvers.iter().enumerate() {
            let field = |f: &str| format!("solvers[{k}].{f}");
            let name = self.solver_name(k);
            if name.is_empty() || name.contains(['/', '\\']) {
                return bad(field("name"), format!("{name:?} is not a valid file stem"));
            }
            if !names.insert(name.clone()) {
                return bad(field("name"), format!("duplicate solver name {name:?}"));
            }
            match &solver.schedule {
                ScheduleSource::Theory => {}
                ScheduleSource::Explicit(p) => check_steps(p).or_else(|m| bad(field("schedule"), m))?,
                ScheduleSource::Grid(g) => {
                    let e1 = g.eta1.values();
                    let e2 = g.eta2.as_ref().map(Axis::values).unwrap_or_default();
                    if e1.is_empty() || g.eta2.is_some() && e2.is_empty() {
                        return bad(field("schedule"), "grid axes must not be empty".into());
                    }
                    if e1.iter().chain(&e2).chain(&g.mu).any(|v| !(*v > 0.0 && v.is_finite())) {
                        return bad(field("schedule"), "grid values must be positive and finite".into());
                    }
                    if g.inner_iters.contains(&0) {
                        return bad(field("schedule"), "inner_iters must be positive".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Output stem of solver `k`: its name, or its kind.
    pub fn solver_name(&self, k: usize) -> String {
        let s = &self.solvers[k];
        s.name.clone().unwrap_or_else(|| s.kind.to_string())
    }
}

fn check_steps(p: &StepParams) -> std::result::Result<(), String> {
    let pos = |v: f64| v > 0.0 && v.is_finite();
    if !pos(p.eta1) || p.eta2.is_some_and(|v| !pos(v)) || p.mu.is_some_and(|v| !pos(v)) {
        return Err("step sizes and mu must be positive and finite".into());
    }
    if p.inner_iters == Some(0) {
        return Err("inner_iters must be positive".into());
    }
    Ok(())
}

/// Only the instance part of a configuration, for commands that need nothing else.
#[derive(Clone, Debug, Deserialize)]
pub struct InstanceOnly {
    pub instance: InstanceSpec,
}

impl InstanceOnly {
    pub fn load(path: &Path) -> Result<InstanceSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let doc: Self = serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Config {
            path: path.display().to_string(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        Ok(doc.instance)
    }
}
