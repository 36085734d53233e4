//! Finite-sum saddle problems and the primal-dual SVRG method, plus an SVRG
//! baseline on the primal objective.

use crate::error::{check_dim, Error, Result};
use crate::function::{FunctionRef, SmoothFunction};
use crate::linalg::{all_finite, dist, joint_norm, singular_extremes};
use crate::problem::{Iterate, SaddleProblem};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::solvers::{diverged, BlowupGuard, Recorder, Run, RunOptions};
use crate::trace::{PotentialKind, StopReason, Trace, TraceRow};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

/// Number of seeded points at which component averages are compared with the aggregate.
pub const AGGREGATION_CHECK_POINTS: usize = 20;

/// The coupling block `A_i` of one component.
#[derive(Clone, Debug)]
pub enum Coupling<T: Scalar> {
    Dense(DMatrix<T>),
    /// `u vᵀ` with `u ∈ ℝ^{d2}`, `v ∈ ℝ^{d1}`.
    RankOne {
        u: DVector<T>,
        v: DVector<T>,
    },
    /// `e_index vᵀ`: a single nonzero row of a `rows × v.len()` matrix.
    Row {
        index: usize,
        rows: usize,
        v: DVector<T>,
    },
}

impl<T: Scalar> Coupling<T> {
    pub fn rows(&self) -> usize {
        match self {
            Coupling::Dense(m) => m.nrows(),
            Coupling::RankOne { u, .. } => u.len(),
            Coupling::Row { rows, .. } => *rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Coupling::Dense(m) => m.ncols(),
            Coupling::RankOne { v, .. } | Coupling::Row { v, .. } => v.len(),
        }
    }

    /// `out ← out + A x`.
    pub fn apply_add(&self, x: &DVector<T>, out: &mut DVector<T>) {
        match self {
            Coupling::Dense(m) => out.gemv(T::one(), m, x, T::one()),
            Coupling::RankOne { u, v } => out.axpy(v.dot(x), u, T::one()),
            Coupling::Row { index, v, .. } => out[*index] += v.dot(x),
        }
    }

    /// `out ← out + Aᵀ y`.
    pub fn apply_t_add(&self, y: &DVector<T>, out: &mut DVector<T>) {
        match self {
            Coupling::Dense(m) => out.gemv_tr(T::one(), m, y, T::one()),
            Coupling::RankOne { u, v } => out.axpy(u.dot(y), v, T::one()),
            Coupling::Row { index, v, .. } => out.axpy(y[*index], v, T::one()),
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        match self {
            Coupling::Dense(m) => m.clone(),
            Coupling::RankOne { u, v } => u * v.transpose(),
            Coupling::Row { index, rows, v } => {
                let mut m = DMatrix::zeros(*rows, v.len());
                m.row_mut(*index).copy_from(&v.transpose());
                m
            }
        }
    }

    pub fn sigma_max(&self) -> T {
        match self {
            Coupling::Dense(m) => singular_extremes(m).0,
            Coupling::RankOne { u, v } => u.norm() * v.norm(),
            Coupling::Row { v, .. } => v.norm(),
        }
    }
}

/// One term `L_i(x, y) = f_i(x) + yᵀA_i x − g_i(y)` of a finite sum.
#[derive(Clone, Debug)]
pub struct Component<T: Scalar> {
    pub f: FunctionRef<T>,
    pub g: FunctionRef<T>,
    pub coupling: Coupling<T>,
}

impl<T: Scalar> Component<T> {
    /// `(∇f_i(x) + A_iᵀy, A_i x − ∇g_i(y))` written into `gx`, `gy`.
    pub fn grad_into(&self, x: &DVector<T>, y: &DVector<T>, gx: &mut DVector<T>, gy: &mut DVector<T>) {
        self.f.gradient_into(x, gx);
        self.coupling.apply_t_add(y, gx);
        self.g.gradient_into(y, gy);
        gy.neg_mut();
        self.coupling.apply_add(x, gy);
    }
}

/// `L = (1/n) Σ L_i` together with the aggregate saddle problem it averages to.
///
/// Individual components need not be convex; only the aggregate carries the
/// convexity and rank assumptions.
#[derive(Clone, Debug)]
pub struct FiniteSumSaddleProblem<T: Scalar> {
    components: Vec<Component<T>>,
    aggregate: Arc<SaddleProblem<T>>,
    m_bound: T,
}

impl<T: Scalar> FiniteSumSaddleProblem<T> {
    /// Validates dimensions and that component gradients average to the
    /// aggregate gradient at [`AGGREGATION_CHECK_POINTS`] seeded points.
    pub fn new(components: Vec<Component<T>>, aggregate: Arc<SaddleProblem<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("a finite sum needs at least one component".into()));
        }
        let (d1, d2) = (aggregate.d1(), aggregate.d2());
        for c in &components {
            check_dim("component f dimension", d1, c.f.dim())?;
            check_dim("component g dimension", d2, c.g.dim())?;
            check_dim("component coupling rows", d2, c.coupling.rows())?;
            check_dim("component coupling cols", d1, c.coupling.cols())?;
            if let Coupling::Row { index, rows, .. } = c.coupling {
                if index >= rows {
                    return Err(Error::IndexOutOfRange { index, n: rows });
                }
            }
        }
        let m_bound = components.iter().map(|c| c.coupling.sigma_max()).fold(T::zero(), |a, b| a.max(b));
        let fsp = Self {
            components,
            aggregate,
            m_bound,
        };
        fsp.check_aggregation(AGGREGATION_CHECK_POINTS, 0x5eed)?;
        Ok(fsp)
    }

    fn check_aggregation(&self, points: usize, seed: u64) -> Result<()> {
        let tol = lit::<T>(1e-12).max(T::default_epsilon() * lit(64.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d1, d2) = (self.d1(), self.d2());
        let mut bx = DVector::zeros(d1);
        let mut by = DVector::zeros(d2);
        for _ in 0..points {
            let x = DVector::from_fn(d1, |_, _| lit::<T>(rng.sample::<f64, _>(StandardNormal)));
            let y = DVector::from_fn(d2, |_, _| lit::<T>(rng.sample::<f64, _>(StandardNormal)));
            let (ax, ay) = self.full_grad(&x, &y)?;
            let (gx, gy) = self.aggregate.grad_lagrangian(&x, &y)?;
            let mut scale = joint_norm(&gx, &gy);
            for c in &self.components {
                c.grad_into(&x, &y, &mut bx, &mut by);
                scale += joint_norm(&bx, &by) / from_usize::<T>(self.n());
            }
            let err = joint_norm(&(ax - gx), &(ay - gy));
            if err > tol * (T::one() + scale) {
                return Err(Error::InvalidParameter(format!(
                    "component gradients do not average to the aggregate gradient (error {err:e})"
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn d1(&self) -> usize {
        self.aggregate.d1()
    }

    pub fn d2(&self) -> usize {
        self.aggregate.d2()
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn aggregate(&self) -> &SaddleProblem<T> {
        &self.aggregate
    }

    pub fn aggregate_arc(&self) -> &Arc<SaddleProblem<T>> {
        &self.aggregate
    }

    /// `M ≥ max_i σ_max(A_i)`.
    pub fn m_bound(&self) -> T {
        self.m_bound
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    fn check_xy(&self, x: &DVector<T>, y: &DVector<T>) -> Result<()> {
        check_dim("x", self.d1(), x.len())?;
        check_dim("y", self.d2(), y.len())
    }

    /// `B_i(x, y)` for the zero-based component index `i`.
    pub fn component_grad(&self, i: usize, x: &DVector<T>, y: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
        self.check_index(i)?;
        self.check_xy(x, y)?;
        let mut gx = DVector::zeros(self.d1());
        let mut gy = DVector::zeros(self.d2());
        self.components[i].grad_into(x, y, &mut gx, &mut gy);
        Ok((gx, gy))
    }

    /// `B(x, y) = (1/n) Σ_i B_i(x, y)`.
    pub fn full_grad(&self, x: &DVector<T>, y: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
        self.check_xy(x, y)?;
        let mut gx = DVector::zeros(self.d1());
        let mut gy = DVector::zeros(self.d2());
        let mut bx = DVector::zeros(self.d1());
        let mut by = DVector::zeros(self.d2());
        self.full_grad_into(x, y, &mut gx, &mut gy, &mut bx, &mut by);
        Ok((gx, gy))
    }

    fn full_grad_into(&self, x: &DVector<T>, y: &DVector<T>, gx: &mut DVector<T>, gy: &mut DVector<T>, bx: &mut DVector<T>, by: &mut DVector<T>) {
        gx.fill(T::zero());
        gy.fill(T::zero());
        for c in &self.components {
            c.grad_into(x, y, bx, by);
            *gx += &*bx;
            *gy += &*by;
        }
        let inv = T::one() / from_usize::<T>(self.n());
        *gx *= inv;
        *gy *= inv;
    }

    /// Variance-reduced estimate `B_i(x,y) − B_i(x̃,ỹ) + B(x̃,ỹ)`, where
    /// `full_at_snap = B(x̃,ỹ)`.
    pub fn vr_grad(
        &self,
        i: usize,
        x: &DVector<T>,
        y: &DVector<T>,
        x_snap: &DVector<T>,
        y_snap: &DVector<T>,
        full_at_snap: (&DVector<T>, &DVector<T>),
    ) -> Result<(DVector<T>, DVector<T>)> {
        self.check_index(i)?;
        self.check_xy(x, y)?;
        self.check_xy(x_snap, y_snap)?;
        self.check_xy(full_at_snap.0, full_at_snap.1)?;
        let mut ws = Workspace::new(self.d1(), self.d2());
        self.vr_grad_into(i, x, y, x_snap, y_snap, full_at_snap, &mut ws);
        Ok((ws.gx, ws.gy))
    }

    #[allow(clippy::too_many_arguments)]
    fn vr_grad_into(
        &self,
        i: usize,
        x: &DVector<T>,
        y: &DVector<T>,
        x_snap: &DVector<T>,
        y_snap: &DVector<T>,
        full_at_snap: (&DVector<T>, &DVector<T>),
        ws: &mut Workspace<T>,
    ) {
        let c = &self.components[i];
        c.grad_into(x, y, &mut ws.gx, &mut ws.gy);
        c.grad_into(x_snap, y_snap, &mut ws.sx, &mut ws.sy);
        ws.gx -= &ws.sx;
        ws.gy -= &ws.sy;
        ws.gx += full_at_snap.0;
        ws.gy += full_at_snap.1;
    }
}

struct Workspace<T: Scalar> {
    gx: DVector<T>,
    gy: DVector<T>,
    sx: DVector<T>,
    sy: DVector<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(d1: usize, d2: usize) -> Self {
        Self {
            gx: DVector::zeros(d1),
            gy: DVector::zeros(d2),
            sx: DVector::zeros(d1),
            sy: DVector::zeros(d2),
        }
    }
}

/// Which inner iterate becomes the next snapshot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotRule {
    /// `x_{t,j}` with `j` uniform on `{0, …, N−1}`, drawn after the inner loop.
    #[default]
    Uniform,
    /// The last inner iterate `x_{t,N}`.
    Last,
}

/// Parameters of an SVRG run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrgConfig<T: Scalar> {
    pub eta1: T,
    pub eta2: T,
    pub inner_iters: usize,
    /// Weight of the dual term in `Q`.
    pub mu: T,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub snapshot: SnapshotRule,
    /// Record every inner iterate in `Trace::inner_rows`.
    #[serde(default)]
    pub verbose: bool,
}

impl<T: Scalar> SvrgConfig<T> {
    /// `η₁ = η₂ = α/(10M²)`, `N = 2n`, `μ = 1`.
    pub fn defaults_for(fsp: &FiniteSumSaddleProblem<T>, epochs: usize, seed: u64) -> Self {
        let m = fsp.m_bound();
        let eta = fsp.aggregate().params().alpha / (lit::<T>(10.0) * m * m);
        Self {
            eta1: eta,
            eta2: eta,
            inner_iters: 2 * fsp.n(),
            mu: T::one(),
            epochs,
            seed,
            snapshot: SnapshotRule::Uniform,
            verbose: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !(pos(self.eta1) && pos(self.eta2) && pos(self.mu)) {
            return Err(Error::InvalidParameter(format!(
                "SVRG step sizes and mu must be positive, got eta1 = {}, eta2 = {}, mu = {}",
                self.eta1, self.eta2, self.mu
            )));
        }
        if self.inner_iters == 0 || self.epochs == 0 {
            return Err(Error::InvalidParameter("SVRG needs at least one epoch and one inner iteration".into()));
        }
        Ok(())
    }

    /// Full-gradient units consumed per epoch: `1 + 2N/n`.
    pub fn units_per_epoch(&self, n: usize) -> f64 {
        1.0 + 2.0 * self.inner_iters as f64 / n as f64
    }
}

/// Primal-dual SVRG from `init`.
///
/// Runs at most `cfg.epochs` epochs; `opts.stop.tol` (on `‖x − x*‖`) and
/// `opts.stop.budget` may end the run earlier, `opts.stop.max_iters` is not
/// consulted. One trace row is written per epoch with `Q` when `x*` is known.
pub fn run_pdsvrg<T: Scalar>(fsp: &FiniteSumSaddleProblem<T>, init: &Iterate<T>, cfg: &SvrgConfig<T>, opts: &RunOptions<T>) -> Result<Run<T>> {
    cfg.validate()?;
    fsp.check_xy(&init.x, &init.y)?;
    if let Some(xs) = &opts.x_star {
        check_dim("x_star", fsp.d1(), xs.len())?;
    }
    if let Some(ys) = &opts.y_star {
        check_dim("y_star", fsp.d2(), ys.len())?;
    }
    let kind = opts.x_star.as_ref().map(|_| PotentialKind::Q);
    let rec = Recorder::new(fsp.aggregate(), opts, kind, cfg.mu, (cfg.eta1, cfg.eta2));
    let mut trace = Trace::new(kind);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (d1, d2, n) = (fsp.d1(), fsp.d2(), fsp.n());
    let per_epoch = cfg.units_per_epoch(n);

    let mut snap_x = init.x.clone();
    let mut snap_y = init.y.clone();
    let mut units = init.grad_evals;
    let first = rec.row(&mut trace, 0, units, &snap_x, &snap_y)?;
    let guard = BlowupGuard::new(&first, to_f64(joint_norm(&snap_x, &snap_y)));
    trace.rows.push(first);

    let reached = |row: &TraceRow| matches!((opts.stop.tol, row.dist_x), (Some(t), Some(d)) if d <= t);
    let mut stop_reason = StopReason::MaxIterations;
    if reached(&trace.rows[0]) {
        stop_reason = StopReason::DistanceTolerance;
    }

    let mut full_x = DVector::zeros(d1);
    let mut full_y = DVector::zeros(d2);
    let mut ws = Workspace::new(d1, d2);
    let keep = cfg.snapshot == SnapshotRule::Uniform;
    let mut kept: Vec<(DVector<T>, DVector<T>)> = Vec::with_capacity(if keep { cfg.inner_iters } else { 0 });
    let mut inner_counter = 0usize;

    let epochs = if stop_reason == StopReason::DistanceTolerance { 0 } else { cfg.epochs };
    for epoch in 0..epochs {
        fsp.full_grad_into(&snap_x, &snap_y, &mut full_x, &mut full_y, &mut ws.sx, &mut ws.sy);
        let mut x = snap_x.clone();
        let mut y = snap_y.clone();
        kept.clear();
        for j in 0..cfg.inner_iters {
            if keep {
                kept.push((x.clone(), y.clone()));
            }
            let i = rng.random_range(0..n);
            fsp.vr_grad_into(i, &x, &y, &snap_x, &snap_y, (&full_x, &full_y), &mut ws);
            x.axpy(-cfg.eta1, &ws.gx, T::one());
            y.axpy(cfg.eta2, &ws.gy, T::one());
            inner_counter += 1;
            if cfg.verbose {
                let u = units + 1.0 + 2.0 * (j + 1) as f64 / n as f64;
                let row = rec.row(&mut trace, inner_counter, u, &x, &y)?;
                trace.inner_rows.push(row);
            }
        }
        if !(all_finite(&x) && all_finite(&y)) {
            return Err(diverged(epoch + 1, "non-finite inner iterate".into(), trace));
        }
        if keep {
            let j = rng.random_range(0..cfg.inner_iters);
            let (kx, ky) = kept.swap_remove(j);
            snap_x = kx;
            snap_y = ky;
        } else {
            snap_x = x;
            snap_y = y;
        }
        units += per_epoch;

        let row = rec.row(&mut trace, epoch + 1, units, &snap_x, &snap_y)?;
        let why = guard.check(&row, to_f64(joint_norm(&snap_x, &snap_y)));
        let done = reached(&row);
        trace.rows.push(row);
        if let Some(reason) = why {
            return Err(diverged(epoch + 1, reason, trace));
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
            x: snap_x,
            y: snap_y,
            iter,
            grad_evals: units,
        },
    })
}

/// The primal objective `P(x) = f(x) + g*(Ax)` of a saddle problem as a
/// smooth function. Conjugate-solve failures surface as NaN gradients.
#[derive(Clone, Debug)]
pub struct PrimalObjective<T: Scalar> {
    problem: Arc<SaddleProblem<T>>,
}

impl<T: Scalar> PrimalObjective<T> {
    pub fn new(problem: Arc<SaddleProblem<T>>) -> Self {
        Self { problem }
    }
}

impl<T: Scalar> SmoothFunction<T> for PrimalObjective<T> {
    fn dim(&self) -> usize {
        self.problem.d1()
    }

    fn gradient_into(&self, x: &DVector<T>, out: &mut DVector<T>) {
        match self.problem.grad_primal(x) {
            Ok(g) => out.copy_from(&g),
            Err(_) => out.fill(lit(f64::NAN)),
        }
    }

    fn value(&self, x: &DVector<T>) -> Option<T> {
        self.problem.primal_value(x).ok().flatten()
    }
}

/// `P = (1/n) Σ P_i` for primal-only SVRG.
#[derive(Clone, Debug)]
pub struct PrimalFiniteSum<T: Scalar> {
    components: Vec<FunctionRef<T>>,
}

impl<T: Scalar> PrimalFiniteSum<T> {
    pub fn new(components: Vec<FunctionRef<T>>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParameter("a finite sum needs at least one component".into()))?;
        let d = first.dim();
        for c in &components {
            check_dim("primal component dimension", d, c.dim())?;
        }
        Ok(Self { components })
    }

    /// The single-component sum `P` of a saddle problem.
    pub fn single(problem: Arc<SaddleProblem<T>>) -> Self {
        Self {
            components: vec![Arc::new(PrimalObjective::new(problem))],
        }
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[FunctionRef<T>] {
        &self.components
    }

    pub fn full_grad(&self, x: &DVector<T>) -> Result<DVector<T>> {
        check_dim("x", self.dim(), x.len())?;
        let mut g = DVector::zeros(self.dim());
        let mut buf = DVector::zeros(self.dim());
        self.full_grad_into(x, &mut g, &mut buf);
        Ok(g)
    }

    fn full_grad_into(&self, x: &DVector<T>, g: &mut DVector<T>, buf: &mut DVector<T>) {
        g.fill(T::zero());
        for c in &self.components {
            c.gradient_into(x, buf);
            *g += &*buf;
        }
        *g *= T::one() / from_usize::<T>(self.n());
    }
}

/// SVRG on a primal finite sum with step `cfg.eta1` and the same snapshot
/// rule and cost accounting as [`run_pdsvrg`]. `cfg.eta2` and `cfg.mu` are unused.
pub fn run_primal_svrg<T: Scalar>(pfs: &PrimalFiniteSum<T>, x0: &DVector<T>, cfg: &SvrgConfig<T>, opts: &RunOptions<T>) -> Result<Run<T>> {
    cfg.validate()?;
    let d = pfs.dim();
    check_dim("initial x", d, x0.len())?;
    if let Some(xs) = &opts.x_star {
        check_dim("x_star", d, xs.len())?;
    }
    let start = Instant::now();
    let mut trace = Trace::new(None);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = pfs.n();
    let per_epoch = cfg.units_per_epoch(n);
    let row_at = |iter: usize, units: f64, x: &DVector<T>| TraceRow {
        iter,
        grad_evals: units,
        dist_x: opts.x_star.as_ref().map(|xs| to_f64(dist(x, xs))),
        dist_y: None,
        b_t: None,
        potential: None,
        primal_value: None,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };

    let mut snap = x0.clone();
    let mut units = 0.0;
    let first = row_at(0, units, &snap);
    let guard = BlowupGuard::new(&first, to_f64(snap.norm()));
    let reached = |row: &TraceRow| matches!((opts.stop.tol, row.dist_x), (Some(t), Some(d)) if d <= t);
    let mut stop_reason = StopReason::MaxIterations;
    let epochs = if reached(&first) {
        stop_reason = StopReason::DistanceTolerance;
        0
    } else {
        cfg.epochs
    };
    trace.rows.push(first);

    let mut full = DVector::zeros(d);
    let mut g = DVector::zeros(d);
    let mut s = DVector::zeros(d);
    let keep = cfg.snapshot == SnapshotRule::Uniform;
    let mut kept: Vec<DVector<T>> = Vec::with_capacity(if keep { cfg.inner_iters } else { 0 });
    let mut inner_counter = 0usize;
    for epoch in 0..epochs {
        pfs.full_grad_into(&snap, &mut full, &mut s);
        let mut x = snap.clone();
        kept.clear();
        for j in 0..cfg.inner_iters {
            if keep {
                kept.push(x.clone());
            }
            let i = rng.random_range(0..n);
            let c = &pfs.components[i];
            c.gradient_into(&x, &mut g);
            c.gradient_into(&snap, &mut s);
            g -= &s;
            g += &full;
            x.axpy(-cfg.eta1, &g, T::one());
            inner_counter += 1;
            if cfg.verbose {
                let u = units + 1.0 + 2.0 * (j + 1) as f64 / n as f64;
                trace.inner_rows.push(row_at(inner_counter, u, &x));
            }
        }
        if !all_finite(&x) {
            return Err(diverged(epoch + 1, "non-finite inner iterate".into(), trace));
        }
        snap = if keep {
            let j = rng.random_range(0..cfg.inner_iters);
            kept.swap_remove(j)
        } else {
            x
        };
        units += per_epoch;
        let row = row_at(epoch + 1, units, &snap);
        let why = guard.check(&row, to_f64(snap.norm()));
        let done = reached(&row);
        trace.rows.push(row);
        if let Some(reason) = why {
            return Err(diverged(epoch + 1, reason, trace));
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
    let iter = trace.rows.len() - 1;
    Ok(Run {
        trace,
        last: Iterate {
            x: snap,
            y: DVector::zeros(0),
            iter,
            grad_evals: units,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Quadratic;
    use crate::solvers::StoppingRule;
    use approx::assert_relative_eq;

    fn half_square(fc: f64) -> Arc<SaddleProblem<f64>> {
        let f = Arc::new(Quadratic::diagonal(DVector::from_element(1, fc), DVector::zeros(1)).unwrap());
        let g = Arc::new(Quadratic::diagonal(DVector::from_element(1, 1.0), DVector::zeros(1)).unwrap());
        Arc::new(SaddleProblem::new(f, g, DMatrix::from_element(1, 1, 1.0), fc, 1.0, 1.0).unwrap())
    }

    fn single(p: &Arc<SaddleProblem<f64>>) -> FiniteSumSaddleProblem<f64> {
        let c = Component {
            f: p.f().clone(),
            g: p.g().clone(),
            coupling: Coupling::Dense(p.coupling().clone()),
        };
        FiniteSumSaddleProblem::new(vec![c], p.clone()).unwrap()
    }

    #[test]
    fn coupling_variants_match_dense() {
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let v = DVector::from_vec(vec![3.0, 1.0]);
        let x = DVector::from_vec(vec![0.7, -1.1]);
        let y = DVector::from_vec(vec![0.2, 0.4, -0.9]);
        let variants = [
            Coupling::RankOne { u: u.clone(), v: v.clone() },
            Coupling::Row {
                index: 1,
                rows: 3,
                v: v.clone(),
            },
        ];
        for c in variants {
            let m = c.to_dense();
            let mut ax = DVector::zeros(3);
            c.apply_add(&x, &mut ax);
            assert_relative_eq!(ax, &m * &x, epsilon = 1e-14);
            let mut aty = DVector::zeros(2);
            c.apply_t_add(&y, &mut aty);
            assert_relative_eq!(aty, m.tr_mul(&y), epsilon = 1e-14);
            assert_relative_eq!(c.sigma_max(), singular_extremes(&m).0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_component_matches_aggregate() {
        let p = half_square(1.0);
        let fsp = single(&p);
        let x = DVector::from_element(1, 2.0);
        let y = DVector::from_element(1, 3.0);
        let (cx, cy) = fsp.component_grad(0, &x, &y).unwrap();
        let (gx, gy) = p.grad_lagrangian(&x, &y).unwrap();
        assert_eq!((cx[0], cy[0]), (gx[0], gy[0]));
        let (fx, fy) = fsp.full_grad(&x, &y).unwrap();
        assert_eq!((fx[0], fy[0]), (5.0, -1.0));
        assert!(matches!(fsp.component_grad(1, &x, &y), Err(Error::IndexOutOfRange { index: 1, n: 1 })));
    }

    #[test]
    fn vr_grad_telescopes_at_snapshot() {
        let p = half_square(1.0);
        let fsp = single(&p);
        let s = DVector::from_element(1, 0.3);
        let t = DVector::from_element(1, -0.4);
        let full = fsp.full_grad(&s, &t).unwrap();
        let v = fsp.vr_grad(0, &s, &t, &s, &t, (&full.0, &full.1)).unwrap();
        assert_eq!(v, full);
        // n = 1: the estimate is the exact full gradient anywhere
        let x = DVector::from_element(1, 1.5);
        let y = DVector::from_element(1, 2.5);
        let v = fsp.vr_grad(0, &x, &y, &s, &t, (&full.0, &full.1)).unwrap();
        let exact = fsp.full_grad(&x, &y).unwrap();
        assert_relative_eq!(v.0, exact.0, epsilon = 1e-15);
        assert_relative_eq!(v.1, exact.1, epsilon = 1e-15);
    }

    #[test]
    fn two_component_average_by_hand() {
        // f₁ = x², f₂ = 0 averaging to f = ½x²; g = ½y² in both; A = [1].
        let p = half_square(1.0);
        let gq: FunctionRef<f64> = Arc::new(Quadratic::diagonal(DVector::from_element(1, 1.0), DVector::zeros(1)).unwrap());
        let comps = vec![
            Component {
                f: Arc::new(Quadratic::diagonal(DVector::from_element(1, 2.0), DVector::zeros(1)).unwrap()),
                g: gq.clone(),
                coupling: Coupling::Dense(DMatrix::from_element(1, 1, 1.0)),
            },
            Component {
                f: Arc::new(Quadratic::<f64>::zero(1)),
                g: gq,
                coupling: Coupling::Dense(DMatrix::from_element(1, 1, 1.0)),
            },
        ];
        let fsp = FiniteSumSaddleProblem::new(comps, p).unwrap();
        let (gx, _) = fsp.full_grad(&DVector::from_element(1, 3.0), &DVector::zeros(1)).unwrap();
        assert_eq!(gx[0], 3.0);
    }

    #[test]
    fn mismatched_components_are_rejected() {
        let p = half_square(1.0);
        let c = Component {
            f: Arc::new(Quadratic::<f64>::zero(1)) as FunctionRef<f64>,
            g: p.g().clone(),
            coupling: Coupling::Dense(p.coupling().clone()),
        };
        assert!(FiniteSumSaddleProblem::new(vec![c], p.clone()).is_err());
        assert!(FiniteSumSaddleProblem::new(vec![], p).is_err());
    }

    #[test]
    fn config_defaults_and_accounting() {
        let p = half_square(1.0);
        let fsp = single(&p);
        let cfg = SvrgConfig::defaults_for(&fsp, 3, 7);
        assert_relative_eq!(cfg.eta1, 0.1);
        assert_eq!(cfg.inner_iters, 2);
        assert_eq!(cfg.mu, 1.0);
        assert_eq!(cfg.units_per_epoch(50), 1.0 + 4.0 / 50.0);
        assert!(SvrgConfig { eta1: 0.0, ..cfg }.validate().is_err());
        assert!(SvrgConfig { inner_iters: 0, ..cfg }.validate().is_err());
    }

    #[test]
    fn svrg_rows_carry_q_and_units() {
        let p = half_square(1.0);
        let fsp = single(&p);
        let cfg = SvrgConfig {
            epochs: 4,
            ..SvrgConfig::defaults_for(&fsp, 4, 1)
        };
        let opts = RunOptions::new(StoppingRule::iterations(0)).with_reference(DVector::zeros(1), Some(DVector::zeros(1)));
        let run = run_pdsvrg(&fsp, &Iterate::new(DVector::from_element(1, 1.0), DVector::zeros(1)), &cfg, &opts).unwrap();
        assert_eq!(run.trace.rows.len(), 5);
        assert_eq!(run.trace.potential_kind, Some(PotentialKind::Q));
        // Q at the start: ‖x‖² + ‖y − x‖² = 2
        assert_relative_eq!(run.trace.rows[0].potential.unwrap(), 2.0);
        assert_relative_eq!(run.trace.rows[4].grad_evals, 4.0 * 5.0);
    }
}
