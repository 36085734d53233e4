//! The bilinear saddle problem `min_x max_y f(x) + yᵀAx − g(y)` and its oracles.

use crate::error::{check_dim, Error, Result};
use crate::function::FunctionRef;
use crate::linalg::{lu_solve, singular_extremes};
use crate::scalar::{lit, to_f64, Scalar};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Rank deficiency is declared when `σ_min ≤ RANK_RTOL · σ_max`.
pub const RANK_RTOL: f64 = 1e-10;
pub const DEFAULT_INNER_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_INNER_ITERS: usize = 100_000;

/// Smoothness and curvature constants of a saddle problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothnessParams<T: Scalar> {
    /// Smoothness of `f`.
    pub rho: T,
    /// Strong convexity of `g`.
    pub alpha: T,
    /// Smoothness of `g`.
    pub beta: T,
    pub sigma_max: T,
    pub sigma_min: T,
}

impl<T: Scalar> SmoothnessParams<T> {
    pub fn new(rho: T, alpha: T, beta: T, sigma_max: T, sigma_min: T) -> Result<Self> {
        let p = Self {
            rho,
            alpha,
            beta,
            sigma_max,
            sigma_min,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.rho, self.alpha, self.beta, self.sigma_max, self.sigma_min]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter(format!("non-finite parameter in {self:?}")));
        }
        if self.rho < T::zero() {
            return Err(Error::InvalidParameter(format!("rho must be >= 0, got {}", self.rho)));
        }
        if !(self.alpha > T::zero()) || self.beta < self.alpha {
            return Err(Error::InvalidParameter(format!(
                "need beta >= alpha > 0, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        if !(self.sigma_min > T::zero()) || self.sigma_max < self.sigma_min {
            return Err(Error::InvalidParameter(format!(
                "need sigma_max >= sigma_min > 0, got sigma_min = {}, sigma_max = {}",
                self.sigma_min, self.sigma_max
            )));
        }
        Ok(())
    }

    /// Smoothness of the primal objective, `ρ + σ_max²/α`.
    pub fn primal_smoothness(&self) -> T {
        self.rho + self.sigma_max * self.sigma_max / self.alpha
    }

    /// Strong convexity of the primal objective, `σ_min²/β`.
    pub fn primal_strong_convexity(&self) -> T {
        self.sigma_min * self.sigma_min / self.beta
    }

    /// Largest step for which gradient descent on the primal objective contracts,
    /// `2/(ρ + σ_max²/α + σ_min²/β)`.
    pub fn primal_step_bound(&self) -> T {
        lit::<T>(2.0) / (self.primal_smoothness() + self.primal_strong_convexity())
    }

    /// Largest dual step covered by the dual contraction, `2/(α+β)`.
    pub fn dual_step_bound(&self) -> T {
        lit::<T>(2.0) / (self.alpha + self.beta)
    }
}

/// Paired primal/dual point with bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate<T: Scalar> {
    pub x: DVector<T>,
    pub y: DVector<T>,
    pub iter: usize,
    /// Full-gradient-equivalent units spent to reach this point.
    pub grad_evals: f64,
}

impl<T: Scalar> Iterate<T> {
    pub fn new(x: DVector<T>, y: DVector<T>) -> Self {
        Self {
            x,
            y,
            iter: 0,
            grad_evals: 0.0,
        }
    }

    pub fn zeros(d1: usize, d2: usize) -> Self {
        Self::new(DVector::zeros(d1), DVector::zeros(d2))
    }
}

/// Iterative fallback settings for `∇g*` when `g` has no closed-form conjugate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugateSolve {
    pub inner_tol: f64,
    pub max_inner_iters: usize,
}

impl Default for ConjugateSolve {
    fn default() -> Self {
        Self {
            inner_tol: DEFAULT_INNER_TOL,
            max_inner_iters: DEFAULT_MAX_INNER_ITERS,
        }
    }
}

/// `min_x max_y L(x, y) = f(x) + yᵀAx − g(y)` with `A ∈ ℝ^{d2×d1}`.
///
/// Immutable after construction; clones share the function oracles.
#[derive(Clone, Debug)]
pub struct SaddleProblem<T: Scalar> {
    f: FunctionRef<T>,
    g: FunctionRef<T>,
    coupling: DMatrix<T>,
    params: SmoothnessParams<T>,
    conj: ConjugateSolve,
}

impl<T: Scalar> SaddleProblem<T> {
    /// Builds the problem, computing `σ_max(A)` and `σ_min(A)` by SVD.
    ///
    /// `rho` bounds the smoothness of `f`; `g` must be `alpha`-strongly convex
    /// and `beta`-smooth. Fails when a dimension is zero, when the oracles and
    /// `A` disagree on dimensions, or when `A` lacks full column rank.
    pub fn new(f: FunctionRef<T>, g: FunctionRef<T>, coupling: DMatrix<T>, rho: T, alpha: T, beta: T) -> Result<Self> {
        let (d2, d1) = coupling.shape();
        if d1 == 0 || d2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "both variable blocks must be non-empty, got d1 = {d1}, d2 = {d2}"
            )));
        }
        check_dim("f input dimension", d1, f.dim())?;
        check_dim("g input dimension", d2, g.dim())?;
        let probe_x = DVector::zeros(d1);
        check_dim("grad_f output dimension", d1, f.gradient(&probe_x).len())?;
        let probe_y = DVector::zeros(d2);
        check_dim("grad_g output dimension", d2, g.gradient(&probe_y).len())?;

        let (sigma_max, sigma_min) = singular_extremes(&coupling);
        let sigma_min = if d2 < d1 { T::zero() } else { sigma_min };
        if d2 < d1 || sigma_min <= lit::<T>(RANK_RTOL) * sigma_max {
            return Err(Error::RankDeficient {
                sigma_min: to_f64(sigma_min),
                sigma_max: to_f64(sigma_max),
                rows: d2,
                cols: d1,
            });
        }
        let params = SmoothnessParams::new(rho, alpha, beta, sigma_max, sigma_min)?;
        Ok(Self {
            f,
            g,
            coupling,
            params,
            conj: ConjugateSolve::default(),
        })
    }

    pub fn with_conjugate_solve(mut self, conj: ConjugateSolve) -> Self {
        self.conj = conj;
        self
    }

    pub fn d1(&self) -> usize {
        self.coupling.ncols()
    }

    pub fn d2(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn coupling(&self) -> &DMatrix<T> {
        &self.coupling
    }

    pub fn params(&self) -> &SmoothnessParams<T> {
        &self.params
    }

    pub fn f(&self) -> &FunctionRef<T> {
        &self.f
    }

    pub fn g(&self) -> &FunctionRef<T> {
        &self.g
    }

    pub fn has_closed_form_conjugate(&self) -> bool {
        self.g.conjugate_gradient(&DVector::zeros(self.d2())).is_some()
    }

    fn check_xy(&self, x: &DVector<T>, y: &DVector<T>) -> Result<()> {
        check_dim("x", self.d1(), x.len())?;
        check_dim("y", self.d2(), y.len())
    }

    /// `(∇f(x) + Aᵀy, Ax − ∇g(y))`. The second block is the ascent direction for `y`.
    pub fn grad_lagrangian(&self, x: &DVector<T>, y: &DVector<T>) -> Result<(DVector<T>, DVector<T>)> {
        self.check_xy(x, y)?;
        let mut gx = DVector::zeros(self.d1());
        let mut gy = DVector::zeros(self.d2());
        self.grad_lagrangian_into(x, y, &mut gx, &mut gy);
        Ok((gx, gy))
    }

    /// Unchecked variant writing into caller buffers.
    pub fn grad_lagrangian_into(&self, x: &DVector<T>, y: &DVector<T>, gx: &mut DVector<T>, gy: &mut DVector<T>) {
        self.f.gradient_into(x, gx);
        gx.gemv_tr(T::one(), &self.coupling, y, T::one());
        self.g.gradient_into(y, gy);
        gy.gemv(T::one(), &self.coupling, x, -T::one());
    }

    /// `∇g*(z)`: the unique `y` with `∇g(y) = z`.
    pub fn conj_grad(&self, z: &DVector<T>) -> Result<DVector<T>> {
        self.conj_grad_counted(z).map(|(y, _)| y)
    }

    /// Like [`Self::conj_grad`], also returning how many gradient evaluations of
    /// `g` the iterative fallback spent (zero for closed forms).
    pub fn conj_grad_counted(&self, z: &DVector<T>) -> Result<(DVector<T>, usize)> {
        check_dim("conj_grad argument", self.d2(), z.len())?;
        if let Some(y) = self.g.conjugate_gradient(z) {
            return Ok((y, 0));
        }
        // gradient descent on y ↦ g(y) − ⟨z, y⟩
        let step = self.params.dual_step_bound();
        let tol: T = lit(self.conj.inner_tol);
        let mut y = z.clone();
        let mut grad = DVector::zeros(self.d2());
        let mut residual = T::zero();
        for k in 0..=self.conj.max_inner_iters {
            self.g.gradient_into(&y, &mut grad);
            grad -= z;
            residual = grad.norm();
            if residual <= tol {
                return Ok((y, k + 1));
            }
            if !residual.is_finite() {
                break;
            }
            y.axpy(-step, &grad, T::one());
        }
        Err(Error::ConvergenceFailure {
            what: "conjugate gradient inner solve",
            iterations: self.conj.max_inner_iters,
            residual: to_f64(residual),
        })
    }

    /// `∇P(x) = ∇f(x) + Aᵀ∇g*(Ax)` for the primal objective `P(x) = f(x) + g*(Ax)`.
    pub fn grad_primal(&self, x: &DVector<T>) -> Result<DVector<T>> {
        check_dim("x", self.d1(), x.len())?;
        let y = self.conj_grad(&(&self.coupling * x))?;
        let mut g = self.f.gradient(x);
        g.gemv_tr(T::one(), &self.coupling, &y, T::one());
        Ok(g)
    }

    /// `P(x) = f(x) + g*(Ax)` where `g*(z) = ⟨z, y⟩ − g(y)` at `y = ∇g*(z)`.
    /// `None` when `f` or `g` has no value oracle.
    pub fn primal_value(&self, x: &DVector<T>) -> Result<Option<T>> {
        check_dim("x", self.d1(), x.len())?;
        let z = &self.coupling * x;
        let y = self.conj_grad(&z)?;
        Ok(match (self.f.value(x), self.g.value(&y)) {
            (Some(fx), Some(gy)) => Some(fx + z.dot(&y) - gy),
            _ => None,
        })
    }

    /// Optimality residuals `(‖∇f(x) + Aᵀy‖, ‖Ax − ∇g(y)‖)`.
    pub fn optimality_residuals(&self, x: &DVector<T>, y: &DVector<T>) -> Result<(T, T)> {
        let (gx, gy) = self.grad_lagrangian(x, y)?;
        Ok((gx.norm(), gy.norm()))
    }

    /// Residuals of [`Self::optimality_residuals`], each divided by
    /// `1 + ` the magnitude of the terms that cancel at the optimum.
    pub fn relative_optimality_residuals(&self, x: &DVector<T>, y: &DVector<T>) -> Result<(T, T)> {
        let (rx, ry) = self.optimality_residuals(x, y)?;
        let fx = self.f.gradient(x).norm();
        let aty = self.coupling.tr_mul(y).norm();
        let ax = (&self.coupling * x).norm();
        let gy = self.g.gradient(y).norm();
        Ok((rx / (T::one() + fx + aty), ry / (T::one() + ax + gy)))
    }

    /// Hessian of the primal objective, `∇²f(x) + Aᵀ(∇²g(y))⁻¹A` at `y = ∇g*(Ax)`.
    pub fn primal_hessian(&self, x: &DVector<T>) -> Result<DMatrix<T>> {
        let y = self.conj_grad(&(&self.coupling * x))?;
        let hf = self.f.hessian(x).ok_or_else(|| Error::Unsupported("f has no Hessian oracle".into()))?;
        let hg = self.g.hessian(&y).ok_or_else(|| Error::Unsupported("g has no Hessian oracle".into()))?;
        let chol = hg.cholesky().ok_or_else(|| Error::NotPositiveDefinite("Hessian of g".into()))?;
        let solved = chol.solve(&self.coupling);
        Ok(hf + self.coupling.tr_mul(&solved))
    }

    /// Exact saddle point of a problem whose blocks are both quadratic, from the
    /// stationarity system `[S_f, Aᵀ; A, −S_g](x; y) = (−q_f; q_g)`.
    pub fn solve_quadratic_stationarity(&self) -> Result<(DVector<T>, DVector<T>)> {
        let (sf, qf) = self
            .f
            .quadratic_form()
            .ok_or_else(|| Error::Unsupported("direct solve needs a quadratic f".into()))?;
        let (sg, qg) = self
            .g
            .quadratic_form()
            .ok_or_else(|| Error::Unsupported("direct solve needs a quadratic g".into()))?;
        let (d1, d2) = (self.d1(), self.d2());
        let mut kkt = DMatrix::zeros(d1 + d2, d1 + d2);
        kkt.view_mut((0, 0), (d1, d1)).copy_from(&sf);
        kkt.view_mut((0, d1), (d1, d2)).copy_from(&self.coupling.transpose());
        kkt.view_mut((d1, 0), (d2, d1)).copy_from(&self.coupling);
        kkt.view_mut((d1, d1), (d2, d2)).copy_from(&(-sg));
        let mut rhs = DVector::zeros(d1 + d2);
        rhs.rows_mut(0, d1).copy_from(&(-qf));
        rhs.rows_mut(d1, d2).copy_from(&qg);
        let sol = lu_solve(kkt, &rhs).map_err(|_| Error::RankDeficient {
            sigma_min: to_f64(self.params.sigma_min),
            sigma_max: to_f64(self.params.sigma_max),
            rows: d2,
            cols: d1,
        })?;
        Ok((sol.rows(0, d1).into_owned(), sol.rows(d1, d2).into_owned()))
    }
}

/// Outcome of a central finite-difference gradient check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientCheckReport {
    /// Largest `‖∇̂φ − ∇φ‖ / (1 + ‖∇φ‖)` over all points and both functions.
    pub max_rel_error: f64,
    pub points: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Central finite-difference relative error of `func`'s gradient at `x`, using `value` as the oracle.
pub fn gradient_fd_error<T: Scalar>(func: &dyn crate::function::SmoothFunction<T>, value: &dyn Fn(&DVector<T>) -> T, x: &DVector<T>) -> f64 {
    let grad = func.gradient(x);
    let mut fd = DVector::zeros(x.len());
    let mut probe = x.clone();
    let base: T = lit(6e-6);
    for i in 0..x.len() {
        let h = base * (T::one() + x[i].abs());
        let xi = x[i];
        probe[i] = xi + h;
        let up = value(&probe);
        probe[i] = xi - h;
        let down = value(&probe);
        probe[i] = xi;
        fd[i] = (up - down) / (h + h);
    }
    to_f64((fd - &grad).norm() / (T::one() + grad.norm()))
}

/// Checks `∇f` and `∇g` of `problem` against value oracles at the given points.
///
/// `points` pairs an `x ∈ ℝ^{d1}` with a `y ∈ ℝ^{d2}`.
pub fn check_gradients<T: Scalar>(
    problem: &SaddleProblem<T>,
    value_f: &dyn Fn(&DVector<T>) -> T,
    value_g: &dyn Fn(&DVector<T>) -> T,
    points: &[(DVector<T>, DVector<T>)],
    tol: f64,
) -> GradientCheckReport {
    let mut worst = 0.0f64;
    for (x, y) in points {
        worst = worst.max(gradient_fd_error(problem.f().as_ref(), value_f, x));
        worst = worst.max(gradient_fd_error(problem.g().as_ref(), value_g, y));
    }
    GradientCheckReport {
        max_rel_error: worst,
        points: points.len(),
        tol,
        passed: worst <= tol,
    }
}

/// Same check using the problem's own value oracles; `None` if either is missing.
pub fn check_gradients_self<T: Scalar>(problem: &SaddleProblem<T>, points: &[(DVector<T>, DVector<T>)], tol: f64) -> Option<GradientCheckReport> {
    let (x0, y0) = points.first()?;
    problem.f().value(x0)?;
    problem.g().value(y0)?;
    let f = problem.f().clone();
    let g = problem.g().clone();
    Some(check_gradients(
        problem,
        &move |x| f.value(x).unwrap_or_else(T::zero),
        &move |y| g.value(y).unwrap_or_else(T::zero),
        points,
        tol,
    ))
}

/// `count` seeded Gaussian `(x, y)` pairs sized for `problem`, scaled by `scale`.
pub fn random_points<T: Scalar>(problem: &SaddleProblem<T>, count: usize, scale: f64, seed: u64) -> Vec<(DVector<T>, DVector<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |d: usize| DVector::from_fn(d, |_, _| lit::<T>(scale * rng.sample::<f64, _>(rand_distr::StandardNormal)));
    (0..count)
        .map(|_| {
            let x = draw(problem.d1());
            let y = draw(problem.d2());
            (x, y)
        })
        .collect()
}
