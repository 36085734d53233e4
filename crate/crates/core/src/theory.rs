//! Step sizes, contraction rates and potential functions that certify linear
//! convergence of the primal-dual gradient method.

use crate::error::{check_dim, Error, Result};
use crate::linalg::dist;
use crate::problem::{Iterate, SaddleProblem, SmoothnessParams};
use crate::scalar::{lit, to_f64, Scalar};
use crate::solvers::pdg_step;
use nalgebra::DVector;
use serde::Serialize;

/// Additive slack `DEFAULT_SLACK·(1 + |lhs| + |rhs|)` allowed when checking
/// an inequality that holds exactly in real arithmetic.
pub const DEFAULT_SLACK: f64 = 1e-12;

/// Step sizes and contraction factor for the batch method when only `g` is
/// strongly convex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PdgSchedule<T: Scalar> {
    pub lambda: T,
    pub eta1: T,
    pub eta2: T,
    /// Guaranteed contraction of `P_t = λ‖x−x*‖ + ‖y−∇g*(Ax)‖` per step.
    pub rate: T,
}

/// ```text
/// λ    = 2βσ_max(ρ + σ_max²/α) / (ασ_min²)
/// η₁   = α / ((α+β)(σ_max²/α + λσ_max))
/// η₂   = 2 / (α+β)
/// rate = 1 − α²σ_min⁴ / (12β³σ_max²(ρ + σ_max²/α))
/// ```
pub fn pdg_schedule<T: Scalar>(p: &SmoothnessParams<T>) -> Result<PdgSchedule<T>> {
    p.validate()?;
    let SmoothnessParams {
        rho,
        alpha,
        beta,
        sigma_max,
        sigma_min,
    } = *p;
    let two: T = lit(2.0);
    let smooth = rho + sigma_max * sigma_max / alpha;
    let smin2 = sigma_min * sigma_min;
    let lambda = two * beta * sigma_max * smooth / (alpha * smin2);
    let eta1 = alpha / ((alpha + beta) * (sigma_max * sigma_max / alpha + lambda * sigma_max));
    let eta2 = two / (alpha + beta);
    let rate = T::one() - alpha * alpha * smin2 * smin2 / (lit::<T>(12.0) * beta * beta * beta * sigma_max * sigma_max * smooth);
    Ok(PdgSchedule { lambda, eta1, eta2, rate })
}

impl<T: Scalar> PdgSchedule<T> {
    /// Iterations after which `rate^t · P₀ · max{1, σ_max/(αλ)} ≤ eps`.
    pub fn iteration_budget(&self, p: &SmoothnessParams<T>, p0: T, eps: T) -> usize {
        let scale = (p.sigma_max / (p.alpha * self.lambda)).max(T::one());
        let ratio = to_f64(p0 * scale / eps);
        if ratio <= 1.0 {
            return 0;
        }
        (ratio.ln() / -to_f64(self.rate).ln()).ceil() as usize
    }
}

/// Step sizes and contraction factor when `f` is `α₁`-strongly convex and
/// `β₁`-smooth and `g` is `α₂`-strongly convex and `β₂`-smooth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScSchedule<T: Scalar> {
    pub eta1: T,
    pub eta2: T,
    /// Guaranteed contraction of `R_t = η₂‖x−x*‖² + η₁‖y−y*‖²` per step.
    pub rate: T,
}

/// ```text
/// η₁   = min{1/(α₁+β₁), α₂/(4σ_max²)}
/// η₂   = min{1/(α₂+β₂), α₁/(4σ_max²)}
/// rate = 1 − ½·min{α₁/(α₁+β₁), α₂/(α₂+β₂), α₁α₂/(4σ_max²)}
/// ```
/// `sigma_max = 0` is accepted as the decoupled limit.
pub fn sc_schedule<T: Scalar>(alpha1: T, beta1: T, alpha2: T, beta2: T, sigma_max: T) -> Result<ScSchedule<T>> {
    let ok = alpha1 > T::zero()
        && alpha2 > T::zero()
        && beta1 >= alpha1
        && beta2 >= alpha2
        && sigma_max >= T::zero()
        && [alpha1, beta1, alpha2, beta2, sigma_max].iter().all(|v| v.is_finite());
    if !ok {
        return Err(Error::InvalidParameter(format!(
            "need beta1 >= alpha1 > 0, beta2 >= alpha2 > 0, sigma_max >= 0; got \
             ({alpha1}, {beta1}, {alpha2}, {beta2}, {sigma_max})"
        )));
    }
    let four_s2 = lit::<T>(4.0) * sigma_max * sigma_max;
    let cap = |num: T, base: T| {
        if four_s2 > T::zero() {
            base.min(num / four_s2)
        } else {
            base
        }
    };
    let eta1 = cap(alpha2, T::one() / (alpha1 + beta1));
    let eta2 = cap(alpha1, T::one() / (alpha2 + beta2));
    let m = cap(alpha1 * alpha2, (alpha1 / (alpha1 + beta1)).min(alpha2 / (alpha2 + beta2)));
    Ok(ScSchedule {
        eta1,
        eta2,
        rate: T::one() - lit::<T>(0.5) * m,
    })
}

/// The two components of the batch potential: `a_t = ‖x−x*‖`, `b_t = ‖y−∇g*(Ax)‖`.
pub fn potential_parts<T: Scalar>(problem: &SaddleProblem<T>, x: &DVector<T>, y: &DVector<T>, x_star: &DVector<T>) -> Result<(T, T)> {
    check_dim("x_star", problem.d1(), x_star.len())?;
    check_dim("y", problem.d2(), y.len())?;
    let target = problem.conj_grad(&(problem.coupling() * x))?;
    Ok((dist(x, x_star), dist(y, &target)))
}

/// `P = λ‖x−x*‖ + ‖y−∇g*(Ax)‖`.
pub fn potential_p<T: Scalar>(problem: &SaddleProblem<T>, x: &DVector<T>, y: &DVector<T>, x_star: &DVector<T>, lambda: T) -> Result<T> {
    let (a, b) = potential_parts(problem, x, y, x_star)?;
    Ok(lambda * a + b)
}

/// `Q = ‖x−x*‖² + μ‖y−∇g*(Ax)‖²`.
pub fn potential_q<T: Scalar>(problem: &SaddleProblem<T>, x: &DVector<T>, y: &DVector<T>, x_star: &DVector<T>, mu: T) -> Result<T> {
    let (a, b) = potential_parts(problem, x, y, x_star)?;
    Ok(a * a + mu * b * b)
}

/// `R = η₂‖x−x*‖² + η₁‖y−y*‖²`.
pub fn potential_r<T: Scalar>(x: &DVector<T>, y: &DVector<T>, x_star: &DVector<T>, y_star: &DVector<T>, eta1: T, eta2: T) -> T {
    eta2 * (x - x_star).norm_squared() + eta1 * (y - y_star).norm_squared()
}

/// One gradient step on the primal objective: `x − η₁(∇f(x) + Aᵀ∇g*(Ax))`.
pub fn ghost_step<T: Scalar>(problem: &SaddleProblem<T>, x: &DVector<T>, eta1: T) -> Result<DVector<T>> {
    let g = problem.grad_primal(x)?;
    Ok(x - g * eta1)
}

/// `lhs ≤ rhs` up to [`DEFAULT_SLACK`]-style roundoff slack.
pub fn holds_with_slack(lhs: f64, rhs: f64, slack: f64) -> bool {
    lhs <= rhs + slack * (1.0 + lhs.abs() + rhs.abs())
}

/// One checked inequality `lhs ≤ rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    /// Whether the step sizes satisfy the inequality's hypotheses.
    pub in_precondition: bool,
    pub holds: bool,
}

impl Inequality {
    fn new(lhs: f64, rhs: f64, in_precondition: bool, slack: f64) -> Self {
        Self {
            lhs,
            rhs,
            in_precondition,
            holds: holds_with_slack(lhs, rhs, slack),
        }
    }

    /// A failure that the theory actually rules out.
    pub fn refutes(&self) -> bool {
        self.in_precondition && !self.holds
    }
}

/// The four one-step inequalities behind the batch certificate, evaluated on
/// the transition `(x_t, y_t) → (x_{t+1}, y_{t+1})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepInequalities {
    /// Ghost step contraction: `‖x̃_{t+1}−x*‖ ≤ (1−σ_min²η₁/β)a_t`.
    pub ghost: Inequality,
    /// `a_{t+1} ≤ (1−σ_min²η₁/β)a_t + σ_max η₁ b_t`.
    pub primal: Inequality,
    /// `‖x_{t+1}−x_t‖ ≤ (ρ+σ_max²/α)η₁ a_t + σ_max η₁ b_t`.
    pub movement: Inequality,
    /// `b_{t+1} ≤ (1−αη₂+σ_max²η₁/α)b_t + (σ_max/α)(ρ+σ_max²/α)η₁ a_t`.
    pub dual: Inequality,
}

impl StepInequalities {
    pub fn all(&self) -> [&Inequality; 4] {
        [&self.ghost, &self.primal, &self.movement, &self.dual]
    }

    pub fn any_refuted(&self) -> bool {
        self.all().iter().any(|i| i.refutes())
    }
}

/// Evaluates [`StepInequalities`] for one transition.
#[allow(clippy::too_many_arguments)]
pub fn step_inequalities<T: Scalar>(
    problem: &SaddleProblem<T>,
    x_t: &DVector<T>,
    y_t: &DVector<T>,
    x_next: &DVector<T>,
    y_next: &DVector<T>,
    x_star: &DVector<T>,
    eta1: T,
    eta2: T,
    slack: f64,
) -> Result<StepInequalities> {
    let p = problem.params();
    let smooth = p.primal_smoothness();
    let contraction = T::one() - p.primal_strong_convexity() * eta1;
    let eta1_ok = eta1 > T::zero() && eta1 <= p.primal_step_bound();
    let eta2_ok = eta2 > T::zero() && eta2 <= p.dual_step_bound();

    let (a_t, b_t) = potential_parts(problem, x_t, y_t, x_star)?;
    let (a_next, b_next) = potential_parts(problem, x_next, y_next, x_star)?;
    let ghost = ghost_step(problem, x_t, eta1)?;

    let ghost_ineq = Inequality::new(to_f64(dist(&ghost, x_star)), to_f64(contraction * a_t), eta1_ok, slack);
    let primal = Inequality::new(to_f64(a_next), to_f64(contraction * a_t + p.sigma_max * eta1 * b_t), eta1_ok, slack);
    let movement = Inequality::new(
        to_f64(dist(x_next, x_t)),
        to_f64(smooth * eta1 * a_t + p.sigma_max * eta1 * b_t),
        true,
        slack,
    );
    let dual = Inequality::new(
        to_f64(b_next),
        to_f64((T::one() - p.alpha * eta2 + p.sigma_max * p.sigma_max * eta1 / p.alpha) * b_t + p.sigma_max / p.alpha * smooth * eta1 * a_t),
        eta2_ok,
        slack,
    );
    Ok(StepInequalities {
        ghost: ghost_ineq,
        primal,
        movement,
        dual,
    })
}

/// Outcome of checking a per-step contraction `V_{t+1} ≤ rate·V_t` along a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub steps: usize,
    pub violations: usize,
    /// Largest observed `V_{t+1}/V_t` over steps with `V_t > 0`.
    pub worst_ratio: f64,
    pub rate: f64,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn contraction_step(report: &mut ContractionReport, before: f64, after: f64, slack: f64) {
    report.steps += 1;
    if before > 0.0 {
        report.worst_ratio = report.worst_ratio.max(after / before);
    }
    if !(after <= report.rate * before + slack) {
        report.violations += 1;
    }
}

/// Runs `iters` steps of the batch method under the theoretical schedule and
/// checks `P_{t+1} ≤ rate·P_t + 1e−12·P₀` at each step.
pub fn certify_pdg<T: Scalar>(problem: &SaddleProblem<T>, x_star: &DVector<T>, iters: usize) -> Result<ContractionReport> {
    let sched = pdg_schedule(problem.params())?;
    let mut it = Iterate::zeros(problem.d1(), problem.d2());
    let mut p = to_f64(potential_p(problem, &it.x, &it.y, x_star, sched.lambda)?);
    let slack = DEFAULT_SLACK * p;
    let mut report = ContractionReport {
        steps: 0,
        violations: 0,
        worst_ratio: 0.0,
        rate: to_f64(sched.rate),
    };
    for _ in 0..iters {
        it = pdg_step(problem, &it, sched.eta1, sched.eta2)?;
        let next = to_f64(potential_p(problem, &it.x, &it.y, x_star, sched.lambda)?);
        contraction_step(&mut report, p, next, slack);
        p = next;
    }
    Ok(report)
}

/// Runs `iters` steps of the batch method under [`sc_schedule`] and checks
/// `R_{t+1} ≤ rate·R_t` at each step (up to roundoff slack).
/// `alpha1`, `beta1` are the strong convexity and smoothness of `f`.
pub fn certify_strongly_convex<T: Scalar>(
    problem: &SaddleProblem<T>,
    x_star: &DVector<T>,
    y_star: &DVector<T>,
    alpha1: T,
    beta1: T,
    iters: usize,
) -> Result<ContractionReport> {
    let p = problem.params();
    let sched = sc_schedule(alpha1, beta1, p.alpha, p.beta, p.sigma_max)?;
    let mut it = Iterate::zeros(problem.d1(), problem.d2());
    let r_of = |it: &Iterate<T>| to_f64(potential_r(&it.x, &it.y, x_star, y_star, sched.eta1, sched.eta2));
    let mut r = r_of(&it);
    let mut report = ContractionReport {
        steps: 0,
        violations: 0,
        worst_ratio: 0.0,
        rate: to_f64(sched.rate),
    };
    for _ in 0..iters {
        it = pdg_step(problem, &it, sched.eta1, sched.eta2)?;
        let next = r_of(&it);
        contraction_step(&mut report, r, next, DEFAULT_SLACK * (1.0 + r + next));
        r = next;
    }
    Ok(report)
}

/// Counts for one inequality over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct InequalityTally {
    pub checked: usize,
    /// Failures while the hypotheses held.
    pub refuted: usize,
    /// Failures while the hypotheses did not hold (not counted against the theory).
    pub out_of_precondition: usize,
}

impl InequalityTally {
    fn add(&mut self, ineq: &Inequality) {
        self.checked += 1;
        if !ineq.holds {
            if ineq.in_precondition {
                self.refuted += 1;
            } else {
                self.out_of_precondition += 1;
            }
        }
    }
}

/// Tallies of [`StepInequalities`] along one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct OneStepReport {
    pub ghost: InequalityTally,
    pub primal: InequalityTally,
    pub movement: InequalityTally,
    pub dual: InequalityTally,
}

impl OneStepReport {
    pub fn refuted(&self) -> usize {
        self.ghost.refuted + self.primal.refuted + self.movement.refuted + self.dual.refuted
    }

    pub fn out_of_precondition(&self) -> usize {
        self.ghost.out_of_precondition + self.primal.out_of_precondition + self.movement.out_of_precondition + self.dual.out_of_precondition
    }
}

/// Runs `iters` batch steps with `(eta1, eta2)` from the origin and checks
/// every one-step inequality on each transition.
pub fn certify_one_step<T: Scalar>(problem: &SaddleProblem<T>, x_star: &DVector<T>, eta1: T, eta2: T, iters: usize) -> Result<OneStepReport> {
    let mut report = OneStepReport::default();
    let mut it = Iterate::zeros(problem.d1(), problem.d2());
    for _ in 0..iters {
        let next = pdg_step(problem, &it, eta1, eta2)?;
        let s = step_inequalities(problem, &it.x, &it.y, &next.x, &next.y, x_star, eta1, eta2, DEFAULT_SLACK)?;
        report.ghost.add(&s.ghost);
        report.primal.add(&s.primal);
        report.movement.add(&s.movement);
        report.dual.add(&s.dual);
        it = next;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Quadratic;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn unit_params() -> SmoothnessParams<f64> {
        SmoothnessParams::new(0.0, 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn pdg_schedule_unit_case() {
        let s = pdg_schedule(&unit_params()).unwrap();
        assert_relative_eq!(s.lambda, 2.0, epsilon = 1e-15);
        assert_relative_eq!(s.eta1, 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(s.eta2, 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.rate, 11.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn pdg_schedule_rejects_invalid() {
        let bad = SmoothnessParams {
            rho: 0.0,
            alpha: 2.0,
            beta: 1.0,
            sigma_max: 1.0,
            sigma_min: 1.0,
        };
        assert!(pdg_schedule(&bad).is_err());
    }

    #[test]
    fn pdg_schedule_under_coupling_scaling() {
        // Scaling A by c multiplies σ_max and σ_min by c. With ρ = 0 every
        // σ-dependence of λ and rate cancels; η₁ scales like 1/c².
        let base = SmoothnessParams::new(0.0, 0.5, 2.0, 3.0, 1.0).unwrap();
        let s0 = pdg_schedule(&base).unwrap();
        for c in [0.5, 2.0] {
            let scaled = SmoothnessParams::new(0.0, 0.5, 2.0, 3.0 * c, c).unwrap();
            let s = pdg_schedule(&scaled).unwrap();
            assert_relative_eq!(s.lambda, s0.lambda * c, max_relative = 1e-13);
            assert_relative_eq!(s.eta1, s0.eta1 / (c * c), max_relative = 1e-13);
            assert_relative_eq!(s.eta2, s0.eta2, max_relative = 1e-15);
            assert_relative_eq!(s.rate, s0.rate, max_relative = 1e-13);
        }
    }

    #[test]
    fn sc_schedule_examples() {
        let s = sc_schedule(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(s.eta1, 0.25);
        assert_relative_eq!(s.eta2, 0.25);
        assert_relative_eq!(s.rate, 1.0 - 1.0 / 8.0);

        let s = sc_schedule(1.0, 3.0, 1.0, 3.0, 1.0).unwrap();
        assert_relative_eq!(s.eta1, 0.25);
        assert_relative_eq!(s.eta2, 0.25);
        assert_relative_eq!(s.rate, 1.0 - 1.0 / 8.0);

        // decoupled limit
        for sigma in [0.0, 1e-9] {
            let s = sc_schedule(1.0, 3.0, 2.0, 2.0, sigma).unwrap();
            assert_relative_eq!(s.eta1, 0.25);
            assert_relative_eq!(s.rate, 1.0 - 0.5 * 0.25, max_relative = 1e-12);
        }
        assert!(sc_schedule(1.0, 0.5, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn potential_r_cases() {
        let z = DVector::from_vec(vec![0.0, 0.0]);
        let e = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(potential_r(&z, &z, &z, &z, 1.0, 1.0), 0.0);
        assert_eq!(potential_r(&e, &e, &z, &z, 1.0, 1.0), 2.0);
        // exchanging the gaps together with their weights
        let two_e = &e * 2.0;
        assert_relative_eq!(potential_r(&e, &two_e, &z, &z, 0.3, 0.7), potential_r(&two_e, &e, &z, &z, 0.7, 0.3));
    }

    fn half_square_problem() -> SaddleProblem<f64> {
        let f = Arc::new(Quadratic::<f64>::zero(1));
        let g = Arc::new(Quadratic::diagonal(DVector::from_element(1, 1.0), DVector::zeros(1)).unwrap());
        SaddleProblem::new(f, g, DMatrix::from_element(1, 1, 1.0), 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn ghost_step_on_half_square() {
        let p = half_square_problem();
        let x = ghost_step(&p, &DVector::from_element(1, 2.0), 0.5).unwrap();
        assert_relative_eq!(x[0], 1.0);
        let fixed = ghost_step(&p, &DVector::zeros(1), 0.5).unwrap();
        assert_eq!(fixed[0], 0.0);
    }

    #[test]
    fn potentials_vanish_at_optimum_and_combine_linearly() {
        let p = half_square_problem();
        let z = DVector::zeros(1);
        assert_eq!(potential_p(&p, &z, &z, &z, 2.0).unwrap(), 0.0);
        assert_eq!(potential_q(&p, &z, &z, &z, 1.0).unwrap(), 0.0);
        // ∇g*(Ax) = x, so b = |y − x|
        let x = DVector::from_element(1, 0.5);
        let y = DVector::from_element(1, 0.75);
        assert_relative_eq!(potential_p(&p, &x, &y, &z, 2.0).unwrap(), 1.25);
        let x = DVector::from_element(1, 0.3);
        let y = DVector::from_element(1, 0.7);
        assert_relative_eq!(potential_q(&p, &x, &y, &z, 1.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(potential_q(&p, &x, &y, &z, 0.0).unwrap(), 0.09, epsilon = 1e-15);
    }

    #[test]
    fn budget_is_zero_when_already_below_target() {
        let params = unit_params();
        let s = pdg_schedule(&params).unwrap();
        assert_eq!(s.iteration_budget(&params, 1e-9, 1e-6), 0);
        // ⌈ln(1e6)/−ln(11/12)⌉
        assert_eq!(s.iteration_budget(&params, 1.0, 1e-6), 159);
    }
}
