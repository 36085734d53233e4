//! Gradient, conjugate and primal oracles against independent evaluations.

mod common;

use approx::assert_relative_eq;
use common::{certified_reference, quadratic};
use nalgebra::{DMatrix, DVector};
use saddle_core::solvers::{reference_solution, ReferenceMode};
use saddle_core::{
    check_gradients_self, random_mspbe, random_points, CovarianceSpec, FnOracle, FunctionRef, Quadratic, SaddleProblem, SmoothFunction, SmoothedL1,
    SmoothedL1Regression,
};
use std::sync::Arc;

#[test]
fn grad_lagrangian_vanishes_at_reference() {
    for seed in 0..20 {
        let (_, p) = quadratic(seed);
        let r = certified_reference(&p);
        let (gx, gy) = p.grad_lagrangian(&r.x, &r.y).unwrap();
        assert!(gx.norm() <= 1e-8 && gy.norm() <= 1e-8);
        assert!(p.grad_primal(&r.x).unwrap().norm() <= 1e-8);
    }
}

#[test]
fn conjugate_gradient_round_trip() {
    for seed in 0..20 {
        let (_, p) = quadratic(seed);
        for (_, z) in random_points(&p, 10, 5.0, seed) {
            let y = p.conj_grad(&z).unwrap();
            assert!((p.g().gradient(&y) - &z).norm() <= 1e-8 * (1.0 + z.norm()));
        }
    }
}

#[test]
fn conjugate_of_scaled_square_with_shift() {
    let n = 7.0;
    let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let g = Quadratic::diagonal(DVector::from_element(3, 1.0 / n), &b / n).unwrap();
    let z = DVector::from_vec(vec![0.3, 0.1, -0.4]);
    assert_relative_eq!(g.conjugate_gradient(&z).unwrap(), &z * n - &b, epsilon = 1e-14);
    let id = Quadratic::diagonal(DVector::from_element(3, 1.0), DVector::zeros(3)).unwrap();
    assert_eq!(id.conjugate_gradient(&z).unwrap(), z);
}

#[test]
fn primal_objective_is_smooth_and_strongly_convex() {
    for seed in 0..20 {
        let (_, p) = quadratic(seed);
        let pp = *p.params();
        let pts = random_points(&p, 10, 3.0, seed + 50);
        for w in pts.windows(2) {
            let (x, xp) = (&w[0].0, &w[1].0);
            let gx = p.grad_primal(x).unwrap();
            let gxp = p.grad_primal(xp).unwrap();
            let d = (xp - x).norm();
            assert!((&gxp - &gx).norm() <= pp.primal_smoothness() * d * (1.0 + 1e-12));
            let px = p.primal_value(x).unwrap().unwrap();
            let pxp = p.primal_value(xp).unwrap().unwrap();
            let gap = pxp - px - gx.dot(&(xp - x));
            let lower = 0.5 * pp.primal_strong_convexity() * d * d;
            assert!(gap >= lower - 1e-9 * (1.0 + px.abs() + pxp.abs()), "seed {seed}: {gap} < {lower}");
        }
    }
}

#[test]
fn finite_difference_checks_pass_on_every_family() {
    for seed in 0..5 {
        let (_, p) = quadratic(seed);
        let rep = check_gradients_self(&p, &random_points(&p, 50, 1.0, seed), 1e-6).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
    let reg = SmoothedL1Regression::generate(30, 8, CovarianceSpec::ExpDecay { c: 2.0 }, 10.0, 0.01 / 30.0, 1).unwrap();
    let p = reg.to_problem().unwrap();
    let rep = check_gradients_self(&p, &random_points(&p, 50, 1.0, 2), 1e-6).unwrap();
    assert!(rep.passed, "{rep:?}");
    let mut r = common::rng(3);
    let m = random_mspbe::<f64, _>(40, 5, 0.9, true, &mut r).unwrap();
    let p = m.to_problem().unwrap();
    let rep = check_gradients_self(&p, &random_points(&p, 50, 1.0, 3), 1e-6).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn smoothed_l1_regularizer_checks_at_coarser_tolerance() {
    let f = Arc::new(SmoothedL1::new(6, 10.0, 1.0).unwrap());
    let g = Arc::new(Quadratic::diagonal(DVector::from_element(6, 1.0), DVector::zeros(6)).unwrap());
    let p = SaddleProblem::new(f, g, DMatrix::identity(6, 6), 5.0, 1.0, 1.0).unwrap();
    let rep = check_gradients_self(&p, &random_points(&p, 20, 1.0, 9), 1e-5).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn corrupted_gradient_is_caught() {
    let f: FunctionRef<f64> = Arc::new(
        FnOracle::new(3, |x: &DVector<f64>| {
            let mut g = x.clone();
            g[1] += 0.1;
            g
        })
        .with_value(|x: &DVector<f64>| 0.5 * x.norm_squared()),
    );
    let g = Arc::new(Quadratic::diagonal(DVector::from_element(3, 1.0), DVector::zeros(3)).unwrap());
    let p = SaddleProblem::new(f, g, DMatrix::identity(3, 3), 1.0, 1.0, 1.0).unwrap();
    let rep = check_gradients_self(&p, &random_points(&p, 5, 1.0, 0), 1e-6).unwrap();
    assert!(!rep.passed);
}

#[test]
fn direct_and_iterative_references_agree() {
    for seed in 0..20 {
        let (_, p) = quadratic(seed);
        let d = reference_solution(&p, ReferenceMode::Direct).unwrap();
        let i = reference_solution(&p, ReferenceMode::iterate()).unwrap();
        assert!((&d.x - &i.x).norm() <= 1e-9, "seed {seed}");
        assert!((&d.y - &i.y).norm() <= 1e-9, "seed {seed}");
    }
}

#[test]
fn iterative_conjugate_fallback_matches_closed_form() {
    let (q, p) = quadratic(3);
    // the same g without its closed-form conjugate
    let (s, lin) = p.g().quadratic_form().unwrap();
    let g_no_conj: FunctionRef<f64> = Arc::new(FnOracle::new(q.d2(), move |y: &DVector<f64>| &s * y + &lin));
    let pi = SaddleProblem::new(
        p.f().clone(),
        g_no_conj,
        p.coupling().clone(),
        p.params().rho,
        p.params().alpha,
        p.params().beta,
    )
    .unwrap();
    assert!(!pi.has_closed_form_conjugate());
    for (x, _) in random_points(&p, 5, 2.0, 1) {
        assert!((pi.grad_primal(&x).unwrap() - p.grad_primal(&x).unwrap()).norm() <= 1e-8);
    }
}
