//! Problem families: construction, oracles and known solutions.

mod common;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use saddle_core::solvers::{reference_solution, run_primal_gd, ReferenceMode, RunOptions, StoppingRule};
use saddle_core::{random_mspbe, CovarianceSpec, QuadraticSaddle, SmoothFunction, SmoothedL1, SmoothedL1Regression};

#[test]
fn condition_number_grows_with_correlation() {
    let kappa = |cov| {
        let reg = SmoothedL1Regression::<f64>::generate(500, 200, cov, 10.0, 0.01 / 500.0, 42).unwrap();
        let p = reg.to_problem().unwrap();
        p.params().sigma_max / p.params().sigma_min
    };
    let k: Vec<f64> = [
        CovarianceSpec::Identity,
        CovarianceSpec::ExpDecay { c: 2.0 },
        CovarianceSpec::ExpDecay { c: 10.0 },
    ]
    .into_iter()
    .map(kappa)
    .collect();
    assert!(k[0] < k[1] && k[1] < k[2], "{k:?}");
}

#[test]
fn smoothed_l1_at_origin_and_far_out() {
    let d = 6;
    let r = SmoothedL1::<f64>::new(d, 10.0, 1.0).unwrap();
    let zero = DVector::zeros(d);
    assert_relative_eq!(r.regularizer(&zero), 2.0 * d as f64 / 10.0 * 2f64.ln(), epsilon = 1e-14);
    assert_eq!(r.gradient(&zero), zero);
    let far = DVector::from_vec(vec![10.0, -10.0, 100.0, -100.0, 1e3, -1e3]);
    let g = r.gradient(&far);
    for i in 0..d {
        assert!((g[i] - far[i].signum()).abs() <= 1e-8);
    }
    assert!(r.regularizer(&far).is_finite());
    assert_relative_eq!(r.regularizer(&far), far.lp_norm(1), max_relative = 1e-12);
}

#[test]
fn regression_dual_part_has_unit_over_n_curvature() {
    let reg = SmoothedL1Regression::<f64>::generate(25, 10, CovarianceSpec::Identity, 10.0, 0.01 / 25.0, 3).unwrap();
    let p = reg.to_problem().unwrap();
    assert_relative_eq!(p.params().alpha, 1.0 / 25.0, epsilon = 1e-15);
    assert_relative_eq!(p.params().beta, 1.0 / 25.0, epsilon = 1e-15);
    assert_relative_eq!(p.params().rho, 0.01 / 25.0 * 5.0, epsilon = 1e-15);
    let z = DVector::from_fn(25, |i, _| (i as f64).sin());
    let y = p.conj_grad(&z).unwrap();
    assert!((p.g().gradient(&y) - &z).norm() <= 1e-14 * (1.0 + z.norm()));
}

#[test]
fn regression_saddle_solution_minimizes_the_primal_objective() {
    for seed in 0..3 {
        let reg = SmoothedL1Regression::<f64>::generate(25, 10, CovarianceSpec::ExpDecay { c: 2.0 }, 10.0, 0.01 / 25.0, seed).unwrap();
        let p = reg.to_problem().unwrap();
        let saddle = reference_solution(&p, ReferenceMode::newton()).unwrap();
        assert!(saddle.certified(1e-9));
        // independent path: plain gradient descent on the primal objective
        let eta = p.params().primal_step_bound();
        let opts = RunOptions::new(StoppingRule::new(2_000_000, Some(1e-13)).unwrap());
        let gd = run_primal_gd(&p, &DVector::zeros(10), eta, &opts).unwrap();
        assert!((&gd.last.x - &saddle.x).norm() <= 1e-7, "seed {seed}");
        let pfs = reg.primal_finite_sum().unwrap();
        assert!(pfs.full_grad(&saddle.x).unwrap().norm() <= 1e-9);
        // the objective is lowest at the solution among nearby points
        let best = reg.objective(&saddle.x).unwrap();
        for k in 0..10 {
            let mut x = saddle.x.clone();
            x[k] += 1e-3;
            assert!(reg.objective(&x).unwrap() > best);
        }
    }
}

#[test]
fn regression_components_average_to_the_aggregate() {
    let reg = SmoothedL1Regression::<f64>::generate(30, 7, CovarianceSpec::Identity, 10.0, 0.01 / 30.0, 5).unwrap();
    let fsp = reg.to_finite_sum().unwrap();
    assert_eq!(fsp.n(), 30);
    let mut r = common::rng(5);
    for (x, y) in saddle_core::random_points(fsp.aggregate(), 10, 1.0, 9) {
        let (fx, fy) = fsp.full_grad(&x, &y).unwrap();
        let (ax, ay) = fsp.aggregate().grad_lagrangian(&x, &y).unwrap();
        assert!((fx - &ax).norm() <= 1e-12 * (1.0 + ax.norm()));
        assert!((fy - &ay).norm() <= 1e-12 * (1.0 + ay.norm()));
        // one component against a dense evaluation of its block
        let i = rand::Rng::random_range(&mut r, 0..30);
        let (gx, gy) = fsp.component_grad(i, &x, &y).unwrap();
        let row = reg.data.row(i).transpose();
        let lam = reg.lambda_reg;
        let rx = SmoothedL1::new(7, 10.0, lam).unwrap().gradient(&x) + &row * y[i];
        assert!((gx - rx).norm() <= 1e-12 * (1.0 + ax.norm()));
        assert!((gy[i] - (row.dot(&x) - y[i] - reg.targets[i])).abs() <= 1e-12 * (1.0 + ay.norm()));
    }
}

#[test]
fn quadratic_hand_examples() {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let q = QuadraticSaddle::new(one(0.5), DVector::zeros(1), one(1.0), one(0.5), DVector::zeros(1)).unwrap();
    let s = reference_solution(&q.to_problem().unwrap(), ReferenceMode::Direct).unwrap();
    assert!(s.x[0].abs() <= 1e-15 && s.y[0].abs() <= 1e-15);

    let q = QuadraticSaddle::new(one(0.0), DVector::zeros(1), one(1.0), one(0.5), DVector::from_element(1, 1.0)).unwrap();
    let s = reference_solution(&q.to_problem().unwrap(), ReferenceMode::Direct).unwrap();
    assert_relative_eq!(s.x[0], -1.0, epsilon = 1e-14);
    assert!(s.y[0].abs() <= 1e-14);

    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
    let q = QuadraticSaddle::new(b, DVector::zeros(2), DMatrix::identity(2, 2), DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
    assert_relative_eq!(q.to_problem().unwrap().params().rho, 4.0, epsilon = 1e-12);
}

#[test]
fn mspbe_saddle_matches_closed_form_minimizer() {
    let mut r = common::rng(21);
    for k in 0..20 {
        let normalize = k % 2 == 0;
        let m = random_mspbe::<f64, _>(60, 6, 0.9, normalize, &mut r).unwrap();
        let p = m.to_problem().unwrap();
        let s = reference_solution(&p, ReferenceMode::Direct).unwrap();
        let x = m.minimizer().unwrap();
        assert!((&s.x - &x).norm() <= 1e-9 * (1.0 + x.norm()), "instance {k}");
        assert!(m.objective(&s.x).unwrap() <= m.objective(&(&x * 1.001)).unwrap());
    }
}
