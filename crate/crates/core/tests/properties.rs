//! Randomized invariants of schedules, oracles and couplings.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use saddle_core::{pdg_schedule, potential_r, sc_schedule, Coupling, CovarianceSpec, Quadratic, SmoothFunction, SmoothnessParams};

fn params() -> impl Strategy<Value = SmoothnessParams<f64>> {
    (0.0..10.0f64, 1e-3..10.0f64, 1.0..100.0f64, 1e-2..10.0f64, 0.01..1.0f64)
        .prop_map(|(rho, alpha, ratio, smax, frac)| SmoothnessParams::new(rho, alpha, alpha * ratio, smax, smax * frac).unwrap())
}

proptest! {
    #[test]
    fn pdg_schedule_respects_step_bounds(p in params()) {
        let s = pdg_schedule(&p).unwrap();
        let tol = 1.0 + 1e-12;
        let k = p.rho + p.sigma_max * p.sigma_max / p.alpha;
        prop_assert!(s.lambda > 0.0);
        prop_assert!(s.eta1 > 0.0 && s.eta1 <= tol / (2.0 * k));
        prop_assert!(s.eta1 <= tol / (k + p.sigma_min * p.sigma_min / p.beta));
        prop_assert!(s.eta1 <= p.primal_step_bound() * tol);
        prop_assert!(s.eta2 <= tol * 2.0 / (p.alpha + p.beta));
        prop_assert!(s.rate > 0.0 && s.rate < 1.0);
    }

    #[test]
    fn sc_schedule_rate_is_a_contraction(a1 in 1e-3..10.0f64, r1 in 1.0..50.0f64, a2 in 1e-3..10.0f64, r2 in 1.0..50.0f64, s in 0.0..20.0f64) {
        let sc = sc_schedule(a1, a1 * r1, a2, a2 * r2, s).unwrap();
        prop_assert!(sc.rate > 0.0 && sc.rate < 1.0);
        prop_assert!(sc.eta1 > 0.0 && sc.eta2 > 0.0);
        prop_assert!(sc.eta1 <= 1.0 / (a1 + a1 * r1) && sc.eta2 <= 1.0 / (a2 + a2 * r2));
    }

    #[test]
    fn conjugate_inverts_gradient(entries in prop::collection::vec(-1.0..1.0f64, 16), shift in 0.1..5.0f64, z in prop::collection::vec(-10.0..10.0f64, 4), lin in prop::collection::vec(-3.0..3.0f64, 4)) {
        let m = DMatrix::from_vec(4, 4, entries);
        let h = &m * m.transpose() + DMatrix::identity(4, 4) * shift;
        let g = Quadratic::new(h, DVector::from_vec(lin)).unwrap();
        let z = DVector::from_vec(z);
        let y = g.conjugate_gradient(&z).unwrap();
        prop_assert!((g.gradient(&y) - &z).norm() <= 1e-8 * (1.0 + z.norm()));
    }

    #[test]
    fn couplings_agree_with_their_dense_form(u in prop::collection::vec(-2.0..2.0f64, 3), v in prop::collection::vec(-2.0..2.0f64, 5), x in prop::collection::vec(-2.0..2.0f64, 5), y in prop::collection::vec(-2.0..2.0f64, 3), index in 0usize..3) {
        let (u, v, x, y) = (DVector::from_vec(u), DVector::from_vec(v), DVector::from_vec(x), DVector::from_vec(y));
        for c in [Coupling::RankOne { u: u.clone(), v: v.clone() }, Coupling::Row { index, rows: 3, v: v.clone() }] {
            let dense = c.to_dense();
            let mut ax = DVector::zeros(3);
            c.apply_add(&x, &mut ax);
            let mut aty = DVector::zeros(5);
            c.apply_t_add(&y, &mut aty);
            prop_assert!((ax - &dense * &x).norm() <= 1e-12);
            prop_assert!((aty - dense.transpose() * &y).norm() <= 1e-12);
            prop_assert!(c.sigma_max() >= 0.0);
        }
    }

    #[test]
    fn correlated_covariances_are_positive_definite(c in 0.05..50.0f64, d in 1usize..40) {
        let sigma = CovarianceSpec::ExpDecay { c }.matrix(d).unwrap();
        prop_assert!(sigma.clone().cholesky().is_some());
        for i in 0..d {
            prop_assert_eq!(sigma[(i, i)], 1.0);
        }
    }

    #[test]
    fn strongly_convex_potential_is_nonnegative_and_zero_at_solution(x in prop::collection::vec(-5.0..5.0f64, 3), y in prop::collection::vec(-5.0..5.0f64, 2), e1 in 1e-3..1.0f64, e2 in 1e-3..1.0f64) {
        let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
        prop_assert!(potential_r(&x, &y, &DVector::zeros(3), &DVector::zeros(2), e1, e2) >= 0.0);
        prop_assert_eq!(potential_r(&x, &y, &x, &y, e1, e2), 0.0);
    }
}
