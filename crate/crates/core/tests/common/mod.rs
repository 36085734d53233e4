#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saddle_core::solvers::{reference_solution, ReferenceMode, ReferenceSolution};
use saddle_core::{random_quadratic, QuadraticSaddle, QuadraticSpec, SaddleProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random convex quadratic saddle instance with random dimensions.
pub fn quadratic(seed: u64) -> (QuadraticSaddle<f64>, SaddleProblem<f64>) {
    let mut r = rng(seed);
    let (d1, d2) = QuadraticSpec::random_dims(&mut r);
    let q = random_quadratic(&QuadraticSpec::convex(d1, d2), &mut r).unwrap();
    let p = q.to_problem().unwrap();
    (q, p)
}

pub fn strongly_convex_quadratic(seed: u64) -> (QuadraticSaddle<f64>, SaddleProblem<f64>) {
    let mut r = rng(seed);
    let (d1, d2) = QuadraticSpec::random_dims(&mut r);
    let q = random_quadratic(&QuadraticSpec::strongly_convex(d1, d2), &mut r).unwrap();
    let p = q.to_problem().unwrap();
    (q, p)
}

pub fn certified_reference(p: &SaddleProblem<f64>) -> ReferenceSolution<f64> {
    let r = reference_solution(p, ReferenceMode::Direct).unwrap();
    assert!(r.certified(1e-9), "reference residuals {} {}", r.residual_x, r.residual_y);
    r
}
