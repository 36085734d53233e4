//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any of them fails.

use nalgebra::DVector;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saddle_core::{
    check_gradients_self, random_mspbe, random_points, random_quadratic, reference_solution, CovarianceSpec, QuadraticSpec, ReferenceMode,
    SmoothedL1Regression,
};
use saddle_harness::{cmd_solve, cmd_verify, ExperimentConfig, SolverStatus, Suite, Summary, VerifyOptions};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn verify(suite: Suite, trials: usize, iters: Option<usize>) -> Outcome {
    let mut opts = VerifyOptions::new(suite, trials, 1);
    opts.iters = iters;
    let report = cmd_verify(&opts).map_err(|e| e.to_string())?;
    let line = report.line();
    if report.refuted() {
        Err(line)
    } else {
        Ok(line)
    }
}

fn batch_certificate() -> Outcome {
    let start = Instant::now();
    let line = verify(Suite::Theorem1, 100, Some(500))?;
    let secs = start.elapsed().as_secs_f64();
    if secs < 60.0 {
        Ok(line)
    } else {
        Err(format!("{line}; took {secs:.1}s, limit 60s"))
    }
}

fn iteration_budget() -> Outcome {
    verify(Suite::IterationBudget, 100, None)
}

fn strongly_convex_certificate() -> Outcome {
    verify(Suite::AppendixB, 100, Some(500))
}

fn one_step_inequalities() -> Outcome {
    verify(Suite::Props, 50, Some(200))
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

fn unbiasedness() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d1, d2) = QuadraticSpec::random_dims(&mut rng);
        let q = random_quadratic::<f64, _>(&QuadraticSpec::convex(d1, d2), &mut rng).map_err(|e| e.to_string())?;
        let fsp = q.split(10, 0.3, &mut rng).map_err(|e| e.to_string())?;
        let problem = q.to_problem().map_err(|e| e.to_string())?;
        let states = random_points(&problem, 40, 2.0, 100 + seed);
        for pair in states.chunks(2) {
            let ((x, y), (xs, ys)) = (&pair[0], &pair[1]);
            let e = |r: saddle_core::Result<(DVector<f64>, DVector<f64>)>| r.map_err(|e| e.to_string());
            let (fx, fy) = e(fsp.full_grad(xs, ys))?;
            let (mut sx, mut sy) = (DVector::zeros(d1), DVector::zeros(d2));
            for i in 0..fsp.n() {
                let (gx, gy) = e(fsp.vr_grad(i, x, y, xs, ys, (&fx, &fy)))?;
                sx += gx;
                sy += gy;
            }
            let (tx, ty) = e(fsp.full_grad(x, y))?;
            let n = fsp.n() as f64;
            worst = worst.max(rel(&(sx / n), &tx)).max(rel(&(sy / n), &ty));
        }
    }
    let line = format!("20 instances x 20 states, worst relative error {worst:.3e}");
    if worst <= 1e-12 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn svrg_halving() -> Outcome {
    let report = cmd_verify(&VerifyOptions::new(Suite::SvrgHalving, 5, 1)).map_err(|e| e.to_string())?;
    let configs: Vec<String> = report
        .details
        .iter()
        .map(|t| match &t.config {
            Some(c) => format!(
                "[eta1 {} eta2 {} N {} mu {} ratio {:.3}]",
                c.eta1,
                c.eta2,
                c.inner_iters,
                c.mu,
                t.worst_ratio.unwrap_or(f64::NAN)
            ),
            None => "[none]".into(),
        })
        .collect();
    let line = format!("{}; achieving configs {}", report.line(), configs.join(" "));
    if report.refuted() {
        Err(line)
    } else {
        Ok(line)
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn regression_case(case: &str, out: &std::path::Path) -> Result<Summary, String> {
    let cfg = ExperimentConfig::load(&configs_dir().join(format!("regression_case_{case}.json"))).map_err(|e| e.to_string())?;
    cmd_solve(&cfg, &out.join(case)).map_err(|e| e.to_string())
}

fn regression_reproduction() -> Outcome {
    let start = Instant::now();
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for case in ["a", "b", "c"] {
        let s = regression_case(case, out.path())?;
        let get = |name: &str| s.solver(name).filter(|r| r.status == SolverStatus::Ok);
        let (pdg, gd, svrg) = (get("pdg"), get("primal_gd"), get("pdsvrg"));
        let (Some(pdg), Some(gd), Some(svrg)) = (pdg, gd, svrg) else {
            failures.push(format!("case {case}: a solver did not finish"));
            continue;
        };
        for r in [pdg, svrg] {
            match r.slope {
                Some(k) if k < 0.0 => {}
                k => failures.push(format!("case {case}: {} slope {k:?}", r.name)),
            }
        }
        match (pdg.units_to_target, gd.units_to_target) {
            (Some(p), Some(g)) => {
                let ratio = p / g;
                let flag = if ratio > 3.0 { " (above 3x)" } else { "" };
                notes.push(format!("case {case}: pdg/gd {ratio:.2}{flag}"));
                if !(ratio > 1.0 && ratio <= 10.0) {
                    failures.push(format!("case {case}: pdg/gd unit ratio {ratio:.3} outside (1, 10]"));
                }
            }
            _ => failures.push(format!("case {case}: pdg or primal_gd never reached 1e-6")),
        }
        if case == "c" {
            match (svrg.units_to_target, pdg.units_to_target) {
                (Some(v), Some(p)) if v < p => notes.push(format!("case c: pdsvrg {v:.0} < pdg {p:.0} units")),
                (v, p) => failures.push(format!("case c: pdsvrg units {v:?} not below pdg {p:?}")),
            }
        }
    }
    let line = format!("{} ({:.0}s)", notes.join("; "), start.elapsed().as_secs_f64());
    if failures.is_empty() {
        Ok(line)
    } else {
        Err(format!("{}; {line}", failures.join("; ")))
    }
}

fn oracle_cross_checks() -> Outcome {
    let err = |e: saddle_core::Error| e.to_string();
    let mut worst_ref: f64 = 0.0;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let (d1, d2) = QuadraticSpec::random_dims(&mut rng);
        let p = random_quadratic::<f64, _>(&QuadraticSpec::convex(d1, d2), &mut rng)
            .and_then(|q| q.to_problem())
            .map_err(err)?;
        let direct = reference_solution(&p, ReferenceMode::Direct).map_err(err)?;
        let iter = reference_solution(&p, ReferenceMode::iterate()).map_err(err)?;
        worst_ref = worst_ref.max((&direct.x - &iter.x).norm()).max((&direct.y - &iter.y).norm());
    }
    let mut worst_mspbe: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in 0..20 {
        let m = random_mspbe::<f64, _>(60, 6, 0.9, k % 2 == 0, &mut rng).map_err(err)?;
        let sol = reference_solution(&m.to_problem().map_err(err)?, ReferenceMode::Direct).map_err(err)?;
        let x = m.minimizer().map_err(err)?;
        worst_mspbe = worst_mspbe.max((&sol.x - &x).norm() / (1.0 + x.norm()));
    }
    let mut fd_failures = Vec::new();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let (d1, d2) = QuadraticSpec::random_dims(&mut rng);
        let quad = random_quadratic::<f64, _>(&QuadraticSpec::convex(d1, d2), &mut rng)
            .and_then(|q| q.to_problem())
            .map_err(err)?;
        let reg = SmoothedL1Regression::generate(30, 8, CovarianceSpec::ExpDecay { c: 2.0 }, 10.0, 0.01 / 30.0, seed)
            .and_then(|r| r.to_problem())
            .map_err(err)?;
        let msp = random_mspbe::<f64, _>(40, 5, 0.9, true, &mut rng)
            .and_then(|m| m.to_problem())
            .map_err(err)?;
        for (name, p) in [("quadratic", &quad), ("regression", &reg), ("mspbe", &msp)] {
            let rep = check_gradients_self(p, &random_points(p, 20, 1.0, seed), 1e-6);
            if !rep.is_some_and(|r| r.passed) {
                fd_failures.push(format!("{name} seed {seed}"));
            }
        }
    }
    let line = format!(
        "direct vs iterative {worst_ref:.2e} over 50 instances; mspbe vs closed form {worst_mspbe:.2e}; finite differences failed on {} of 30 problems",
        fd_failures.len()
    );
    if worst_ref <= 1e-9 && worst_mspbe <= 1e-9 && fd_failures.is_empty() {
        Ok(line)
    } else {
        Err(format!("{line} {fd_failures:?}"))
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("batch contraction certificate", batch_certificate),
        ("iteration budget", iteration_budget),
        ("strongly convex certificate", strongly_convex_certificate),
        ("one-step inequalities", one_step_inequalities),
        ("svrg unbiasedness", unbiasedness),
        ("svrg potential halving", svrg_halving),
        ("regression reproduction", regression_reproduction),
        ("oracle cross-checks", oracle_cross_checks),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
