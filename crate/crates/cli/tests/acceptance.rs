//! One line per acceptance criterion; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vaisman_cli::{execute, to_json, Command, GridConfig, RunConfig};
use vaisman_core::calculus::{christoffel, lie_derivative, lie_derivative_form};
use vaisman_core::chart::ChartSpec;
use vaisman_core::deformation::{bound1_threshold, certify, rescaling_bound, verify_theorem, DeformationSpec, Generator};
use vaisman_core::expr::{self, Expr, Program};
use vaisman_core::form::{combinations, KForm};
use vaisman_core::grid::Execution;
use vaisman_core::hopf::{det_oracle, HopfScenario};
use vaisman_core::mutation;
use vaisman_core::report::{Tolerances, VerificationReport};
use vaisman_core::tensor::{MetricField, VectorField};
use vaisman_core::vaisman::VAISMAN_CHECKS;

const SUITE_TOL: f64 = 1e-8;
const DET_TOL: f64 = 1e-7;
const J_SQUARED_TOL: f64 = 1e-10;
const THEOREM_TOL: f64 = 1e-9;
const CALCULUS_TOL: f64 = 1e-11;
const FD_TOL: f64 = 1e-7;

type Outcome = Result<String, String>;

fn max_of(r: &VerificationReport, names: &[&str]) -> Result<f64, String> {
    let mut m: f64 = 0.0;
    for n in names {
        let rec = r.record(n).ok_or_else(|| format!("missing record {n}"))?;
        if rec.evaluated == 0 || rec.max_residual.is_nan() {
            return Err(format!("{n} was not evaluated"));
        }
        m = m.max(rec.max_residual);
    }
    Ok(m)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let sc = HopfScenario::default();
    let grid = sc.grid();
    let r = sc.verify(&grid, &Tolerances::default()).map_err(|e| e.to_string())?;
    let m = max_of(&r, &VAISMAN_CHECKS)?;
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("{} checks, max residual {m:.2e} over {} points in {secs:.1} s", VAISMAN_CHECKS.len(), grid.len());
    if m <= SUITE_TOL && grid.len() >= 500 && secs <= 60.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Outcome {
    let sc = HopfScenario::default();
    let ts: Vec<f64> = (0..21).map(|k| -0.45 + 0.045 * k as f64).collect();
    let pts = sc.radial_points(200);
    let r = sc.check_det_matches(&ts, &pts, &Tolerances::default()).map_err(|e| e.to_string())?;
    let rec = r.record("det_closed_form").ok_or("missing record")?;
    let msg = format!("max relative error {:.2e} over {} (t, point) pairs", rec.max_residual, rec.evaluated);
    if rec.max_residual <= DET_TOL && rec.evaluated == 21 * 200 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3() -> Outcome {
    let sc = HopfScenario::default();
    let ts = [-0.2, -0.1, -0.05, 0.05, 0.1, 0.2];
    let spec = sc.deformation(ts.to_vec(), Tolerances::default(), sc.grid()).map_err(|e| e.to_string())?;
    let (mut suite, mut jsq, mut rest) = (0.0f64, 0.0f64, 0.0f64);
    for t in ts {
        let r = verify_theorem(&spec, t, false).map_err(|e| e.to_string())?;
        suite = suite.max(max_of(&r, &VAISMAN_CHECKS)?);
        jsq = jsq.max(max_of(&r, &["j_t_squared"])?);
        rest = rest.max(max_of(&r, &["omega_t_type_11", "u_killing", "unit_norms"])?);
    }
    let msg = format!("suite {suite:.2e}, J_t^2 + Id {jsq:.2e}, (1,1)/Killing/norms {rest:.2e}");
    if suite <= SUITE_TOL && jsq <= J_SQUARED_TOL && rest <= THEOREM_TOL {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Outcome {
    let sc = HopfScenario::default();
    let ts: Vec<f64> = (1..=21).map(|k| -0.5 + k as f64 / 22.0).collect();
    let sweep = sc.positivity_sweep(&ts, &sc.grid(), &Tolerances::default()).map_err(|e| e.to_string())?;
    let eig = sweep.rows.iter().map(|r| r.min_eigenvalue).fold(f64::INFINITY, f64::min);
    let det = sweep.rows.iter().map(|r| r.min_det).fold(f64::INFINITY, f64::min);
    let probe = det_oracle(1.0, 0.0);
    let msg = format!("{} t values, min eigenvalue {eig:.3e}, min det {det:.3e}, oracle det at t=1, w=0 is {probe}", sweep.rows.len());
    if sweep.rows.len() == 21 && eig > 0.0 && det > 0.0 && probe == 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Outcome {
    let threshold = bound1_threshold(1);
    let sc = HopfScenario::default();
    let grid = sc.grid();
    let s = sc.build(&grid).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (u, v) = (Expr::var(0), Expr::var(1));
    let mut passed = 0;
    for _ in 0..10 {
        let mut terms = Vec::new();
        for a in 0..=3 {
            for b in 0..=(3 - a) {
                terms.push((u.powi(a) * v.powi(b)).scale(rng.random_range(-2.0..2.0)));
            }
        }
        let r2 = &(&u * &u) + &(&v * &v);
        terms.push((Expr::one() + r2).ln().scale(rng.random_range(-2.0..2.0)));
        let spec = DeformationSpec::new(
            s.clone(),
            Generator::Potential(expr::sum(terms)),
            vec![1.0],
            Tolerances::default(),
            grid.clone(),
        )
        .map_err(|e| e.to_string())?;
        let raw = certify(&spec, 1.0, spec.zeta_1());
        let c = rescaling_bound(&raw.bound1, raw.mu_min.min) * rng.random_range(1.001..2.0);
        let scaled = certify(&spec, 1.0 / c, &spec.zeta_1().scale(1.0 / c));
        if scaled.bound1.pass && scaled.mu_min.pass {
            passed += 1;
        }
    }
    let msg = format!("threshold(1) = {threshold}, rescaling holds for {passed}/10 potentials");
    if threshold == 1.0 / 3.0 && passed == 10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for m in mutation::ALL {
        let out = m.run().map_err(|e| e.to_string())?;
        ok &= out.matches();
        lines.push(format!("{}: {}", m.name(), if out.matches() { "exact" } else { "MISMATCH" }));
        if !out.matches() {
            lines.push(format!("got {:?}, expected {:?}", out.failing, out.expected));
        }
    }
    let msg = lines.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

const DIM: usize = 4;

/// Polynomial, log and exp combinations of the coordinates, depth ≤ 3.
fn random_scalar(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.5) {
            Expr::constant(rng.random_range(-2.0..2.0))
        } else {
            Expr::var(rng.random_range(0..DIM))
        };
    }
    let a = random_scalar(rng, depth - 1);
    match rng.random_range(0..6) {
        0 => a + random_scalar(rng, depth - 1),
        1 => a - random_scalar(rng, depth - 1),
        2 => a * random_scalar(rng, depth - 1),
        3 => a.scale(0.3).exp(),
        4 => (Expr::one() + a.powi(2)).ln(),
        _ => a.powi(2),
    }
}

fn random_form(rng: &mut ChaCha8Rng, k: usize) -> KForm {
    let idx = combinations(DIM, k);
    let comps: Vec<Expr> = idx.iter().map(|_| random_scalar(rng, 3)).collect();
    KForm::from_entries(DIM, k, idx.into_iter().zip(comps))
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn max_abs_over(exprs: &[Expr], pts: &[Vec<f64>]) -> Result<f64, String> {
    let p = Program::compile(exprs);
    let mut m: f64 = 0.0;
    for x in pts {
        for v in p.eval(x).map_err(|e| e.to_string())? {
            m = m.max(v.abs());
        }
    }
    Ok(m)
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut dd, mut leibniz, mut cartan, mut fd) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..200 {
        let pts = random_points(&mut rng, 50);
        let a = random_form(&mut rng, i % 3);
        dd = dd.max(max_abs_over(&a.d().d().dense_increasing(), &pts)?);

        let (k, l) = (i % 3, (i / 3) % 2);
        let (a, b) = (random_form(&mut rng, k), random_form(&mut rng, l));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let lhs = a.wedge(&b).map_err(|e| e.to_string())?.d();
        let rhs = a
            .d()
            .wedge(&b)
            .map_err(|e| e.to_string())?
            .add(&a.wedge(&b.d()).map_err(|e| e.to_string())?.scale(sign));
        leibniz = leibniz.max(max_abs_over(&lhs.sub(&rhs).dense_increasing(), &pts)?);

        let x = VectorField::new((0..DIM).map(|_| random_scalar(&mut rng, 3)).collect());
        let a = random_form(&mut rng, 1);
        let coordinate = lie_derivative(&x, &a.to_tensor()).map_err(|e| e.to_string())?;
        let formula = lie_derivative_form(&x, &a).to_tensor();
        let diff: Vec<Expr> = coordinate.comps().iter().zip(formula.comps()).map(|(p, q)| p - q).collect();
        cartan = cartan.max(max_abs_over(&diff, &pts)?);
    }
    let h = 1e-6;
    for _ in 0..100 {
        let f = random_scalar(&mut rng, 3);
        let p = random_points(&mut rng, 1).remove(0);
        let mut dir: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-3);
        dir.iter_mut().for_each(|d| *d /= n);
        let mut symbolic = 0.0;
        for (i, d) in dir.iter().enumerate() {
            symbolic += d * f.diff(i).eval(&p).map_err(|e| e.to_string())?;
        }
        let at = |s: f64| -> Result<f64, String> {
            let q: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            f.eval(&q).map_err(|e| e.to_string())
        };
        let central = (at(h)? - at(-h)?) / (2.0 * h);
        fd = fd.max((symbolic - central).abs() / symbolic.abs().max(1.0));
    }
    let chart = ChartSpec::standard(1, 2.0);
    let mut symmetric = true;
    for _ in 0..20 {
        let g = MetricField::from_upper(DIM, |a, b| {
            let e = random_scalar(&mut rng, 3).sin().scale(if a == b { 0.5 } else { 0.2 });
            if a == b {
                Expr::constant(2.0) + e
            } else {
                e
            }
        });
        let p = random_points(&mut rng, 1).remove(0);
        let gamma = christoffel(&g, &chart.point(p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for c in 0..DIM {
            for i in 0..DIM {
                for j in 0..DIM {
                    symmetric &= gamma.get(c, i, j) == gamma.get(c, j, i);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!(
        "d∘d {dd:.1e}, Leibniz {leibniz:.1e}, Cartan {cartan:.1e}, finite difference {fd:.1e}, Christoffel symmetric {symmetric}, {secs:.1} s"
    );
    if dd <= CALCULUS_TOL && leibniz <= CALCULUS_TOL && cartan <= CALCULUS_TOL && fd <= FD_TOL && symmetric && secs <= 120.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let config = |execution| RunConfig {
        scenario: Some("hopf-diagonal".into()),
        t_values: vec![0.1, -0.2],
        grid: GridConfig {
            seed: Some(1234),
            ..GridConfig::default()
        },
        execution,
        ..RunConfig::default()
    };
    let mut sizes = Vec::new();
    for command in [Command::Verify, Command::Deform] {
        let a = to_json(&execute(command, &config(Execution::Parallel)).map_err(|e| e.to_string())?);
        let b = to_json(&execute(command, &config(Execution::Parallel)).map_err(|e| e.to_string())?);
        if a != b {
            return Err(format!("{command:?}: repeated runs differ"));
        }
        sizes.push(a.len());
    }
    Ok(format!("verify and deform reports byte-identical across runs ({sizes:?} bytes)"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("Hopf baseline Vaisman suite", criterion_1),
        ("determinant closed form", criterion_2),
        ("deformed family", criterion_3),
        ("positivity window", criterion_4),
        ("admissibility machinery", criterion_5),
        ("mutation sensitivity", criterion_6),
        ("calculus kernel properties", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("PASS criterion {} ({name}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {msg}", i + 1);
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
