use vaisman_core::deformation::{deform, verify_theorem};
use vaisman_core::hopf::{det_oracle, HopfScenario};
use vaisman_core::report::Tolerances;
use vaisman_core::vaisman::VAISMAN_CHECKS;

fn show(r: &vaisman_core::report::VerificationReport) {
    for rec in &r.records {
        eprintln!(
            "{:28} {:>5} max {:.3e} tol {:.1e} ({} pts, {} skipped)",
            rec.name, rec.pass, rec.max_residual, rec.tolerance, rec.evaluated, rec.skipped
        );
    }
    for d in &r.diagnostics {
        eprintln!("  {} = {:.6} ({})", d.name, d.value, d.note);
    }
}

#[test]
fn baseline_passes_every_check() {
    let sc = HopfScenario::default();
    let grid = sc.grid();
    assert!(grid.len() >= 500, "grid has {} points", grid.len());
    let r = sc.verify(&grid, &Tolerances::default()).unwrap();
    show(&r);
    for name in VAISMAN_CHECKS {
        let rec = r.record(name).unwrap();
        assert!(rec.pass && rec.max_residual <= 1e-8, "{name}: {}", rec.max_residual);
    }
    assert!(r.all_pass(), "failing: {:?}", r.failing());
    let d = |n: &str| r.diagnostic(n).unwrap().value;
    assert!((d("theta_c_display_ratio_min") - 0.5).abs() < 1e-12);
    assert!((d("theta_c_display_ratio_max") - 0.5).abs() < 1e-12);
    assert!((d("omega_leaf_display_sign_min") + 1.0).abs() < 1e-12);
    assert!((d("volume_over_sqrt_det_min").abs() - 1.0).abs() < 1e-12);
    assert!((d("volume_over_sqrt_det_max").abs() - 1.0).abs() < 1e-12);
}

#[test]
fn deformed_family_satisfies_the_theorem() {
    let sc = HopfScenario::default();
    let ts = vec![-0.2, -0.1, -0.05, 0.05, 0.1, 0.2];
    let spec = sc.deformation(ts.clone(), Tolerances::default(), sc.grid()).unwrap();
    for t in ts {
        let r = verify_theorem(&spec, t, false).unwrap();
        eprintln!("t = {t}");
        show(&r);
        assert!(r.all_pass(), "t = {t}: {:?}", r.failing());
    }
}

#[test]
fn zero_deformation_reproduces_the_source() {
    let sc = HopfScenario::default();
    let grid = sc.grid();
    let spec = sc.deformation(vec![0.0], Tolerances::default(), grid.clone()).unwrap();
    let base = vaisman_core::vaisman::check_vaisman(spec.source(), &grid, &Tolerances::default());
    let r = verify_theorem(&spec, 0.0, false).unwrap();
    for rec in &base.records {
        assert_eq!(Some(rec), r.record(&rec.name));
    }
}

#[test]
fn determinant_matches_closed_form() {
    let sc = HopfScenario::default();
    let ts: Vec<f64> = (0..21).map(|k| -0.45 + 0.045 * k as f64).collect();
    let pts = sc.radial_points(200);
    let r = sc.check_det_matches(&ts, &pts, &Tolerances::default()).unwrap();
    show(&r);
    let rec = r.record("det_closed_form").unwrap();
    assert_eq!(rec.evaluated, 21 * 200);
    assert!(rec.pass && rec.max_residual <= 1e-7);
    assert!(r.record("pfaffian_square").unwrap().pass);
    assert_eq!(det_oracle(1.0, 0.0), 0.0);
}

#[test]
fn positivity_window() {
    let sc = HopfScenario::default();
    let ts: Vec<f64> = (1..=21).map(|k| -0.5 + k as f64 / 22.0).collect();
    let sweep = sc.positivity_sweep(&ts, &sc.grid(), &Tolerances::default()).unwrap();
    show(&sweep.report);
    for row in &sweep.rows {
        eprintln!("{row:?}");
        assert!(row.min_eigenvalue > 0.0 && row.min_det > 0.0);
    }
    assert!(sweep.report.all_pass());
}

#[test]
fn forced_deformation_outside_the_bound_keeps_positivity() {
    let sc = HopfScenario::default();
    let spec = sc.deformation(vec![0.45], Tolerances::default(), sc.grid()).unwrap();
    assert!(deform(&spec, 0.45, false).is_err());
    let d = deform(&spec, 0.45, true).unwrap();
    assert_eq!(d.certificate.failing(), vec!["bound1".to_string()]);
    let r = verify_theorem(&spec, 0.45, true).unwrap();
    assert!(r.records.iter().all(|rec| rec.pass), "{:?}", r.failing());
    assert!(!r.all_pass());
}
