use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vaisman_core::deformation::{bound1_threshold, certify, rescaling_bound};
use vaisman_core::expr::Expr;
use vaisman_core::hopf::HopfScenario;
use vaisman_core::report::Tolerances;

#[test]
fn threshold_for_one_transverse_dimension() {
    assert_eq!(bound1_threshold(1), 1.0 / 3.0);
    assert_eq!(bound1_threshold(3), 1.0 / 45.0);
}

/// Random cubic polynomial in `u, v` plus a multiple of `log(1 + s)`.
fn random_potential(rng: &mut ChaCha8Rng) -> Expr {
    let (u, v) = (Expr::var(0), Expr::var(1));
    let mut terms = Vec::new();
    for a in 0..=3 {
        for b in 0..=(3 - a) {
            let c: f64 = rng.random_range(-2.0..2.0);
            terms.push((u.powi(a) * v.powi(b)).scale(c));
        }
    }
    let s = &(&u * &u) + &(&v * &v);
    terms.push((Expr::one() + s).ln().scale(rng.random_range(-2.0..2.0)));
    vaisman_core::expr::sum(terms)
}

#[test]
fn rescaled_generators_pass_both_bounds() {
    let sc = HopfScenario::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let phi = random_potential(&mut rng);
        let spec = vaisman_core::deformation::DeformationSpec::new(
            sc.build(&sc.grid()).unwrap(),
            vaisman_core::deformation::Generator::Potential(phi),
            vec![1.0],
            Tolerances::default(),
            sc.grid(),
        )
        .unwrap();
        let raw = certify(&spec, 1.0, spec.zeta_1());
        let m = rescaling_bound(&raw.bound1, raw.mu_min.min);
        let c = m * rng.random_range(1.001..2.0);
        let scaled = certify(&spec, 1.0 / c, &spec.zeta_1().scale(1.0 / c));
        assert!(scaled.bound1.pass, "{:?} with c = {c}", scaled.bound1);
        assert!(scaled.mu_min.pass, "{:?} with c = {c}", scaled.mu_min);
    }
}
