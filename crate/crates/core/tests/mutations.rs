use vaisman_core::deformation::{DeformationSpec, Generator};
use vaisman_core::expr::Expr;
use vaisman_core::form::KForm;
use vaisman_core::hopf::HopfScenario;
use vaisman_core::mutation::Mutation;
use vaisman_core::report::Tolerances;

fn check(m: Mutation) {
    let out = m.run().unwrap();
    assert!(out.baseline_failing.is_empty(), "{:?}", out.baseline_failing);
    assert_eq!(out.failing, out.expected, "{}", m.name());
}

#[test]
fn non_type_11_generator() {
    check(Mutation::NonType11Generator);
}

#[test]
fn broken_complex_structure() {
    check(Mutation::BrokenComplexStructure);
}

#[test]
fn scaled_metric() {
    check(Mutation::ScaledMetric);
}

#[test]
fn non_closed_lee_form() {
    check(Mutation::NonClosedLeeForm);
}

#[test]
fn non_basic_generator() {
    check(Mutation::NonBasicGenerator);
}

#[test]
fn strict_constructor_rejects_non_basic_generators() {
    let sc = HopfScenario::default();
    let grid = sc.grid();
    let s = sc.build(&grid).unwrap();
    let zeta = KForm::from_covector(vec![Expr::var(2), Expr::zero(), Expr::zero(), Expr::zero()]);
    assert!(DeformationSpec::new(s, Generator::Form(zeta), vec![0.1], Tolerances::default(), grid).is_err());
}
