//! Single-axiom violations injected into known-good structures.
//!
//! Each case carries the exact set of records it is expected to flag. Names
//! prefixed with `certificate.` refer to admissibility certificate entries.

use std::collections::BTreeSet;

use crate::chart::ChartSpec;
use crate::deformation::{deform, verify_deformed, DeformError, DeformationSpec, Generator};
use crate::expr::Expr;
use crate::form::KForm;
use crate::grid::{GridSpec, SampleGrid};
use crate::hopf::HopfScenario;
use crate::report::{Tolerances, VerificationReport};
use crate::tensor::{Endomorphism, VectorField};
use crate::vaisman::{
    build_from_potential, check_vaisman, standard_complex_structure, FoliatedPotentialChart,
    VaismanError, VaismanStructure,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    NonType11Generator,
    BrokenComplexStructure,
    ScaledMetric,
    NonClosedLeeForm,
    NonBasicGenerator,
}

pub const ALL: [Mutation; 5] = [
    Mutation::NonType11Generator,
    Mutation::BrokenComplexStructure,
    Mutation::ScaledMetric,
    Mutation::NonClosedLeeForm,
    Mutation::NonBasicGenerator,
];

#[derive(Debug, Clone)]
pub struct MutationOutcome {
    pub mutation: Mutation,
    /// Failing records of the unmutated structure; expected empty.
    pub baseline_failing: BTreeSet<String>,
    pub failing: BTreeSet<String>,
    pub expected: BTreeSet<String>,
}

impl MutationOutcome {
    pub fn matches(&self) -> bool {
        self.baseline_failing.is_empty() && self.failing == self.expected
    }
}

impl Mutation {
    pub fn name(self) -> &'static str {
        match self {
            Mutation::NonType11Generator => "non-(1,1) generator",
            Mutation::BrokenComplexStructure => "broken complex structure",
            Mutation::ScaledMetric => "scaled metric",
            Mutation::NonClosedLeeForm => "non-closed Lee form",
            Mutation::NonBasicGenerator => "non-basic generator",
        }
    }

    pub fn expected(self) -> BTreeSet<String> {
        let names: &[&str] = match self {
            // J_t stops being integrable, ω_t stops being (1,1), dζ∘J stops
            // being symmetric, so the symmetrized g_t no longer reproduces ω_t
            Mutation::NonType11Generator => &[
                "certificate.is_11",
                "lcs_structure",
                "metric_routes",
                "metric_symmetry",
                "nijenhuis",
                "omega_t_type_11",
                "structure_equation",
            ],
            // x-dependence breaks integrability and Lie_U J; g is no longer
            // J-Hermitian and ω = g(·, J·) changes
            Mutation::BrokenComplexStructure => &[
                "hermitian",
                "lcs_structure",
                "lee_fields_killing",
                "nijenhuis",
                "structure_equation",
            ],
            // the connection is unchanged; only |θ| and ω scale
            Mutation::ScaledMetric => &["lee_unit_norm", "structure_equation"],
            // g and J are untouched and θ(U), θ^c(V) stay 1
            Mutation::NonClosedLeeForm => &[
                "lcs_structure",
                "lee_closed",
                "lee_parallel",
                "lee_unit_norm",
                "structure_equation",
            ],
            // dζ = t dx∧du has a leaf component, so every identity relying on
            // basic data fails; the sup-norm bound still holds at this t
            Mutation::NonBasicGenerator => &[
                "certificate.is_11",
                "certificate.is_basic",
                "deformed_basic",
                "hermitian",
                "lcs_structure",
                "lee_duality",
                "lee_fields_geodesic",
                "lee_fields_killing",
                "lee_parallel",
                "lee_unit_norm",
                "metric_routes",
                "metric_symmetry",
                "nijenhuis",
                "omega_t_type_11",
                "structure_equation",
                "u_killing",
                "unit_norms",
            ],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn run(self) -> Result<MutationOutcome, DeformError> {
        let tol = Tolerances::default();
        let (s, grid) = match self {
            Mutation::NonType11Generator => flat(2)?,
            _ => hopf()?,
        };
        let baseline_failing = failing(&check_vaisman(&s, &grid, &tol));
        let report = match self {
            Mutation::NonType11Generator => {
                // dζ = du1∧du2 is of type (2,0)+(0,2)
                let mut c = vec![Expr::zero(); 6];
                c[2] = Expr::var(0);
                let spec = DeformationSpec::new(s, Generator::Form(KForm::from_covector(c)), vec![0.1], tol, grid)?;
                verify_deformed(&spec, &deform(&spec, 0.1, true)?)
            }
            Mutation::BrokenComplexStructure => {
                // J + ∂x⊗α + ∂y⊗(α∘J₀) still squares to −Id for transverse α
                let alpha = KForm::from_covector(vec![
                    Expr::var(2).scale(0.1),
                    Expr::zero(),
                    Expr::zero(),
                    Expr::zero(),
                ]);
                let j0 = standard_complex_structure(s.chart());
                let extra = Endomorphism::outer(&VectorField::coordinate(4, 2), &alpha)
                    .add(&Endomorphism::outer(&VectorField::coordinate(4, 3), &alpha.compose_endo(&j0)));
                check_vaisman(&s.with_complex_structure(s.j().add(&extra)), &grid, &tol)
            }
            Mutation::ScaledMetric => check_vaisman(&s.with_metric(s.g().scale(2.0)), &grid, &tol),
            Mutation::NonClosedLeeForm => {
                let theta = s.theta().add(&KForm::from_covector(vec![
                    Expr::zero(),
                    Expr::var(0).scale(0.1),
                    Expr::zero(),
                    Expr::zero(),
                ]));
                check_vaisman(&s.with_lee_form(theta), &grid, &tol)
            }
            Mutation::NonBasicGenerator => {
                let zeta = KForm::from_covector(vec![Expr::var(2), Expr::zero(), Expr::zero(), Expr::zero()]);
                let spec = DeformationSpec::new_unchecked(s, Generator::Form(zeta), vec![0.005], tol, grid)?;
                verify_deformed(&spec, &deform(&spec, 0.005, true)?)
            }
        };
        Ok(MutationOutcome {
            mutation: self,
            baseline_failing,
            failing: failing(&report),
            expected: self.expected(),
        })
    }
}

/// Failing record names plus failing certificate entries.
pub fn failing(r: &VerificationReport) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = r.failing().into_iter().map(String::from).collect();
    if let Some(c) = &r.certificate {
        out.extend(c.failing().into_iter().map(|f| format!("certificate.{f}")));
    }
    out
}

fn hopf() -> Result<(VaismanStructure, SampleGrid), VaismanError> {
    let sc = HopfScenario::default();
    let grid = sc.grid();
    Ok((sc.build(&grid)?, grid))
}

/// `h = ¼ Σ (u_j² + v_j²)` on the unit box.
fn flat(n: usize) -> Result<(VaismanStructure, SampleGrid), VaismanError> {
    let chart = ChartSpec::standard(n, 1.0);
    let h = crate::expr::sum((0..2 * n).map(|i| Expr::var(i).powi(2))).scale(0.25);
    let grid = SampleGrid::new(
        &chart,
        &GridSpec {
            lattice: 3,
            random: 200,
            ..GridSpec::default()
        },
    );
    let fc = FoliatedPotentialChart::new(chart, h)?;
    Ok((build_from_potential(&fc, &grid)?, grid))
}
