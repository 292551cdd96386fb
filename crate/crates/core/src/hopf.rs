//! The diagonal Hopf surface in a single chart `(u, v, x, y)`, `w = u + iv`.
//!
//! With `s = |w|²` the potential is `h = κ log(1 + s)` and the deformation
//! generator is `φ = σ f`, `f = ½((1 − s)/(1 + s))²`. The defaults `κ = ¼`,
//! `σ = −⅛` make the metric the identity at `w = 0` and reproduce
//! [`det_oracle`] exactly.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chart::{ChartSpec, Interval};
use crate::deformation::{deform, DeformError, DeformationSpec, Generator};
use crate::expr::{self, Expr, Program};
use crate::grid::{par_map, GridSpec, SampleGrid};
use crate::report::{CheckKind, CheckRecord, Diagnostic, Tolerances, VerificationReport};
use crate::vaisman::{
    build_from_potential, check_basic, check_transverse_frame, check_vaisman, FoliatedPotentialChart,
    VaismanError, VaismanStructure,
};
use crate::form::KForm;

pub const SCENARIO_NAME: &str = "hopf-diagonal";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HopfScenario {
    /// Bound on `|w|`.
    pub radius: f64,
    /// `κ` in `h = κ log(1 + s)`.
    pub potential_coefficient: f64,
    /// `σ` in `φ = σ f`.
    pub generator_coefficient: f64,
    pub t_window: (f64, f64),
    pub grid: GridSpec,
}

impl Default for HopfScenario {
    fn default() -> Self {
        HopfScenario {
            radius: 3.0,
            potential_coefficient: 0.25,
            generator_coefficient: -0.125,
            t_window: (-0.5, 0.5),
            grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityRow {
    pub t: f64,
    pub min_eigenvalue: f64,
    pub min_det: f64,
    pub max_det_error: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone)]
pub struct PositivitySweep {
    pub rows: Vec<PositivityRow>,
    pub report: VerificationReport,
}

fn s_expr() -> Expr {
    let (u, v) = (Expr::var(0), Expr::var(1));
    &(&u * &u) + &(&v * &v)
}

/// `[(1−t) + (2+4t)s + (1−t)s²]² / (1+s)⁸`.
pub fn det_oracle(t: f64, s: f64) -> f64 {
    let b = (1.0 - t) + (2.0 + 4.0 * t) * s + (1.0 - t) * s * s;
    b * b / (1.0 + s).powi(8)
}

impl HopfScenario {
    pub fn chart(&self) -> ChartSpec {
        let r = self.radius;
        ChartSpec::new(
            ["u", "v", "x", "y"].iter().map(|s| s.to_string()).collect(),
            vec![
                Interval::new(-r, r),
                Interval::new(-r, r),
                Interval::new(0.0, TAU),
                Interval::new(0.0, TAU),
            ],
            [2, 3],
        )
        .expect("hopf chart is valid")
        .with_transverse_radius(r)
    }

    pub fn grid(&self) -> SampleGrid {
        SampleGrid::new(&self.chart(), &self.grid)
    }

    pub fn potential(&self) -> Expr {
        (Expr::one() + s_expr()).ln().scale(self.potential_coefficient)
    }

    /// `f = ½((1 − s)/(1 + s))²`.
    pub fn f(&self) -> Expr {
        let s = s_expr();
        let q = (Expr::one() - s.clone()) / (Expr::one() + s);
        q.powi(2).scale(0.5)
    }

    pub fn generator(&self) -> Expr {
        self.f().scale(self.generator_coefficient)
    }

    pub fn foliated_chart(&self) -> FoliatedPotentialChart {
        FoliatedPotentialChart::new(self.chart(), self.potential()).expect("h is basic")
    }

    pub fn build(&self, grid: &SampleGrid) -> Result<VaismanStructure, VaismanError> {
        build_from_potential(&self.foliated_chart(), grid)
    }

    pub fn deformation(&self, t_values: Vec<f64>, tol: Tolerances, grid: SampleGrid) -> Result<DeformationSpec, DeformError> {
        let s = self.build(&grid)?;
        DeformationSpec::new(s, Generator::Potential(self.generator()), t_values, tol, grid)
    }

    /// Baseline report: the Vaisman suite, the transverse frame, basicness
    /// of `h` and `f`, and comparisons against the closed-form displays.
    pub fn verify(&self, grid: &SampleGrid, tol: &Tolerances) -> Result<VerificationReport, VaismanError> {
        let fc = self.foliated_chart();
        let s = build_from_potential(&fc, grid)?;
        let mut report = check_vaisman(&s, grid, tol);
        report.subject = SCENARIO_NAME.to_string();
        report.extend(check_transverse_frame(&fc, &s, grid, tol));
        for (name, phi) in [("h_basic", self.potential()), ("f_basic", self.f())] {
            let mut r = check_basic(&KForm::scalar(4, phi), s.u(), s.v(), grid, tol.get_or(name, 1e-12));
            for rec in &mut r.records {
                rec.name = name.to_string();
            }
            report.extend(r);
        }
        report.diagnostics.extend(self.display_diagnostics(&s, grid));
        Ok(report)
    }

    /// Ratios of the computed forms to a direct transcription of the
    /// closed-form displays (`θ^c`, `ω`, `θ_t^c` at `t = 0.1`) and the
    /// normalized volume form at `t = 0`.
    pub fn display_diagnostics(&self, s: &VaismanStructure, grid: &SampleGrid) -> Vec<Diagnostic> {
        let sv = s_expr();
        let one_s = Expr::one() + sv.clone();
        let v = Expr::var(1);
        let mut out = Vec::new();
        let mut ratio = |name: &str, num: Expr, den: Expr, note: &str| {
            let (lo, hi) = ratio_range(&num, &den, grid);
            out.push(Diagnostic::new(&format!("{name}_min"), lo, note));
            out.push(Diagnostic::new(&format!("{name}_max"), hi, note));
        };
        let tc = s.theta_c();
        ratio(
            "theta_c_display_ratio",
            tc.component(&[0]),
            &v / &one_s,
            "du coefficient of theta^c over v/(1+s)",
        );
        ratio(
            "theta_c_leaf_ratio",
            tc.component(&[3]),
            Expr::one(),
            "dy coefficient of theta^c",
        );
        let om = s.omega();
        ratio(
            "omega_transverse_display_ratio",
            om.component(&[0, 1]),
            (Expr::one() / one_s.powi(2)).scale(-2.0),
            "du^dv coefficient of omega over -2/(1+s)^2",
        );
        ratio(
            "omega_mixed_display_ratio",
            om.component(&[0, 2]),
            &v / &one_s,
            "du^dx coefficient of omega over v/(1+s)",
        );
        ratio(
            "omega_leaf_display_sign",
            om.component(&[2, 3]),
            Expr::one(),
            "dx^dy coefficient of omega against the +dx^dy display",
        );
        let t = 0.1;
        let zeta = crate::vaisman::d_c(&self.generator(), s.j()).scale(t);
        let tct = tc.add(&zeta);
        let bracket = expr::sub(
            &(Expr::one() / one_s.clone()),
            &((Expr::one() - sv) / one_s.powi(3)).scale(t),
        );
        ratio(
            "theta_c_t_display_ratio",
            tct.component(&[0]),
            &v * &bracket,
            "du coefficient of theta_t^c (t = 0.1) over the display",
        );
        let top = crate::deformation::volume_form(s.theta(), tc);
        let sqrt_det = Expr::one() / one_s.powi(2);
        ratio(
            "volume_over_sqrt_det",
            top.component(&[0, 1, 2, 3]),
            sqrt_det.clone(),
            "top component of (d theta^c)^n ^ theta ^ theta^c over 1/(1+s)^2",
        );
        ratio(
            "volume_over_inverse_fourth_power",
            top.component(&[0, 1, 2, 3]),
            Expr::one() / one_s.powi(4),
            "same component over 1/(1+s)^4",
        );
        out
    }

    /// Points with `|w|² = s_k` spread over `[0, (R − margin)²]`, angles and
    /// leaf coordinates drawn from the grid seed.
    pub fn radial_points(&self, count: usize) -> SampleGrid {
        let r = self.radius - self.grid.margin;
        let mut pts = Vec::with_capacity(count);
        // golden-angle spiral in w, Weyl sequences in x, y
        let golden = PI * (3.0 - 5f64.sqrt());
        for k in 0..count {
            let s = if count > 1 {
                r * r * k as f64 / (count - 1) as f64
            } else {
                0.0
            };
            let a = golden * k as f64;
            let rad = s.sqrt();
            let x = TAU * ((k as f64 * 0.618_033_988_749_894_9).fract());
            let y = TAU * ((k as f64 * 0.414_213_562_373_095_1).fract());
            pts.push(vec![rad * a.cos(), rad * a.sin(), x, y]);
        }
        SampleGrid::from_points(pts)
    }

    /// Compares the numerically assembled `det M_t` (from the components of
    /// `ω_t`) with [`det_oracle`], and `Pf(M_t)²` with `det M_t`.
    pub fn check_det_matches(&self, t_values: &[f64], points: &SampleGrid, tol: &Tolerances) -> Result<VerificationReport, DeformError> {
        let spec = self.deformation(t_values.to_vec(), tol.clone(), self.grid())?;
        let det_tol = tol.get_or("det_closed_form", 1e-7);
        let pf_tol = tol.get_or("pfaffian_square", 1e-9);
        let mut det_vals = Vec::new();
        let mut pf_vals = Vec::new();
        let mut pts = Vec::new();
        for &t in t_values {
            let d = deform(&spec, t, true)?;
            let m = skew_components(&d.omega_t);
            let program = Program::compile(&m);
            let rows = points.map(|p| -> Option<(f64, f64)> {
                let v = program.eval(p).ok()?;
                let mat = DMatrix::from_row_slice(4, 4, &v);
                let det = mat.determinant();
                let s = p[0] * p[0] + p[1] * p[1];
                let oracle = det_oracle(t, s);
                let pf = v[1] * v[11] - v[2] * v[7] + v[3] * v[6];
                Some((rel(det, oracle), rel(pf * pf, det)))
            });
            for (p, r) in points.points().iter().zip(rows) {
                let mut q = p.clone();
                q.push(t);
                pts.push(q);
                det_vals.push(r.map(|r| r.0));
                pf_vals.push(r.map(|r| r.1));
            }
        }
        let mut report = VerificationReport::new("det closed form", points);
        report.records.push(CheckRecord::from_values(
            "det_closed_form",
            "det M_t closed form",
            CheckKind::Residual,
            det_tol,
            &pts,
            &det_vals,
        ));
        report.records.push(CheckRecord::from_values(
            "pfaffian_square",
            "det M_t closed form",
            CheckKind::Residual,
            pf_tol,
            &pts,
            &pf_vals,
        ));
        report
            .diagnostics
            .push(Diagnostic::new("t_values", t_values.len() as f64, "number of t values"));
        Ok(report)
    }

    /// For each `t`: smallest eigenvalue and determinant of `g_t` in the
    /// coordinate frame and the largest relative deviation of `det M_t`
    /// from the oracle. Probes at `t = ±0.6` are logged as diagnostics.
    pub fn positivity_sweep(&self, t_values: &[f64], grid: &SampleGrid, tol: &Tolerances) -> Result<PositivitySweep, DeformError> {
        let spec = self.deformation(t_values.to_vec(), tol.clone(), grid.clone())?;
        let mut rows = Vec::new();
        let mut pts = Vec::new();
        let mut eig_vals = Vec::new();
        let mut det_vals = Vec::new();
        for &t in t_values {
            let (row, per_point) = sweep_row(&spec, t, grid)?;
            rows.push(row);
            for (p, v) in grid.points().iter().zip(per_point) {
                let mut q = p.clone();
                q.push(t);
                pts.push(q);
                eig_vals.push(v.map(|v| v.0));
                det_vals.push(v.map(|v| v.1));
            }
        }
        let mut report = VerificationReport::new("positivity sweep", grid);
        report.records.push(CheckRecord::from_values(
            "g_t_min_eigenvalue",
            "eigenvalue-positivity claim",
            CheckKind::LowerBound,
            f64::MIN_POSITIVE,
            &pts,
            &eig_vals,
        ));
        report.records.push(CheckRecord::from_values(
            "det_m_t_positive",
            "eigenvalue-positivity claim",
            CheckKind::LowerBound,
            f64::MIN_POSITIVE,
            &pts,
            &det_vals,
        ));
        for probe in [-0.6, 0.6] {
            let (row, _) = sweep_row(&spec, probe, grid)?;
            report.diagnostics.push(Diagnostic::new(
                &format!("probe_min_eigenvalue_{probe}"),
                row.min_eigenvalue,
                "outside the window; logged only",
            ));
            report.diagnostics.push(Diagnostic::new(
                &format!("probe_min_det_{probe}"),
                row.min_det,
                "outside the window; logged only",
            ));
        }
        Ok(PositivitySweep { rows, report })
    }
}

type PointValues = Vec<Option<(f64, f64, f64)>>;

fn sweep_row(spec: &DeformationSpec, t: f64, grid: &SampleGrid) -> Result<(PositivityRow, PointValues), DeformError> {
    let d = deform(spec, t, true)?;
    let mut exprs = d.g_t.comps().to_vec();
    exprs.extend(skew_components(&d.omega_t));
    let program = Program::compile(&exprs);
    let vals = grid.map(|p| -> Option<(f64, f64, f64)> {
        let v = program.eval(p).ok()?;
        let g = DMatrix::from_row_slice(4, 4, &v[..16]);
        let m = DMatrix::from_row_slice(4, 4, &v[16..]);
        let eig = SymmetricEigen::new(g).eigenvalues.min();
        let det = m.determinant();
        let s = p[0] * p[0] + p[1] * p[1];
        Some((eig, det, rel(det, det_oracle(t, s))))
    });
    let mut row = PositivityRow {
        t,
        min_eigenvalue: f64::INFINITY,
        min_det: f64::INFINITY,
        max_det_error: 0.0,
        admissible: d.certificate.all_pass(),
    };
    for v in vals.iter() {
        match v {
            Some((e, det, err)) => {
                row.min_eigenvalue = row.min_eigenvalue.min(*e);
                row.min_det = row.min_det.min(*det);
                row.max_det_error = row.max_det_error.max(*err);
            }
            None => {
                row.min_eigenvalue = f64::NAN;
            }
        }
    }
    Ok((row, vals))
}

/// Row-major `4×4` skew matrix of a 2-form.
fn skew_components(omega: &KForm) -> Vec<Expr> {
    let n = omega.dim();
    (0..n * n).map(|f| omega.component(&[f / n, f % n])).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn ratio_range(num: &Expr, den: &Expr, grid: &SampleGrid) -> (f64, f64) {
    let program = Program::compile(&[num.clone(), den.clone()]);
    let vals = par_map(grid.execution(), grid.points(), |p| {
        let v = program.eval(p).ok()?;
        (v[1].abs() > 1e-9).then(|| v[0] / v[1])
    });
    vals.into_iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_values() {
        assert_eq!(det_oracle(0.0, 0.0), 1.0);
        assert_eq!(det_oracle(0.0, 1.0), 1.0 / 16.0);
        assert_eq!(det_oracle(1.0, 0.0), 0.0);
    }

    #[test]
    fn f_is_bounded_and_basic() {
        let sc = HopfScenario::default();
        let f = sc.f();
        let grid = sc.grid();
        for p in grid.points() {
            let v = f.eval(p).unwrap();
            assert!((0.0..=0.5).contains(&v), "f = {v} at {p:?}");
        }
        assert!(!f.depends_on(2) && !f.depends_on(3));
    }

    #[test]
    fn metric_is_identity_at_origin() {
        let sc = HopfScenario::default();
        let grid = SampleGrid::from_points(vec![vec![0.0, 0.0, 1.0, 2.0]]);
        let s = sc.build(&sc.grid()).unwrap();
        let g = s.g().eval(&grid.points()[0]).unwrap();
        assert!((g - DMatrix::identity(4, 4)).abs().max() < 1e-15);
        let tc = s.theta_c();
        assert_eq!(tc.component(&[3]).eval(&grid.points()[0]).unwrap(), 1.0);
        assert_eq!(tc.component(&[0]).eval(&grid.points()[0]).unwrap(), 0.0);
    }
}
