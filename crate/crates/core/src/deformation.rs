//! Transverse deformations `(J_t, θ_t^c, ω_t, g_t)` of a Vaisman structure
//! and their admissibility certificates.
//!
//! The family is linear in `t`: `ζ_t = t ζ₁`, with `ζ₁` either an explicit
//! basic 1-form or `d^c φ` for a basic potential `φ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{checked_inverse, lie_derivative_metric, CalculusError};
use crate::chart::PointSample;
use crate::expr::{self, Expr, Program};
use crate::form::KForm;
use crate::grid::SampleGrid;
use crate::report::{CheckKind, Diagnostic, Tolerances, VerificationReport};
use crate::suite::{Skip, Suite};
use crate::tensor::{Endomorphism, MetricField, VectorField};
use crate::vaisman::{
    add_vaisman_checks, anti_lee, basic_residuals, d_c, metric_from_form_raw, VaismanStructure,
};

/// Smallest `|top form| / sqrt(det g)` accepted as non-degenerate.
pub const VOLUME_FLOOR: f64 = 1e-9;
/// Residual below which a generator counts as basic or of type (1,1).
pub const CERTIFICATE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Error)]
pub enum DeformError {
    #[error("generator is not basic (residual {0:e})")]
    NotBasic(f64),
    #[error("parameter t = {0} is not finite")]
    NonFiniteT(f64),
    #[error("generator must be a 1-form, got degree {0}")]
    Degree(usize),
    #[error("t = {t} is not admissible: failing {failing:?} (use force to continue)")]
    Admissibility { t: f64, failing: Vec<String> },
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Source(#[from] crate::vaisman::VaismanError),
}

#[derive(Debug, Clone)]
pub enum Generator {
    /// `ζ₁ = d^c φ` for a basic function `φ`.
    Potential(Expr),
    /// `ζ₁` given directly.
    Form(KForm),
}

#[derive(Debug, Clone)]
pub struct DeformationSpec {
    source: VaismanStructure,
    generator: Generator,
    zeta_1: KForm,
    t_values: Vec<f64>,
    tolerances: Tolerances,
    grid: SampleGrid,
}

impl DeformationSpec {
    /// Validates that the generator is basic and every `t` is finite. `0` is
    /// added to `t_values` when missing.
    pub fn new(
        source: VaismanStructure,
        generator: Generator,
        t_values: Vec<f64>,
        tolerances: Tolerances,
        grid: SampleGrid,
    ) -> Result<Self, DeformError> {
        let spec = DeformationSpec::new_unchecked(source, generator, t_values, tolerances, grid)?;
        let r = spec.generator_basic_residual();
        if !(r <= CERTIFICATE_TOLERANCE) {
            return Err(DeformError::NotBasic(r));
        }
        Ok(spec)
    }

    /// Like [`DeformationSpec::new`] but accepts non-basic generators, which
    /// are then reported by the certificate.
    pub fn new_unchecked(
        source: VaismanStructure,
        generator: Generator,
        mut t_values: Vec<f64>,
        tolerances: Tolerances,
        grid: SampleGrid,
    ) -> Result<Self, DeformError> {
        if let Some(&t) = t_values.iter().find(|t| !t.is_finite()) {
            return Err(DeformError::NonFiniteT(t));
        }
        if !t_values.contains(&0.0) {
            t_values.insert(0, 0.0);
        }
        let zeta_1 = match &generator {
            Generator::Potential(phi) => d_c(phi, source.j()),
            Generator::Form(z) => {
                if z.degree() != 1 {
                    return Err(DeformError::Degree(z.degree()));
                }
                z.clone()
            }
        };
        Ok(DeformationSpec {
            source,
            generator,
            zeta_1,
            t_values,
            tolerances,
            grid,
        })
    }

    pub fn source(&self) -> &VaismanStructure {
        &self.source
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// `ζ₁`, so that `ζ_t = t ζ₁`.
    pub fn zeta_1(&self) -> &KForm {
        &self.zeta_1
    }

    pub fn t_values(&self) -> &[f64] {
        &self.t_values
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    fn generator_basic_residual(&self) -> f64 {
        let s = &self.source;
        let form = match &self.generator {
            Generator::Potential(phi) => KForm::scalar(s.chart().dim(), phi.clone()),
            Generator::Form(z) => z.clone(),
        };
        max_record(&basic_residuals(&form, s.u(), s.v()), &self.grid)
    }
}

fn max_record(exprs: &[Expr], grid: &SampleGrid) -> f64 {
    let mut suite = Suite::new();
    suite.residual("r", "basic forms and basic de Rham derivative", 0.0, exprs.to_vec());
    suite.run(grid)[0].max_residual
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagEntry {
    pub pass: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound1Entry {
    pub sup_zeta: f64,
    pub sup_dzeta: f64,
    pub threshold: f64,
    pub pass: bool,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuEntry {
    pub min: f64,
    pub pass: bool,
    pub worst_point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeEntry {
    /// Smallest `|component|` of the top form.
    pub min_abs: f64,
    /// Smallest `|component| / sqrt(det g)`.
    pub min_normalized: f64,
    pub sign_consistent: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityCertificate {
    pub t: f64,
    pub n: usize,
    pub is_basic: FlagEntry,
    pub is_11: FlagEntry,
    pub bound1: Bound1Entry,
    pub mu_min: MuEntry,
    pub volume_nondegenerate: VolumeEntry,
    pub skipped_points: usize,
}

impl AdmissibilityCertificate {
    pub fn failing(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.is_basic.pass {
            out.push("is_basic".to_string());
        }
        if !self.is_11.pass {
            out.push("is_11".to_string());
        }
        if !self.bound1.pass {
            out.push("bound1".to_string());
        }
        if !self.mu_min.pass {
            out.push("mu_min".to_string());
        }
        if !self.volume_nondegenerate.pass {
            out.push("volume_nondegenerate".to_string());
        }
        out
    }

    pub fn all_pass(&self) -> bool {
        self.failing().is_empty()
    }
}

/// `1 / ((2^{n+1} − 1) n^{(n−1)/2})`.
pub fn bound1_threshold(n: usize) -> f64 {
    assert!(n >= 1, "n must be at least 1");
    let terms = (1u64 << (n + 1)) - 1;
    let nf = n as f64;
    1.0 / (terms as f64 * nf.powf((nf - 1.0) / 2.0))
}

/// `d^c φ` for a basic function.
pub fn d_c_basic(phi: &Expr, s: &VaismanStructure, grid: &SampleGrid) -> Result<KForm, DeformError> {
    let f = KForm::scalar(s.chart().dim(), phi.clone());
    let r = max_record(&basic_residuals(&f, s.u(), s.v()), grid);
    if !(r <= CERTIFICATE_TOLERANCE) {
        return Err(DeformError::NotBasic(r));
    }
    Ok(d_c(phi, s.j()))
}

/// `β(JX, JY) − β(X, Y)` on coordinate pairs.
pub fn type_11_residuals(beta: &KForm, j: &Endomorphism) -> Vec<Expr> {
    beta.pullback_endo2(j).sub(beta).dense_increasing()
}

pub fn type_11_check(beta: &KForm, j: &Endomorphism, grid: &SampleGrid, tolerance: f64) -> VerificationReport {
    let mut suite = Suite::new();
    suite.residual(
        "type_11",
        "integrability",
        tolerance,
        type_11_residuals(beta, j),
    );
    let mut r = VerificationReport::new("type (1,1)", grid);
    r.records = suite.run(grid);
    r
}

fn dense2(beta: &KForm) -> Vec<Expr> {
    let n = beta.dim();
    (0..n * n).map(|f| beta.component(&[f / n, f % n])).collect()
}

/// `|α|²_g = α g⁻¹ α`.
fn covector_norm(ginv: &DMatrix<f64>, a: &[f64]) -> f64 {
    let v = DVector::from_column_slice(a);
    (v.transpose() * ginv * &v)[(0, 0)].max(0.0).sqrt()
}

/// `|β|²_g = ½ β_ij β_kl g^ik g^jl`.
fn two_form_norm(ginv: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let raised = ginv * b * ginv;
    (0.5 * b.component_mul(&raised).sum()).max(0.0).sqrt()
}

/// Smallest eigenvalue of `Q(v, w) = ½(β(Jv, w) + β(Jw, v))` relative to `g`.
fn mu_from_values(g: &DMatrix<f64>, j: &DMatrix<f64>, beta: &DMatrix<f64>) -> Option<f64> {
    // (Jᵀ β)_ab = β(J∂a, ∂b)
    let t = j.transpose() * beta;
    let q = (&t + t.transpose()) * 0.5;
    let chol = g.clone().cholesky()?;
    let l = chol.l();
    let linv = l.solve_lower_triangular(&DMatrix::identity(g.nrows(), g.nrows()))?;
    let c = &linv * q * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Some(SymmetricEigen::new(c).eigenvalues.min())
}

/// `μ_x = min over g-unit v of dζ(Jv, v)`, solved as a generalized
/// symmetric eigenproblem.
pub fn mu_min(
    dzeta: &KForm,
    j: &Endomorphism,
    g: &MetricField,
    p: &PointSample,
) -> Result<f64, CalculusError> {
    let n = g.dim();
    let mut exprs = g.comps().to_vec();
    exprs.extend_from_slice(j.comps());
    exprs.extend(dense2(dzeta));
    let v = Program::compile(&exprs).eval(p.coords())?;
    let gm = DMatrix::from_row_slice(n, n, &v[..n * n]);
    let jm = DMatrix::from_row_slice(n, n, &v[n * n..2 * n * n]);
    let bm = DMatrix::from_row_slice(n, n, &v[2 * n * n..]);
    mu_from_values(&gm, &jm, &bm).ok_or_else(|| CalculusError::SingularMetric {
        point: p.coords().to_vec(),
        condition: f64::INFINITY,
    })
}

/// Grid maxima of `|ζ|_g` and `|dζ|_g` against the threshold for `n`.
pub fn check_bound1(zeta: &KForm, dzeta: &KForm, g: &MetricField, grid: &SampleGrid) -> Bound1Entry {
    let n = g.dim();
    let mut exprs = g.comps().to_vec();
    exprs.extend(zeta.covector());
    exprs.extend(dense2(dzeta));
    let program = Program::compile(&exprs);
    let vals = grid.map(|p| -> Option<(f64, f64)> {
        let v = program.eval(p).ok()?;
        let gm = DMatrix::from_row_slice(n, n, &v[..n * n]);
        let ginv = checked_inverse(&gm, p).ok()?;
        let z = &v[n * n..n * n + n];
        let b = DMatrix::from_row_slice(n, n, &v[n * n + n..]);
        Some((covector_norm(&ginv, z), two_form_norm(&ginv, &b)))
    });
    let (mut sz, mut sd) = (0.0f64, 0.0f64);
    for (a, b) in vals.into_iter().flatten() {
        sz = sz.max(a);
        sd = sd.max(b);
    }
    let threshold = bound1_threshold(n / 2 - 1);
    Bound1Entry {
        sup_zeta: sz,
        sup_dzeta: sd,
        threshold,
        pass: sz < threshold && sd < threshold,
        grid_points: grid.len(),
    }
}

/// `(dθ_t^c)^n ∧ θ ∧ θ_t^c`.
pub fn volume_form(theta: &KForm, theta_c_t: &KForm) -> KForm {
    let dim = theta.dim();
    let n = dim / 2 - 1;
    let d = theta_c_t.d();
    let mut top = KForm::scalar(dim, Expr::one());
    for _ in 0..n {
        top = top.wedge(&d).expect("degree fits");
    }
    top.wedge(theta)
        .and_then(|t| t.wedge(theta_c_t))
        .expect("degree fits")
}

/// Evaluates the single component of the top form, normalized by the
/// Riemannian volume of `g`, and requires it to keep one sign and stay above
/// [`VOLUME_FLOOR`].
pub fn volume_form_check(deformed: &DeformedStructure, g: &MetricField, grid: &SampleGrid) -> VolumeEntry {
    volume_entry(&deformed.theta, &deformed.theta_c_t, g, grid)
}

fn volume_entry(theta: &KForm, theta_c_t: &KForm, g: &MetricField, grid: &SampleGrid) -> VolumeEntry {
    let dim = g.dim();
    let top = volume_form(theta, theta_c_t);
    let idx: Vec<usize> = (0..dim).collect();
    let mut exprs = vec![top.component(&idx)];
    exprs.extend_from_slice(g.comps());
    let program = Program::compile(&exprs);
    let vals = grid.map(|p| -> Option<(f64, f64)> {
        let v = program.eval(p).ok()?;
        let gm = DMatrix::from_row_slice(dim, dim, &v[1..]);
        let det = gm.determinant();
        if !(det > 0.0) {
            return None;
        }
        Some((v[0], v[0] / det.sqrt()))
    });
    let mut min_abs = f64::INFINITY;
    let mut min_norm = f64::INFINITY;
    let mut signs = (false, false);
    let mut missing = false;
    for v in vals {
        match v {
            Some((raw, nrm)) => {
                min_abs = min_abs.min(raw.abs());
                min_norm = min_norm.min(nrm.abs());
                if raw > 0.0 {
                    signs.0 = true;
                } else if raw < 0.0 {
                    signs.1 = true;
                }
            }
            None => missing = true,
        }
    }
    let sign_consistent = !(signs.0 && signs.1);
    VolumeEntry {
        min_abs,
        min_normalized: min_norm,
        sign_consistent,
        pass: !missing && sign_consistent && min_norm > VOLUME_FLOOR,
    }
}

/// Evaluates every certificate entry for `ζ_t`.
pub fn certify(spec: &DeformationSpec, t: f64, zeta_t: &KForm) -> AdmissibilityCertificate {
    let s = &spec.source;
    let grid = &spec.grid;
    let n = s.chart().n();
    let dzeta = zeta_t.d();
    let theta_c_t = s.theta_c().add(zeta_t);

    let mut suite = Suite::new();
    let mut basic = basic_residuals(zeta_t, s.u(), s.v());
    basic.extend(basic_residuals(&dzeta, s.u(), s.v()));
    suite.residual("basic", "basic forms and basic de Rham derivative", CERTIFICATE_TOLERANCE, basic);
    suite.residual("type_11", "integrability", CERTIFICATE_TOLERANCE, type_11_residuals(&dzeta, s.j()));
    let dim = s.chart().dim();
    let gs = suite.slot(s.g().comps().iter().cloned());
    let js = suite.slot(s.j().comps().iter().cloned());
    let bs = suite.slot(dense2(&dzeta));
    suite.custom("mu", "positivity condition μ", CheckKind::LowerBound, -1.0, move |_, v| {
        let gm = DMatrix::from_row_slice(dim, dim, &v[gs.clone()]);
        let jm = DMatrix::from_row_slice(dim, dim, &v[js.clone()]);
        let bm = DMatrix::from_row_slice(dim, dim, &v[bs.clone()]);
        mu_from_values(&gm, &jm, &bm).ok_or(Skip::SingularMetric)
    });
    let recs = suite.run(grid);
    let skipped = recs.iter().map(|r| r.skipped).max().unwrap_or(0);
    let mu = &recs[2];
    AdmissibilityCertificate {
        t,
        n,
        is_basic: FlagEntry {
            pass: recs[0].pass,
            residual: recs[0].max_residual,
        },
        is_11: FlagEntry {
            pass: recs[1].pass,
            residual: recs[1].max_residual,
        },
        bound1: check_bound1(zeta_t, &dzeta, s.g(), grid),
        mu_min: MuEntry {
            min: -mu.max_residual,
            // strict: μ > −1
            pass: -mu.max_residual > -1.0,
            worst_point: mu.worst_point.clone(),
        },
        volume_nondegenerate: volume_entry(s.theta(), &theta_c_t, s.g(), grid),
        skipped_points: skipped,
    }
}

#[derive(Debug, Clone)]
pub struct DeformedStructure {
    pub t: f64,
    pub zeta_t: KForm,
    pub j_t: Endomorphism,
    pub theta: KForm,
    pub theta_c_t: KForm,
    pub omega_t: KForm,
    pub g_t: MetricField,
    /// `T_ab − T_ba` of the closed-form metric before symmetrization.
    pub g_t_asymmetry: Vec<Expr>,
    pub certificate: AdmissibilityCertificate,
}

impl DeformedStructure {
    /// `(J_t, g_t, θ)` as a structure for the Vaisman checks.
    pub fn structure(&self, source: &VaismanStructure) -> VaismanStructure {
        VaismanStructure::new(
            source.chart().clone(),
            self.j_t.clone(),
            self.g_t.clone(),
            self.theta.clone(),
        )
    }
}

fn outer_sym(a: &KForm, b: &KForm) -> Vec<Expr> {
    let (x, y) = (a.covector(), b.covector());
    let n = x.len();
    (0..n * n).map(|f| &x[f / n] * &y[f % n]).collect()
}

fn add_all(parts: &[Vec<Expr>]) -> Vec<Expr> {
    let n = parts[0].len();
    (0..n).map(|i| expr::sum(parts.iter().map(|p| p[i].clone()))).collect()
}

/// `g + dζ∘(J⊗Id) + ζ⊗θ^c + θ^c⊗ζ + ζ⊗ζ`, unsymmetrized.
pub fn closed_form_metric_raw(s: &VaismanStructure, zeta_t: &KForm) -> Vec<Expr> {
    let tc = s.theta_c();
    add_all(&[
        s.g().comps().to_vec(),
        metric_from_form_raw(&zeta_t.d(), s.j()),
        outer_sym(zeta_t, tc),
        outer_sym(tc, zeta_t),
        outer_sym(zeta_t, zeta_t),
    ])
}

/// `g + t(dd^cφ∘(J⊗Id) + d^cφ⊗θ^c + θ^c⊗d^cφ) + t² d^cφ⊗d^cφ`.
pub fn potential_metric_raw(s: &VaismanStructure, phi: &Expr, t: f64) -> Vec<Expr> {
    let dcphi = d_c(phi, s.j());
    let tc = s.theta_c();
    let linear = add_all(&[
        metric_from_form_raw(&dcphi.d(), s.j()),
        outer_sym(&dcphi, tc),
        outer_sym(tc, &dcphi),
    ]);
    let quad = outer_sym(&dcphi, &dcphi);
    let g = s.g().comps();
    (0..g.len())
        .map(|i| expr::sum([g[i].clone(), linear[i].scale(t), quad[i].scale(t * t)]))
        .collect()
}

/// Builds the deformed structure at `t`. Inadmissible parameters are refused
/// unless `force` is set; the certificate records the failures either way.
pub fn deform(spec: &DeformationSpec, t: f64, force: bool) -> Result<DeformedStructure, DeformError> {
    if !t.is_finite() {
        return Err(DeformError::NonFiniteT(t));
    }
    let s = &spec.source;
    let dim = s.chart().dim();
    let zeta_t = spec.zeta_1.scale(t);
    let certificate = certify(spec, t, &zeta_t);
    if !force && !certificate.all_pass() {
        return Err(DeformError::Admissibility {
            t,
            failing: certificate.failing(),
        });
    }
    let j_t = s
        .j()
        .sub(&Endomorphism::outer(s.u(), &zeta_t))
        .sub(&Endomorphism::outer(s.v(), &zeta_t.compose_endo(s.j())));
    let theta_c_t = s.theta_c().add(&zeta_t);
    let theta = s.theta().clone();
    let omega_t = theta_c_t.d().sub(&theta.wedge(&theta_c_t).expect("degree fits"));
    let (g_t, g_t_asymmetry) = MetricField::symmetrized(dim, &closed_form_metric_raw(s, &zeta_t));
    Ok(DeformedStructure {
        t,
        zeta_t,
        j_t,
        theta,
        theta_c_t,
        omega_t,
        g_t,
        g_t_asymmetry,
        certificate,
    })
}

fn unit_norm_check(suite: &mut Suite, g: &MetricField, forms: &[&KForm], tol: f64) {
    let n = g.dim();
    let gs = suite.slot(g.comps().iter().cloned());
    let fs = suite.slot(forms.iter().flat_map(|f| f.covector()));
    let count = forms.len();
    suite.custom("unit_norms", "unit norms", CheckKind::Residual, tol, move |p, v| {
        let gm = DMatrix::from_row_slice(n, n, &v[gs.clone()]);
        let ginv = checked_inverse(&gm, p).map_err(|_| Skip::SingularMetric)?;
        let mut worst: f64 = 0.0;
        for k in 0..count {
            let a = &v[fs.start + k * n..fs.start + (k + 1) * n];
            worst = worst.max((covector_norm(&ginv, a) - 1.0).abs());
        }
        Ok(worst)
    });
}

/// Full Vaisman suite on `(J_t, g_t, θ)` plus the deformation-specific
/// identities.
pub fn verify_theorem(spec: &DeformationSpec, t: f64, force: bool) -> Result<VerificationReport, DeformError> {
    let d = deform(spec, t, force)?;
    Ok(verify_deformed(spec, &d))
}

pub fn verify_deformed(spec: &DeformationSpec, d: &DeformedStructure) -> VerificationReport {
    let s = &spec.source;
    let tol = &spec.tolerances;
    let st = d.structure(s);
    let n = s.chart().dim();
    let mut suite = Suite::new();
    add_vaisman_checks(&mut suite, &st, tol);

    let sq = d.j_t.compose(&d.j_t).add(&Endomorphism::identity(n));
    suite.residual(
        "j_t_squared",
        "J_t² = −Id claim",
        tol.get_or("j_t_squared", 1e-10),
        sq.comps().to_vec(),
    );
    suite.residual(
        "omega_t_type_11",
        "ω_t type-(1,1) claim",
        tol.get_or("omega_t_type_11", 1e-9),
        type_11_residuals(&d.omega_t, &d.j_t),
    );
    let lcs = d.omega_t.d().sub(&d.theta.wedge(&d.omega_t).expect("degree fits"));
    suite.residual(
        "omega_t_lcs",
        "LCS property",
        tol.get_or("omega_t_lcs", 1e-9),
        lcs.dense_increasing(),
    );
    suite.residual(
        "u_killing",
        "U-Killing",
        tol.get_or("u_killing", 1e-9),
        lie_derivative_metric(s.u(), &d.g_t).comps().to_vec(),
    );
    unit_norm_check(
        &mut suite,
        &d.g_t,
        &[&d.theta, &d.theta_c_t],
        tol.get_or("unit_norms", 1e-9),
    );

    let mut duality = d.g_t.flat(s.u()).sub(&d.theta).covector();
    duality.extend(d.g_t.flat(s.v()).sub(&d.theta_c_t).covector());
    suite.residual(
        "lee_duality",
        "canonical foliation",
        tol.get_or("lee_duality", 1e-9),
        duality,
    );
    let leaf: [&VectorField; 2] = [s.u(), s.v()];
    let mut leaf_res = Vec::new();
    for x in leaf {
        for y in leaf {
            let expect = &(&d.theta.apply(&[x]) * &d.theta.apply(&[y]))
                + &(&d.theta_c_t.apply(&[x]) * &d.theta_c_t.apply(&[y]));
            leaf_res.push(expr::sub(&d.g_t.apply(x, y), &expect));
        }
    }
    suite.residual(
        "leaf_metric",
        "canonical foliation",
        tol.get_or("leaf_metric", 1e-9),
        leaf_res,
    );
    suite.residual(
        "anti_lee_deformed",
        "complete deformation method",
        tol.get_or("anti_lee_deformed", 1e-10),
        anti_lee(&d.j_t, &d.theta).sub(&d.theta_c_t).covector(),
    );

    // independent routes to g_t
    let closed = d.g_t.comps();
    let via_form = metric_from_form_raw(&d.omega_t, &d.j_t);
    let mut routes: Vec<Expr> = closed.iter().zip(&via_form).map(|(a, b)| a - b).collect();
    if let Generator::Potential(phi) = &spec.generator {
        let direct = potential_metric_raw(s, phi, d.t);
        routes.extend(closed.iter().zip(&direct).map(|(a, b)| a - b));
    }
    suite.residual(
        "metric_routes",
        "complete deformation method",
        tol.get_or("metric_routes", 1e-9),
        routes,
    );
    suite.residual(
        "metric_symmetry",
        "complete deformation method",
        tol.get_or("metric_symmetry", 1e-9),
        d.g_t_asymmetry.clone(),
    );
    if let Generator::Potential(phi) = &spec.generator {
        suite.residual(
            "dc_invariance",
            "basic forms and basic de Rham derivative",
            tol.get_or("dc_invariance", 1e-11),
            d_c(phi, s.j()).sub(&d_c(phi, &d.j_t)).covector(),
        );
    }
    let mut basic = basic_residuals(&d.zeta_t, s.u(), s.v());
    basic.extend(basic_residuals(&d.zeta_t.d(), s.u(), s.v()));
    basic.extend(basic_residuals(&d.theta_c_t.sub(s.theta_c()), s.u(), s.v()));
    suite.residual(
        "deformed_basic",
        "basic forms and basic de Rham derivative",
        tol.get_or("deformed_basic", 1e-10),
        basic,
    );

    let mut report = VerificationReport::new("deformation", &spec.grid);
    report.records = suite.run(&spec.grid);
    report
        .diagnostics
        .push(Diagnostic::new("t", d.t, "deformation parameter"));
    report.certificate = Some(d.certificate.clone());
    report
}

/// `max(1, K·max(sup|ζ|, sup|dζ|), |μ|)` with `K = 1/threshold`; every
/// `c` strictly above it makes `ζ/c` pass both bounds.
pub fn rescaling_bound(bound: &Bound1Entry, mu: f64) -> f64 {
    let k = 1.0 / bound.threshold;
    1f64.max(k * bound.sup_zeta.max(bound.sup_dzeta)).max(mu.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert_eq!(bound1_threshold(1), 1.0 / 3.0);
        assert!((bound1_threshold(2) - 1.0 / (7.0 * 2f64.sqrt())).abs() < 1e-16);
    }

    #[test]
    fn norms_and_mu() {
        let g = DMatrix::<f64>::identity(4, 4) * 4.0;
        let ginv = g.clone().try_inverse().unwrap();
        assert!((covector_norm(&ginv, &[1.0, 0.0, 0.0, 0.0]) - 0.5).abs() < 1e-15);
        let mut b = DMatrix::zeros(4, 4);
        b[(0, 1)] = 1.0;
        b[(1, 0)] = -1.0;
        assert!((two_form_norm(&ginv, &b) - 0.25).abs() < 1e-15);
        let mut j = DMatrix::zeros(4, 4);
        j[(1, 0)] = 1.0;
        j[(0, 1)] = -1.0;
        j[(3, 2)] = 1.0;
        j[(2, 3)] = -1.0;
        // Q(∂u, ∂u) = β(∂v, ∂u) = −1, relative to 4·Id
        let mu = mu_from_values(&g, &j, &b).unwrap();
        assert!((mu + 0.25).abs() < 1e-15);
        let mu2 = mu_from_values(&g, &j, &(b * 3.0)).unwrap();
        assert!((mu2 - 3.0 * mu).abs() < 1e-15);
        assert_eq!(mu_from_values(&g, &j, &DMatrix::zeros(4, 4)).unwrap(), 0.0);
    }
}
