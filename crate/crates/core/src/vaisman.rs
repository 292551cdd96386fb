//! Vaisman structures on a foliated chart and their verification.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::calculus::{
    checked_inverse, lie_bracket, lie_derivative_endo, lie_derivative_form, lie_derivative_metric,
    nabla_oneform_values, nabla_vector_values, oneform_jet_exprs, unpack_oneform_jet,
    Christoffel,
};
use crate::chart::ChartSpec;
use crate::complex::{ComplexExpr, ComplexVectorField};
use crate::expr::{self, EvalError, Expr, Program};
use crate::form::KForm;
use crate::grid::SampleGrid;
use crate::report::{CheckKind, Tolerances, VerificationReport};
use crate::suite::{Skip, Suite};
use crate::tensor::{Endomorphism, MetricField, VectorField};

/// Names of the ten defining checks, in report order.
pub const VAISMAN_CHECKS: [&str; 10] = [
    "lcs_structure",
    "lee_parallel",
    "lee_closed",
    "hermitian",
    "nijenhuis",
    "lee_unit_norm",
    "structure_equation",
    "lee_fields_killing",
    "lee_fields_commute",
    "lee_fields_geodesic",
];

/// Default tolerance for the frame pairing and rotation records.
pub const FRAME_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Error)]
pub enum VaismanError {
    #[error("potential depends on leaf coordinate `{0}`")]
    NotBasic(String),
    #[error("transverse Hessian is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    Positivity { point: Vec<f64>, min_eigenvalue: f64 },
    #[error("transverse Hessian cannot be evaluated: {0}")]
    Eval(#[from] EvalError),
    #[error("sampling grid is empty")]
    EmptyGrid,
}

#[derive(Debug, Clone)]
pub struct VaismanStructure {
    chart: ChartSpec,
    j: Endomorphism,
    g: MetricField,
    theta: KForm,
    theta_c: KForm,
    u: VectorField,
    v: VectorField,
    omega: KForm,
}

impl VaismanStructure {
    /// Assembles a candidate structure. The Lee fields are the leaf
    /// coordinate fields of the chart.
    pub fn new(chart: ChartSpec, j: Endomorphism, g: MetricField, theta: KForm) -> Self {
        let dim = chart.dim();
        let [x, y] = chart.leaf();
        let theta_c = anti_lee(&j, &theta);
        let omega = fundamental_form(&g, &j);
        VaismanStructure {
            u: VectorField::coordinate(dim, x),
            v: VectorField::coordinate(dim, y),
            chart,
            j,
            g,
            theta,
            theta_c,
            omega,
        }
    }

    pub fn chart(&self) -> &ChartSpec {
        &self.chart
    }

    pub fn j(&self) -> &Endomorphism {
        &self.j
    }

    pub fn g(&self) -> &MetricField {
        &self.g
    }

    pub fn theta(&self) -> &KForm {
        &self.theta
    }

    pub fn theta_c(&self) -> &KForm {
        &self.theta_c
    }

    pub fn u(&self) -> &VectorField {
        &self.u
    }

    pub fn v(&self) -> &VectorField {
        &self.v
    }

    pub fn omega(&self) -> &KForm {
        &self.omega
    }

    pub fn with_metric(&self, g: MetricField) -> Self {
        VaismanStructure::new(self.chart.clone(), self.j.clone(), g, self.theta.clone())
    }

    pub fn with_complex_structure(&self, j: Endomorphism) -> Self {
        VaismanStructure::new(self.chart.clone(), j, self.g.clone(), self.theta.clone())
    }

    pub fn with_lee_form(&self, theta: KForm) -> Self {
        VaismanStructure::new(self.chart.clone(), self.j.clone(), self.g.clone(), theta)
    }
}

/// The constant structure `∂u ↦ ∂v`, `∂v ↦ -∂u` on every pair, `∂x ↦ ∂y`.
pub fn standard_complex_structure(chart: &ChartSpec) -> Endomorphism {
    let dim = chart.dim();
    let mut pairs = chart.complex_pairs();
    let [x, y] = chart.leaf();
    pairs.push((x, y));
    Endomorphism::from_fn(dim, |i, j| {
        for &(a, b) in &pairs {
            if i == b && j == a {
                return Expr::one();
            }
            if i == a && j == b {
                return Expr::constant(-1.0);
            }
        }
        Expr::zero()
    })
}

/// `θ^c = -θ∘J`.
pub fn anti_lee(j: &Endomorphism, theta: &KForm) -> KForm {
    theta.compose_endo(j).neg()
}

/// `ω(X, Y) = g(X, JY)`, read off from the components with `a < b`.
pub fn fundamental_form(g: &MetricField, j: &Endomorphism) -> KForm {
    let n = g.dim();
    let mut entries = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            entries.push((vec![a, b], g.apply(&VectorField::coordinate(n, a), &j.column(b))));
        }
    }
    KForm::from_entries(n, 2, entries)
}

/// `(d^c φ)(v) = -dφ(Jv)`.
pub fn d_c(phi: &Expr, j: &Endomorphism) -> KForm {
    let n = j.dim();
    KForm::scalar(n, phi.clone()).d().compose_endo(j).neg()
}

/// `g(X, Y) = ω(JX, Y)` for a 2-form, before symmetrization.
pub(crate) fn metric_from_form_raw(omega: &KForm, j: &Endomorphism) -> Vec<Expr> {
    let n = omega.dim();
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            out.push(expr::sum((0..n).filter_map(|i| {
                let c = omega.component(&[i, b]);
                if c.is_zero() || j.get(i, a).is_zero() {
                    None
                } else {
                    Some(j.get(i, a) * &c)
                }
            })));
        }
    }
    out
}

/// Components of the Nijenhuis tensor on coordinate pairs `a < b`.
pub fn nijenhuis_residuals(j: &Endomorphism) -> Vec<Expr> {
    let n = j.dim();
    let cols: Vec<VectorField> = (0..n).map(|a| j.column(a)).collect();
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let ea = VectorField::coordinate(n, a);
            let eb = VectorField::coordinate(n, b);
            let t1 = j.apply(&lie_bracket(&cols[a], &eb));
            let t2 = j.apply(&lie_bracket(&ea, &cols[b]));
            let t3 = lie_bracket(&cols[a], &cols[b]);
            // [∂a, ∂b] = 0, so the J² term drops out
            out.extend(t3.sub(&t1).sub(&t2).comps().iter().cloned());
        }
    }
    out
}

pub fn check_integrability(j: &Endomorphism, grid: &SampleGrid, tolerance: f64) -> VerificationReport {
    let mut suite = Suite::new();
    suite.residual("nijenhuis", "integrability", tolerance, nijenhuis_residuals(j));
    let mut report = VerificationReport::new("integrability", grid);
    report.records = suite.run(grid);
    report
}

fn components(k: &KForm) -> Vec<Expr> {
    k.dense_increasing()
}

fn endo_components(e: &Endomorphism) -> Vec<Expr> {
    e.comps().to_vec()
}

/// Adds the ten defining checks plus the frame records to `suite`.
pub(crate) fn add_vaisman_checks(suite: &mut Suite, s: &VaismanStructure, tol: &Tolerances) {
    let n = s.chart.dim();
    let g = &s.g;
    let j = &s.j;
    let theta = &s.theta;

    let jet = suite.slot(g.jet_exprs());
    let th = suite.slot(oneform_jet_exprs(theta));
    let lee = suite.slot(s.u.comps().iter().chain(s.v.comps()).cloned());
    // X(Y^k) for (X, Y) in (U,U), (V,U), (U,V), (V,V)
    let pairs = [(&s.u, &s.u), (&s.v, &s.u), (&s.u, &s.v), (&s.v, &s.v)];
    let derivs = suite.slot(
        pairs
            .iter()
            .flat_map(|(x, y)| (0..n).map(move |k| x.apply(y.comp(k)))),
    );

    let omega = &s.omega;
    let d_omega = omega.d();
    let theta_omega = theta.wedge(omega).expect("degree fits");
    suite.residual(
        "lcs_structure",
        "LCS property",
        tol.get("lcs_structure"),
        components(&d_omega.sub(&theta_omega)),
    );

    {
        let (jet, th) = (jet.clone(), th.clone());
        suite.custom(
            "lee_parallel",
            "Lee-field parallelism",
            CheckKind::Residual,
            tol.get("lee_parallel"),
            move |p, v| {
                let mj = MetricField::unpack_jet(n, &v[jet.clone()]);
                let gamma = Christoffel::from_jet(&mj, p).map_err(|_| Skip::SingularMetric)?;
                let (t, dt) = unpack_oneform_jet(n, &v[th.clone()]);
                let m = nabla_oneform_values(&gamma, &t, &dt);
                Ok(crate::suite::max_abs(m.as_slice()))
            },
        );
    }

    suite.residual(
        "lee_closed",
        "LCS property",
        tol.get("lee_closed"),
        components(&theta.d()),
    );

    let mut herm = Vec::new();
    for a in 0..n {
        for b in a..n {
            herm.push(expr::sub(&g.apply(&j.column(a), &j.column(b)), g.get(a, b)));
        }
    }
    suite.residual(
        "hermitian",
        "potential-based complex structure",
        tol.get("hermitian"),
        herm,
    );

    suite.residual(
        "nijenhuis",
        "integrability",
        tol.get("nijenhuis"),
        nijenhuis_residuals(j),
    );

    {
        let (jet, th) = (jet.clone(), th.clone());
        suite.custom(
            "lee_unit_norm",
            "unit norms",
            CheckKind::Residual,
            tol.get("lee_unit_norm"),
            move |p, v| {
                let gm = DMatrix::from_row_slice(n, n, &v[jet.start..jet.start + n * n]);
                let ginv = checked_inverse(&gm, p).map_err(|_| Skip::SingularMetric)?;
                let t = nalgebra::DVector::from_column_slice(&v[th.start..th.start + n]);
                let norm2 = (t.transpose() * &ginv * &t)[(0, 0)];
                Ok((norm2.max(0.0).sqrt() - 1.0).abs())
            },
        );
    }

    let structure = s.theta_c.d().sub(&theta.wedge(&s.theta_c).expect("degree fits"));
    suite.residual(
        "structure_equation",
        "structure equation",
        tol.get("structure_equation"),
        components(&omega.sub(&structure)),
    );

    let mut killing = Vec::new();
    for x in [&s.u, &s.v] {
        killing.extend(lie_derivative_metric(x, g).comps().iter().cloned());
        killing.extend(endo_components(&lie_derivative_endo(x, j)));
    }
    suite.residual(
        "lee_fields_killing",
        "Killing/holomorphy properties",
        tol.get("lee_fields_killing"),
        killing,
    );

    suite.residual(
        "lee_fields_commute",
        "canonical foliation",
        tol.get("lee_fields_commute"),
        lie_bracket(&s.u, &s.v).comps().to_vec(),
    );

    {
        let jet = jet.clone();
        suite.custom(
            "lee_fields_geodesic",
            "Lee-field parallelism",
            CheckKind::Residual,
            tol.get("lee_fields_geodesic"),
            move |p, v| {
                let mj = MetricField::unpack_jet(n, &v[jet.clone()]);
                let gamma = Christoffel::from_jet(&mj, p).map_err(|_| Skip::SingularMetric)?;
                let u = &v[lee.start..lee.start + n];
                let w = &v[lee.start + n..lee.end];
                let fields = [(u, u), (w, u), (u, w), (w, w)];
                let mut worst: f64 = 0.0;
                for (idx, (x, y)) in fields.iter().enumerate() {
                    let xy = &v[derivs.start + idx * n..derivs.start + (idx + 1) * n];
                    let r = nabla_vector_values(&gamma, x, y, xy);
                    worst = worst.max(crate::suite::max_abs(&r));
                }
                Ok(worst)
            },
        );
    }

    let tc = &s.theta_c;
    let pairing = vec![
        expr::sub(&theta.apply(&[&s.u]), &Expr::one()),
        theta.apply(&[&s.v]),
        tc.apply(&[&s.u]),
        expr::sub(&tc.apply(&[&s.v]), &Expr::one()),
    ];
    suite.residual(
        "frame_pairing",
        "canonical foliation",
        tol.get_or("frame_pairing", FRAME_TOLERANCE),
        pairing,
    );
    let mut rotation = j.apply(&s.u).sub(&s.v).comps().to_vec();
    rotation.extend(j.apply(&s.v).add(&s.u).comps().iter().cloned());
    suite.residual(
        "frame_rotation",
        "canonical foliation",
        tol.get_or("frame_rotation", FRAME_TOLERANCE),
        rotation,
    );
}

/// Runs every defining check of a Vaisman structure over `grid`.
pub fn check_vaisman(s: &VaismanStructure, grid: &SampleGrid, tol: &Tolerances) -> VerificationReport {
    let mut suite = Suite::new();
    add_vaisman_checks(&mut suite, s, tol);
    let mut report = VerificationReport::new("vaisman", grid);
    report.records = suite.run(grid);
    report
}

/// `ι_U T, ι_V T, Lie_U T, Lie_V T` as one list of components.
pub fn basic_residuals(t: &KForm, u: &VectorField, v: &VectorField) -> Vec<Expr> {
    let mut out = Vec::new();
    if t.degree() > 0 {
        out.extend(t.interior(u).dense_increasing());
        out.extend(t.interior(v).dense_increasing());
    }
    out.extend(lie_derivative_form(u, t).dense_increasing());
    out.extend(lie_derivative_form(v, t).dense_increasing());
    out
}

pub fn check_basic(
    t: &KForm,
    u: &VectorField,
    v: &VectorField,
    grid: &SampleGrid,
    tolerance: f64,
) -> VerificationReport {
    let mut suite = Suite::new();
    suite.residual(
        "basic",
        "basic forms and basic de Rham derivative",
        tolerance,
        basic_residuals(t, u, v),
    );
    let mut report = VerificationReport::new("basic", grid);
    report.records = suite.run(grid);
    report
}

/// A chart together with a basic transverse Kähler potential.
#[derive(Debug, Clone)]
pub struct FoliatedPotentialChart {
    chart: ChartSpec,
    h: Expr,
}

impl FoliatedPotentialChart {
    pub fn new(chart: ChartSpec, h: Expr) -> Result<Self, VaismanError> {
        for i in chart.leaf() {
            if h.depends_on(i) {
                return Err(VaismanError::NotBasic(chart.coord_names()[i].clone()));
            }
        }
        Ok(FoliatedPotentialChart { chart, h })
    }

    pub fn chart(&self) -> &ChartSpec {
        &self.chart
    }

    pub fn potential(&self) -> &Expr {
        &self.h
    }

    /// Real form of `i∂∂̄h` on the transverse coordinates, row-major `2n×2n`:
    /// `L_ab = ½(H_ab + H(J₀∂a, J₀∂b))`.
    pub fn levi_form_exprs(&self) -> Vec<Expr> {
        let tr = self.chart.transverse();
        let j0 = standard_complex_structure(&self.chart);
        let hess = |a: usize, b: usize| self.h.diff(a).diff(b);
        let mut out = Vec::new();
        for &a in &tr {
            for &b in &tr {
                let mut rotated = Vec::new();
                for &i in &tr {
                    for &k in &tr {
                        let c = j0.get(i, a) * j0.get(k, b);
                        if !c.is_zero() {
                            rotated.push(&c * &hess(i, k));
                        }
                    }
                }
                out.push((&hess(a, b) + &expr::sum(rotated)).scale(0.5));
            }
        }
        out
    }

    /// Smallest Levi-form eigenvalue over the grid, with its point.
    pub fn min_levi_eigenvalue(&self, grid: &SampleGrid) -> Result<(f64, Vec<f64>), VaismanError> {
        let m = 2 * self.chart.n();
        let program = Program::compile(&self.levi_form_exprs());
        let vals = grid.map(|p| -> Result<f64, EvalError> {
            let v = program.eval(p)?;
            let l = DMatrix::from_row_slice(m, m, &v);
            Ok(SymmetricEigen::new(l).eigenvalues.min())
        });
        let mut best: Option<(f64, Vec<f64>)> = None;
        for (p, v) in grid.points().iter().zip(vals) {
            let v = v?;
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, p.clone()));
            }
        }
        best.ok_or(VaismanError::EmptyGrid)
    }
}

/// `J = J₀ + ∂x⊗d^c h + ∂y⊗(d^c h∘J₀)`, `θ = dx`, `θ^c = -θ∘J`,
/// `ω = dθ^c − θ∧θ^c`, `g = ω(J·, ·)`.
pub fn build_from_potential(
    fc: &FoliatedPotentialChart,
    grid: &SampleGrid,
) -> Result<VaismanStructure, VaismanError> {
    let (min, point) = fc.min_levi_eigenvalue(grid)?;
    if !(min > 0.0) {
        return Err(VaismanError::Positivity {
            point,
            min_eigenvalue: min,
        });
    }
    Ok(structure_from_potential(fc.chart(), fc.potential()))
}

/// The construction of [`build_from_potential`] without the positivity
/// check.
pub fn structure_from_potential(chart: &ChartSpec, h: &Expr) -> VaismanStructure {
    let dim = chart.dim();
    let [x, y] = chart.leaf();
    let j0 = standard_complex_structure(chart);
    let alpha = d_c(h, &j0);
    let beta = alpha.compose_endo(&j0);
    let j = j0
        .add(&Endomorphism::outer(&VectorField::coordinate(dim, x), &alpha))
        .add(&Endomorphism::outer(&VectorField::coordinate(dim, y), &beta));
    let theta = KForm::coordinate(dim, x);
    let theta_c = anti_lee(&j, &theta);
    let omega = theta_c.d().sub(&theta.wedge(&theta_c).expect("degree fits"));
    let (g, _) = MetricField::symmetrized(dim, &metric_from_form_raw(&omega, &j));
    VaismanStructure::new(chart.clone(), j, g, theta)
}

/// `X_j = ∂_{z_j} − i (∂h/∂z_j) ∂y` for each transverse pair.
pub fn transverse_frame(fc: &FoliatedPotentialChart) -> Vec<ComplexVectorField> {
    let chart = fc.chart();
    let dim = chart.dim();
    let y = chart.leaf()[1];
    chart
        .complex_pairs()
        .into_iter()
        .map(|(u, v)| {
            let hu = fc.potential().diff(u);
            let hv = fc.potential().diff(v);
            let mut re = vec![Expr::zero(); dim];
            let mut im = vec![Expr::zero(); dim];
            re[u] = Expr::constant(0.5);
            re[y] = hv.scale(-0.5);
            im[v] = Expr::constant(-0.5);
            im[y] = hu.scale(-0.5);
            ComplexVectorField {
                re: VectorField::new(re),
                im: VectorField::new(im),
            }
        })
        .collect()
}

/// `g^T_{jk̄} = g(X_j, X̄_k)`, row-major `n×n`.
pub fn transverse_metric(s: &VaismanStructure, frame: &[ComplexVectorField]) -> Vec<ComplexExpr> {
    let g = s.g();
    let mut out = Vec::new();
    for xj in frame {
        for xk in frame {
            // g(A + iB, C − iD)
            let re = &g.apply(&xj.re, &xk.re) + &g.apply(&xj.im, &xk.im);
            let im = &g.apply(&xj.im, &xk.re) - &g.apply(&xj.re, &xk.im);
            out.push(ComplexExpr::new(re, im));
        }
    }
    out
}

/// `J X_j = i X_j`, `J X̄_j = −i X̄_j`, and `g^T` Hermitian positive.
pub fn check_transverse_frame(
    fc: &FoliatedPotentialChart,
    s: &VaismanStructure,
    grid: &SampleGrid,
    tol: &Tolerances,
) -> VerificationReport {
    let frame = transverse_frame(fc);
    let j = s.j();
    let mut holo = Vec::new();
    for x in &frame {
        let jx = ComplexVectorField {
            re: j.apply(&x.re),
            im: j.apply(&x.im),
        };
        holo.extend(jx.sub(&x.times_i()).comps());
        let xb = x.conj();
        let jxb = ComplexVectorField {
            re: j.apply(&xb.re),
            im: j.apply(&xb.im),
        };
        // J X̄ + i X̄ = 0
        let lhs = ComplexVectorField {
            re: jxb.re.add(&xb.times_i().re),
            im: jxb.im.add(&xb.times_i().im),
        };
        holo.extend(lhs.comps());
    }
    let gt = transverse_metric(s, &frame);
    let n = frame.len();
    let mut suite = Suite::new();
    suite.residual(
        "frame_holomorphic",
        "transverse frame X_j",
        tol.get_or("frame_holomorphic", FRAME_TOLERANCE),
        holo,
    );
    let mut herm = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let x = &gt[a * n + b];
            let y = &gt[b * n + a];
            herm.push(&x.re - &y.re);
            herm.push(&x.im + &y.im);
        }
    }
    suite.residual(
        "transverse_metric_hermitian",
        "transverse metric g^T",
        tol.get_or("transverse_metric_hermitian", FRAME_TOLERANCE),
        herm,
    );
    let slot = suite.slot(gt.iter().flat_map(|c| [c.re.clone(), c.im.clone()]));
    suite.custom(
        "transverse_metric_positive",
        "transverse metric g^T",
        CheckKind::LowerBound,
        0.0,
        move |_, v| {
            let vals = &v[slot.clone()];
            // real representation [[A, −B], [B, A]] of A + iB
            let m = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
                let (a, b) = (r % n, c % n);
                let re = vals[2 * (a * n + b)];
                let im = vals[2 * (a * n + b) + 1];
                match (r < n, c < n) {
                    (true, true) | (false, false) => re,
                    (true, false) => -im,
                    (false, true) => im,
                }
            });
            let sym = (&m + m.transpose()) * 0.5;
            Ok(SymmetricEigen::new(sym).eigenvalues.min())
        },
    );
    let mut report = VerificationReport::new("transverse frame", grid);
    report.records = suite.run(grid);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn flat(n: usize) -> (FoliatedPotentialChart, SampleGrid) {
        let chart = ChartSpec::standard(n, 1.5);
        let h = expr::sum(
            chart
                .transverse()
                .into_iter()
                .map(|i| (&Expr::var(i) * &Expr::var(i)).scale(0.5)),
        );
        let grid = SampleGrid::new(
            &chart,
            &GridSpec {
                lattice: 2,
                random: 40,
                seed: 3,
                margin: 1e-3,
            },
        );
        (FoliatedPotentialChart::new(chart, h).unwrap(), grid)
    }

    #[test]
    fn standard_structure_and_anti_lee() {
        let chart = ChartSpec::standard(1, 1.0);
        let j0 = standard_complex_structure(&chart);
        let sq = j0.compose(&j0).eval(&[0.0; 4]).unwrap();
        assert_eq!(sq, -DMatrix::<f64>::identity(4, 4));
        let tc = anti_lee(&j0, &KForm::coordinate(4, 2));
        assert_eq!(tc.component(&[3]).as_const(), Some(1.0));
        assert_eq!(tc.terms().count(), 1);
    }

    #[test]
    fn flat_fundamental_form() {
        let chart = ChartSpec::standard(1, 1.0);
        let j0 = standard_complex_structure(&chart);
        let w = fundamental_form(&MetricField::euclidean(4), &j0);
        // g(∂u, J∂v) = g(∂u, −∂u) = −1
        assert_eq!(w.component(&[0, 1]).as_const(), Some(-1.0));
        assert_eq!(w.component(&[2, 3]).as_const(), Some(-1.0));
    }

    #[test]
    fn flat_potential_is_vaisman() {
        for n in [1, 2] {
            let (fc, grid) = flat(n);
            let s = build_from_potential(&fc, &grid).unwrap();
            let r = check_vaisman(&s, &grid, &Tolerances::default());
            assert!(r.all_pass(), "n = {n}: {:?}", r.failing());
            let f = check_transverse_frame(&fc, &s, &grid, &Tolerances::default());
            assert!(f.all_pass(), "n = {n}: {:?}", f.failing());
        }
    }

    #[test]
    fn indefinite_potential_is_rejected() {
        let chart = ChartSpec::standard(1, 1.0);
        let h = chart.parse("u^2 - v^2").unwrap();
        let fc = FoliatedPotentialChart::new(chart.clone(), h).unwrap();
        let grid = SampleGrid::new(&chart, &GridSpec::default());
        assert!(matches!(
            build_from_potential(&fc, &grid),
            Err(VaismanError::Positivity { .. })
        ));
        let bad = chart.parse("u^2 + x").unwrap();
        assert!(matches!(
            FoliatedPotentialChart::new(chart, bad),
            Err(VaismanError::NotBasic(name)) if name == "x"
        ));
    }

    #[test]
    fn flat_kahler_without_lee_form_fails_only_the_norm() {
        let (fc, grid) = flat(1);
        let flat_g = MetricField::euclidean(4);
        let j0 = standard_complex_structure(fc.chart());
        let kahler = VaismanStructure::new(fc.chart().clone(), j0, flat_g, KForm::zero(4, 1));
        let r = check_vaisman(&kahler, &grid, &Tolerances::default());
        for name in ["lcs_structure", "lee_closed", "hermitian", "nijenhuis"] {
            assert!(r.record(name).unwrap().pass, "{name}");
        }
        assert!(!r.record("lee_unit_norm").unwrap().pass);
        assert_eq!(r.record("lee_unit_norm").unwrap().max_residual, 1.0);
    }

    #[test]
    fn broken_structure_trips_integrability() {
        let chart = ChartSpec::standard(1, 1.0);
        let j0 = standard_complex_structure(&chart);
        let grid = SampleGrid::new(&chart, &GridSpec::default());
        assert!(check_integrability(&j0, &grid, 1e-12).all_pass());
        let pert = Endomorphism::outer(&VectorField::coordinate(4, 2), &KForm::coordinate(4, 0).mul_fn(&Expr::var(0)));
        let broken = j0.add(&pert);
        // by hand: N(∂u, ∂v) = [∂v + u∂x, −∂u] = ∂x
        let nij = nijenhuis_residuals(&broken);
        let at = [0.4, -0.2, 0.1, 0.3];
        let first: Vec<f64> = nij[..4].iter().map(|e| e.eval(&at).unwrap()).collect();
        assert_eq!(first, vec![0.0, 0.0, 1.0, 0.0]);
        let r = check_integrability(&broken, &grid, 1e-12);
        assert!(!r.all_pass());
    }
}
