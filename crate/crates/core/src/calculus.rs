//! Lie brackets, Lie derivatives and the Levi-Civita connection.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::chart::PointSample;
use crate::expr::{self, EvalError, Expr, Program};
use crate::form::KForm;
use crate::tensor::{
    flat_index, multi_index, Endomorphism, MetricField, MetricJet, Symmetry, TensorField,
    VectorField,
};

/// Metrics whose condition number exceeds this are treated as singular.
pub const MAX_CONDITION: f64 = 1e13;

#[derive(Debug, Clone, Error)]
pub enum CalculusError {
    #[error("Lie derivative of valence {0:?} is not supported")]
    UnsupportedValence((usize, usize)),
    #[error("singular metric at {point:?} (condition number {condition:e})")]
    SingularMetric { point: Vec<f64>, condition: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `[X, Y]^i = X^j ∂_j Y^i - Y^j ∂_j X^i`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    assert_eq!(x.dim(), y.dim());
    VectorField::new(
        (0..x.dim())
            .map(|i| expr::sub(&x.apply(y.comp(i)), &y.apply(x.comp(i))))
            .collect(),
    )
}

/// Lie derivative of a scalar, a purely covariant tensor or an endomorphism.
pub fn lie_derivative(x: &VectorField, t: &TensorField) -> Result<TensorField, CalculusError> {
    let (cov, contra) = t.valence();
    if contra > 1 || (contra == 1 && cov != 1) {
        return Err(CalculusError::UnsupportedValence((cov, contra)));
    }
    let n = t.dim();
    let rank = cov + contra;
    // ∂_j X^m, computed once
    let dx: Vec<Vec<Expr>> = (0..n)
        .map(|m| (0..n).map(|j| x.comp(m).diff(j)).collect())
        .collect();
    let comps: Vec<Expr> = (0..t.comps().len())
        .map(|flat| {
            let idx = multi_index(flat, n, rank);
            let mut terms = vec![x.apply(&t.comps()[flat])];
            for slot in 0..rank {
                let contravariant = slot < contra;
                for m in 0..n {
                    let mut other = idx.clone();
                    other[slot] = m;
                    let c = t.get(&other);
                    if c.is_zero() {
                        continue;
                    }
                    if contravariant {
                        // -T^{..m..} ∂_m X^i
                        let d = &dx[idx[slot]][m];
                        if !d.is_zero() {
                            terms.push(-(c * d));
                        }
                    } else {
                        // +T_{..m..} ∂_a X^m
                        let d = &dx[m][idx[slot]];
                        if !d.is_zero() {
                            terms.push(c * d);
                        }
                    }
                }
            }
            expr::sum(terms)
        })
        .collect();
    let symmetry = t.symmetry();
    let mut out =
        TensorField::new(n, cov, contra, Symmetry::None, comps).expect("shape is preserved");
    if symmetry != Symmetry::None {
        out = resymmetrize(&out, symmetry);
    }
    Ok(out)
}

/// Rebuilds symmetric or antisymmetric structure component-wise so that the
/// flag verification holds structurally. Only used on results whose symmetry
/// is mathematically guaranteed.
fn resymmetrize(t: &TensorField, symmetry: Symmetry) -> TensorField {
    let n = t.dim();
    let (cov, _) = t.valence();
    if cov != 2 {
        return t.clone();
    }
    let mut comps = t.comps().to_vec();
    for a in 0..n {
        for b in 0..n {
            let (lo, hi) = (a.min(b), a.max(b));
            let base = t.get(&[lo, hi]).clone();
            comps[flat_index(&[a, b], n)] = match symmetry {
                Symmetry::Symmetric => base,
                Symmetry::Antisymmetric if a == b => Expr::zero(),
                Symmetry::Antisymmetric if a > b => expr::neg(&base),
                _ => base,
            };
        }
    }
    TensorField::new(n, cov, 0, symmetry, comps).expect("resymmetrized")
}

/// Lie derivative of an endomorphism field.
pub fn lie_derivative_endo(x: &VectorField, j: &Endomorphism) -> Endomorphism {
    let t = lie_derivative(x, &j.to_tensor()).expect("valence (1,1) is supported");
    Endomorphism::from_tensor(&t).expect("valence preserved")
}

/// Lie derivative of a metric, as a symmetric tensor.
pub fn lie_derivative_metric(x: &VectorField, g: &MetricField) -> MetricField {
    let t = lie_derivative(x, &g.to_tensor()).expect("valence (2,0) is supported");
    MetricField::from_tensor(&t).expect("symmetric result")
}

/// Cartan formula `Lie_X α = ι_X dα + d ι_X α`.
pub fn lie_derivative_form(x: &VectorField, alpha: &KForm) -> KForm {
    let a = alpha.d().interior(x);
    if alpha.degree() == 0 {
        return a;
    }
    a.add(&alpha.interior(x).d())
}

/// Numeric inverse with a conditioning check.
pub fn checked_inverse(g: &DMatrix<f64>, point: &[f64]) -> Result<DMatrix<f64>, CalculusError> {
    let sym = SymmetricEigen::new(g.clone());
    let abs: Vec<f64> = sym.eigenvalues.iter().map(|l| l.abs()).collect();
    let max = abs.iter().cloned().fold(0.0, f64::max);
    let min = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(CalculusError::SingularMetric {
            point: point.to_vec(),
            condition,
        });
    }
    g.clone()
        .try_inverse()
        .ok_or_else(|| CalculusError::SingularMetric {
            point: point.to_vec(),
            condition,
        })
}

/// Christoffel symbols `Γ^k_ij`, stored at `k * n * n + i * n + j`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[(k * self.dim + i) * self.dim + j]
    }

    pub fn from_jet(jet: &MetricJet, point: &[f64]) -> Result<Self, CalculusError> {
        let n = jet.g.nrows();
        let ginv = checked_inverse(&jet.g, point)?;
        // lowered: Γ_lij = ½(∂_i g_jl + ∂_j g_il - ∂_l g_ij)
        let mut lowered = vec![0.0; n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = 0.5 * (jet.dg[i][(j, l)] + jet.dg[j][(i, l)] - jet.dg[l][(i, j)]);
                    lowered[(l * n + i) * n + j] = v;
                    lowered[(l * n + j) * n + i] = v;
                }
            }
        }
        let mut values = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(k, l)] * lowered[(l * n + i) * n + j];
                    }
                    values[(k * n + i) * n + j] = s;
                    values[(k * n + j) * n + i] = s;
                }
            }
        }
        Ok(Christoffel { dim: n, values })
    }
}

pub fn christoffel(g: &MetricField, p: &PointSample) -> Result<Christoffel, CalculusError> {
    let jet = g.eval_jet(p.coords())?;
    Christoffel::from_jet(&jet, p.coords())
}

/// `(∇θ)_ij = ∂_i θ_j - Γ^k_ij θ_k` from numeric data.
pub fn nabla_oneform_values(gamma: &Christoffel, theta: &[f64], dtheta: &DMatrix<f64>) -> DMatrix<f64> {
    let n = gamma.dim;
    DMatrix::from_fn(n, n, |i, j| {
        let mut s = dtheta[(i, j)];
        for k in 0..n {
            s -= gamma.get(k, i, j) * theta[k];
        }
        s
    })
}

/// Exprs for `θ_j` followed by `∂_i θ_j` (row `i`).
pub(crate) fn oneform_jet_exprs(theta: &KForm) -> Vec<Expr> {
    let c = theta.covector();
    let n = c.len();
    let mut out = c.clone();
    for i in 0..n {
        for cj in c.iter().take(n) {
            out.push(cj.diff(i));
        }
    }
    out
}

pub(crate) fn unpack_oneform_jet(n: usize, vals: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    (
        vals[..n].to_vec(),
        DMatrix::from_row_slice(n, n, &vals[n..n + n * n]),
    )
}

pub fn covariant_derivative_oneform(
    g: &MetricField,
    theta: &KForm,
    p: &PointSample,
) -> Result<DMatrix<f64>, CalculusError> {
    let gamma = christoffel(g, p)?;
    let vals = Program::compile(&oneform_jet_exprs(theta)).eval(p.coords())?;
    let (t, dt) = unpack_oneform_jet(g.dim(), &vals);
    Ok(nabla_oneform_values(&gamma, &t, &dt))
}

/// `(∇_X Y)^k = X^i ∂_i Y^k + Γ^k_ij X^i Y^j`, given `X(Y^k)` numerically.
pub fn nabla_vector_values(gamma: &Christoffel, x: &[f64], y: &[f64], x_of_y: &[f64]) -> Vec<f64> {
    let n = gamma.dim;
    (0..n)
        .map(|k| {
            let mut s = x_of_y[k];
            for i in 0..n {
                for j in 0..n {
                    s += gamma.get(k, i, j) * x[i] * y[j];
                }
            }
            s
        })
        .collect()
}

pub fn covariant_derivative_vector(
    g: &MetricField,
    x: &VectorField,
    y: &VectorField,
    p: &PointSample,
) -> Result<Vec<f64>, CalculusError> {
    let gamma = christoffel(g, p)?;
    let n = g.dim();
    let mut exprs = x.comps().to_vec();
    exprs.extend_from_slice(y.comps());
    exprs.extend((0..n).map(|k| x.apply(y.comp(k))));
    let v = Program::compile(&exprs).eval(p.coords())?;
    Ok(nabla_vector_values(&gamma, &v[..n], &v[n..2 * n], &v[2 * n..]))
}

/// Index raising at a point.
pub fn sharp(g: &MetricField, alpha: &[f64], p: &PointSample) -> Result<Vec<f64>, CalculusError> {
    let gm = g.eval(p.coords())?;
    let ginv = checked_inverse(&gm, p.coords())?;
    Ok((ginv * DVector::from_column_slice(alpha)).as_slice().to_vec())
}

/// Index lowering at a point.
pub fn flat(g: &MetricField, x: &[f64], p: &PointSample) -> Result<Vec<f64>, CalculusError> {
    let gm = g.eval(p.coords())?;
    Ok((gm * DVector::from_column_slice(x)).as_slice().to_vec())
}
