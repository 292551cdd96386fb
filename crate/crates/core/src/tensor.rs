//! Coordinate-component tensor fields.
//!
//! Components are stored densely in row-major order, contravariant indices
//! first. An endomorphism `J` is stored as `J^i_j` at `i * dim + j`, so that
//! `J(∂_j) = Σ_i J^i_j ∂_i`.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, Node, Program};
use crate::form::KForm;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("expected {expected} components for valence {valence:?} in dimension {dim}, got {got}")]
    Shape {
        dim: usize,
        valence: (usize, usize),
        expected: usize,
        got: usize,
    },
    #[error("components violate the declared {symmetry:?} flag at indices {indices:?}")]
    Symmetry {
        symmetry: Symmetry,
        indices: Vec<usize>,
    },
    #[error("symmetry flags apply to purely covariant tensors of rank >= 2")]
    SymmetryOnMixed,
    #[error("dimension mismatch: {0} vs {1}")]
    Dim(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Symmetry {
    None,
    Symmetric,
    Antisymmetric,
}

/// A tensor field with `cov` covariant and `contra` contravariant indices.
#[derive(Debug, Clone)]
pub struct TensorField {
    dim: usize,
    cov: usize,
    contra: usize,
    symmetry: Symmetry,
    comps: Vec<Expr>,
}

/// Structural equality good enough for components we build ourselves.
pub(crate) fn same(a: &Expr, b: &Expr) -> bool {
    a.ptr_eq(b)
        || matches!((a.as_const(), b.as_const()), (Some(x), Some(y)) if x == y)
        || matches!((a.node(), b.node()), (Node::Var(i), Node::Var(j)) if i == j)
}

pub(crate) fn negated(a: &Expr, b: &Expr) -> bool {
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        return x == -y;
    }
    match (a.node(), b.node()) {
        (Node::Neg(inner), _) if inner.ptr_eq(b) => true,
        (_, Node::Neg(inner)) if inner.ptr_eq(a) => true,
        _ => false,
    }
}

pub(crate) fn multi_index(mut flat: usize, dim: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0; rank];
    for slot in (0..rank).rev() {
        idx[slot] = flat % dim;
        flat /= dim;
    }
    idx
}

pub(crate) fn flat_index(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

impl TensorField {
    pub fn new(
        dim: usize,
        cov: usize,
        contra: usize,
        symmetry: Symmetry,
        comps: Vec<Expr>,
    ) -> Result<Self, TensorError> {
        let expected = dim.pow((cov + contra) as u32);
        if comps.len() != expected {
            return Err(TensorError::Shape {
                dim,
                valence: (cov, contra),
                expected,
                got: comps.len(),
            });
        }
        if symmetry != Symmetry::None && (contra != 0 || cov < 2) {
            return Err(TensorError::SymmetryOnMixed);
        }
        let t = TensorField {
            dim,
            cov,
            contra,
            symmetry,
            comps,
        };
        t.verify_symmetry()?;
        Ok(t)
    }

    fn verify_symmetry(&self) -> Result<(), TensorError> {
        if self.symmetry == Symmetry::None {
            return Ok(());
        }
        let rank = self.cov;
        for flat in 0..self.comps.len() {
            let idx = multi_index(flat, self.dim, rank);
            for s in 0..rank - 1 {
                let mut swapped = idx.clone();
                swapped.swap(s, s + 1);
                let a = &self.comps[flat];
                let b = &self.comps[flat_index(&swapped, self.dim)];
                let ok = match self.symmetry {
                    Symmetry::Symmetric => same(a, b),
                    Symmetry::Antisymmetric => {
                        if idx[s] == idx[s + 1] {
                            a.is_zero()
                        } else {
                            negated(a, b)
                        }
                    }
                    Symmetry::None => true,
                };
                if !ok {
                    return Err(TensorError::Symmetry {
                        symmetry: self.symmetry,
                        indices: idx,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn zeros(dim: usize, cov: usize, contra: usize) -> Self {
        TensorField {
            dim,
            cov,
            contra,
            symmetry: Symmetry::None,
            comps: vec![Expr::zero(); dim.pow((cov + contra) as u32)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(covariant, contravariant)` index counts.
    pub fn valence(&self) -> (usize, usize) {
        (self.cov, self.contra)
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn rank(&self) -> usize {
        self.cov + self.contra
    }

    /// Component at a multi-index (contravariant indices first).
    pub fn get(&self, idx: &[usize]) -> &Expr {
        assert_eq!(idx.len(), self.rank());
        &self.comps[flat_index(idx, self.dim)]
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        Program::compile(&self.comps).eval(p)
    }
}

/// Contravariant vector field `X = Σ X^i ∂_i`.
#[derive(Debug, Clone)]
pub struct VectorField {
    comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(comps: Vec<Expr>) -> Self {
        VectorField { comps }
    }

    pub fn zero(dim: usize) -> Self {
        VectorField::new(vec![Expr::zero(); dim])
    }

    /// The coordinate field `∂_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut comps = vec![Expr::zero(); dim];
        comps[i] = Expr::one();
        VectorField::new(comps)
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn comp(&self, i: usize) -> &Expr {
        &self.comps[i]
    }

    /// Directional derivative `X(f)`.
    pub fn apply(&self, f: &Expr) -> Expr {
        expr::sum(
            self.comps
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| c * &f.diff(i)),
        )
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField::new(zip_map(&self.comps, &other.comps, expr::add))
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField::new(zip_map(&self.comps, &other.comps, expr::sub))
    }

    pub fn scale(&self, c: &Expr) -> VectorField {
        VectorField::new(self.comps.iter().map(|x| c * x).collect())
    }

    pub fn neg(&self) -> VectorField {
        VectorField::new(self.comps.iter().map(expr::neg).collect())
    }

    pub fn to_tensor(&self) -> TensorField {
        TensorField {
            dim: self.dim(),
            cov: 0,
            contra: 1,
            symmetry: Symmetry::None,
            comps: self.comps.clone(),
        }
    }

    pub fn eval(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        Program::compile(&self.comps).eval(p)
    }
}

fn zip_map(a: &[Expr], b: &[Expr], f: fn(&Expr, &Expr) -> Expr) -> Vec<Expr> {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    a.iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

/// Field of linear maps of the tangent bundle, valence (1,1).
#[derive(Debug, Clone)]
pub struct Endomorphism {
    dim: usize,
    comps: Vec<Expr>,
}

impl Endomorphism {
    pub fn new(dim: usize, comps: Vec<Expr>) -> Result<Self, TensorError> {
        if comps.len() != dim * dim {
            return Err(TensorError::Shape {
                dim,
                valence: (1, 1),
                expected: dim * dim,
                got: comps.len(),
            });
        }
        Ok(Endomorphism { dim, comps })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut comps = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                comps.push(f(i, j));
            }
        }
        Endomorphism { dim, comps }
    }

    pub fn identity(dim: usize) -> Self {
        Endomorphism::from_fn(dim, |i, j| if i == j { Expr::one() } else { Expr::zero() })
    }

    /// `X ⊗ α`, acting as `Y ↦ α(Y) X`.
    pub fn outer(x: &VectorField, alpha: &KForm) -> Self {
        assert_eq!(alpha.degree(), 1, "outer product needs a 1-form");
        let a = alpha.covector();
        Endomorphism::from_fn(x.dim(), |i, j| x.comp(i) * &a[j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    /// `J^i_j`.
    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.comps[i * self.dim + j]
    }

    /// Image of `∂_j`.
    pub fn column(&self, j: usize) -> VectorField {
        VectorField::new((0..self.dim).map(|i| self.get(i, j).clone()).collect())
    }

    pub fn apply(&self, x: &VectorField) -> VectorField {
        VectorField::new(
            (0..self.dim)
                .map(|i| expr::sum((0..self.dim).map(|j| self.get(i, j) * x.comp(j))))
                .collect(),
        )
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Endomorphism) -> Endomorphism {
        let n = self.dim;
        Endomorphism::from_fn(n, |i, j| {
            expr::sum((0..n).map(|m| self.get(i, m) * other.get(m, j)))
        })
    }

    pub fn add(&self, other: &Endomorphism) -> Endomorphism {
        Endomorphism {
            dim: self.dim,
            comps: zip_map(&self.comps, &other.comps, expr::add),
        }
    }

    pub fn sub(&self, other: &Endomorphism) -> Endomorphism {
        Endomorphism {
            dim: self.dim,
            comps: zip_map(&self.comps, &other.comps, expr::sub),
        }
    }

    pub fn to_tensor(&self) -> TensorField {
        TensorField {
            dim: self.dim,
            cov: 1,
            contra: 1,
            symmetry: Symmetry::None,
            comps: self.comps.clone(),
        }
    }

    pub fn from_tensor(t: &TensorField) -> Result<Self, TensorError> {
        if t.valence() != (1, 1) {
            return Err(TensorError::Shape {
                dim: t.dim,
                valence: t.valence(),
                expected: t.dim * t.dim,
                got: t.comps.len(),
            });
        }
        Endomorphism::new(t.dim, t.comps.clone())
    }

    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let v = Program::compile(&self.comps).eval(p)?;
        Ok(DMatrix::from_row_slice(self.dim, self.dim, &v))
    }
}

/// Value of a metric and its first partial derivatives at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    /// `dg[c][(a, b)] = ∂_c g_ab`.
    pub dg: Vec<DMatrix<f64>>,
}

/// Symmetric covariant 2-tensor field.
#[derive(Debug, Clone)]
pub struct MetricField {
    dim: usize,
    comps: Vec<Expr>,
    jets: Arc<OnceLock<Program>>,
}

impl MetricField {
    /// Builds a metric from the upper triangle `f(a, b)`, `a <= b`.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut comps = vec![Expr::zero(); dim * dim];
        for a in 0..dim {
            for b in a..dim {
                let e = f(a, b);
                comps[a * dim + b] = e.clone();
                comps[b * dim + a] = e;
            }
        }
        MetricField::from_sym_comps(dim, comps)
    }

    fn from_sym_comps(dim: usize, comps: Vec<Expr>) -> Self {
        MetricField {
            dim,
            comps,
            jets: Arc::new(OnceLock::new()),
        }
    }

    /// Symmetrizes an arbitrary covariant 2-tensor `T` as `½(T_ab + T_ba)`.
    /// Entries whose transposes already agree are kept as they are. Returns
    /// the metric and the antisymmetric residuals `T_ab - T_ba`, `a < b`.
    pub fn symmetrized(dim: usize, raw: &[Expr]) -> (Self, Vec<Expr>) {
        assert_eq!(raw.len(), dim * dim);
        let mut asym = Vec::new();
        let g = MetricField::from_upper(dim, |a, b| {
            let (x, y) = (&raw[a * dim + b], &raw[b * dim + a]);
            if same(x, y) {
                x.clone()
            } else {
                asym.push(x - y);
                (x + y).scale(0.5)
            }
        });
        (g, asym)
    }

    pub fn euclidean(dim: usize) -> Self {
        MetricField::from_upper(dim, |a, b| if a == b { Expr::one() } else { Expr::zero() })
    }

    pub fn from_tensor(t: &TensorField) -> Result<Self, TensorError> {
        if t.valence() != (2, 0) || t.symmetry() != Symmetry::Symmetric {
            return Err(TensorError::SymmetryOnMixed);
        }
        Ok(MetricField::from_sym_comps(t.dim, t.comps.clone()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn get(&self, a: usize, b: usize) -> &Expr {
        &self.comps[a * self.dim + b]
    }

    pub fn scale(&self, c: f64) -> MetricField {
        MetricField::from_upper(self.dim, |a, b| self.get(a, b).scale(c))
    }

    pub fn add(&self, other: &MetricField) -> MetricField {
        MetricField::from_upper(self.dim, |a, b| self.get(a, b) + other.get(a, b))
    }

    /// `g(X, Y)`.
    pub fn apply(&self, x: &VectorField, y: &VectorField) -> Expr {
        let n = self.dim;
        expr::sum((0..n).flat_map(|a| {
            (0..n).map(move |b| (a, b))
        }).filter(|&(a, b)| !self.get(a, b).is_zero() && !x.comp(a).is_zero() && !y.comp(b).is_zero())
        .map(|(a, b)| &(self.get(a, b) * x.comp(a)) * y.comp(b)))
    }

    /// Index lowering `X ↦ g(X, ·)`.
    pub fn flat(&self, x: &VectorField) -> KForm {
        let n = self.dim;
        KForm::from_covector(
            (0..n)
                .map(|b| expr::sum((0..n).map(|a| self.get(a, b) * x.comp(a))))
                .collect(),
        )
    }

    pub fn to_tensor(&self) -> TensorField {
        TensorField {
            dim: self.dim,
            cov: 2,
            contra: 0,
            symmetry: Symmetry::Symmetric,
            comps: self.comps.clone(),
        }
    }

    /// Expressions for `g_ab` followed by `∂_c g_ab`, `c`-major.
    pub fn jet_exprs(&self) -> Vec<Expr> {
        let mut out = self.comps.clone();
        for c in 0..self.dim {
            for a in 0..self.dim {
                for b in 0..self.dim {
                    if b < a {
                        // symmetric, reuse
                        let e: Expr = out[self.dim * self.dim * (c + 1) + b * self.dim + a].clone();
                        out.push(e);
                    } else {
                        out.push(self.get(a, b).diff(c));
                    }
                }
            }
        }
        out
    }

    fn jet_program(&self) -> &Program {
        self.jets.get_or_init(|| Program::compile(&self.jet_exprs()))
    }

    /// Unpacks a value vector laid out as by [`MetricField::jet_exprs`].
    pub fn unpack_jet(dim: usize, vals: &[f64]) -> MetricJet {
        let n2 = dim * dim;
        let g = DMatrix::from_row_slice(dim, dim, &vals[..n2]);
        let dg = (0..dim)
            .map(|c| DMatrix::from_row_slice(dim, dim, &vals[n2 * (c + 1)..n2 * (c + 2)]))
            .collect();
        MetricJet { g, dg }
    }

    pub fn eval_jet(&self, p: &[f64]) -> Result<MetricJet, EvalError> {
        let vals = self.jet_program().eval(p)?;
        Ok(MetricField::unpack_jet(self.dim, &vals))
    }

    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        Ok(self.eval_jet(p)?.g)
    }
}
