//! Differential forms stored sparsely over increasing multi-indices.
//!
//! A k-form `α` is kept as `{I ↦ α_I}` for strictly increasing `I`, where
//! `α_I = α(∂_{i1}, ..., ∂_{ik})`. Wedge products use the determinant
//! convention, so `(dx∧dy)(∂x, ∂y) = 1` and `dx∧dy` has the single component
//! `1` at `[x, y]`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{self, EvalError, Expr, Program};
use crate::tensor::{Endomorphism, Symmetry, TensorField, VectorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormError {
    #[error("degree {0} + {1} exceeds dimension {2}")]
    DegreeOverflow(usize, usize, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    Dim(usize, usize),
    #[error("tensor is not an antisymmetric covariant tensor")]
    NotAForm,
}

#[derive(Debug, Clone)]
pub struct KForm {
    dim: usize,
    degree: usize,
    comps: BTreeMap<Vec<usize>, Expr>,
}

/// Sorts `idx` in place and returns the permutation sign, or `None` if an
/// index repeats.
pub(crate) fn sort_sign(idx: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

fn signed(e: &Expr, sign: f64) -> Expr {
    if sign < 0.0 {
        expr::neg(e)
    } else {
        e.clone()
    }
}

/// Increasing `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

impl KForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        KForm {
            dim,
            degree,
            comps: BTreeMap::new(),
        }
    }

    pub fn scalar(dim: usize, f: Expr) -> Self {
        let mut k = KForm::zero(dim, 0);
        k.insert(Vec::new(), f);
        k
    }

    /// The coordinate 1-form `dx^i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut k = KForm::zero(dim, 1);
        k.insert(vec![i], Expr::one());
        k
    }

    pub fn from_covector(comps: Vec<Expr>) -> Self {
        let mut k = KForm::zero(comps.len(), 1);
        for (i, c) in comps.into_iter().enumerate() {
            k.insert(vec![i], c);
        }
        k
    }

    /// Builds a form from components at arbitrary (not necessarily sorted)
    /// multi-indices; entries for the same sorted index are summed.
    pub fn from_entries(
        dim: usize,
        degree: usize,
        entries: impl IntoIterator<Item = (Vec<usize>, Expr)>,
    ) -> Self {
        let mut acc: BTreeMap<Vec<usize>, Vec<Expr>> = BTreeMap::new();
        for (mut idx, e) in entries {
            assert_eq!(idx.len(), degree, "index length must equal degree");
            assert!(idx.iter().all(|&i| i < dim), "index out of range");
            if let Some(s) = sort_sign(&mut idx) {
                acc.entry(idx).or_default().push(signed(&e, s));
            }
        }
        let mut k = KForm::zero(dim, degree);
        for (idx, terms) in acc {
            k.insert(idx, expr::sum(terms));
        }
        k
    }

    fn insert(&mut self, idx: Vec<usize>, e: Expr) {
        if !e.is_zero() {
            self.comps.insert(idx, e);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Nonzero components over increasing multi-indices.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
        self.comps.iter()
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.comps.is_empty()
    }

    /// Component at an arbitrary multi-index, with sign.
    pub fn component(&self, idx: &[usize]) -> Expr {
        let mut sorted = idx.to_vec();
        match sort_sign(&mut sorted) {
            None => Expr::zero(),
            Some(s) => self
                .comps
                .get(&sorted)
                .map(|e| signed(e, s))
                .unwrap_or_else(Expr::zero),
        }
    }

    /// Dense components of a 1-form.
    pub fn covector(&self) -> Vec<Expr> {
        assert_eq!(self.degree, 1);
        (0..self.dim).map(|i| self.component(&[i])).collect()
    }

    /// Scalar value of a 0-form.
    pub fn as_scalar(&self) -> Expr {
        assert_eq!(self.degree, 0);
        self.component(&[])
    }

    /// All components over increasing multi-indices, zeros included.
    pub fn dense_increasing(&self) -> Vec<Expr> {
        combinations(self.dim, self.degree)
            .iter()
            .map(|i| self.component(i))
            .collect()
    }

    pub fn add(&self, other: &KForm) -> KForm {
        self.combine(other, expr::add)
    }

    pub fn sub(&self, other: &KForm) -> KForm {
        self.combine(other, expr::sub)
    }

    fn combine(&self, other: &KForm, f: fn(&Expr, &Expr) -> Expr) -> KForm {
        assert_eq!(
            (self.dim, self.degree),
            (other.dim, other.degree),
            "incompatible forms"
        );
        let mut out = KForm::zero(self.dim, self.degree);
        let zero = Expr::zero();
        let keys: std::collections::BTreeSet<&Vec<usize>> =
            self.comps.keys().chain(other.comps.keys()).collect();
        for k in keys {
            let a = self.comps.get(k).unwrap_or(&zero);
            let b = other.comps.get(k).unwrap_or(&zero);
            out.insert(k.clone(), f(a, b));
        }
        out
    }

    pub fn scale(&self, c: f64) -> KForm {
        self.map(|e| e.scale(c))
    }

    pub fn mul_fn(&self, f: &Expr) -> KForm {
        self.map(|e| f * e)
    }

    pub fn neg(&self) -> KForm {
        self.map(expr::neg)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> KForm {
        let mut out = KForm::zero(self.dim, self.degree);
        for (k, e) in &self.comps {
            out.insert(k.clone(), f(e));
        }
        out
    }

    /// Exterior derivative.
    pub fn d(&self) -> KForm {
        let mut entries = Vec::new();
        for (idx, a) in &self.comps {
            for m in 0..self.dim {
                if idx.contains(&m) {
                    continue;
                }
                let da = a.diff(m);
                if da.is_zero() {
                    continue;
                }
                let mut full = Vec::with_capacity(idx.len() + 1);
                full.push(m);
                full.extend_from_slice(idx);
                entries.push((full, da));
            }
        }
        KForm::from_entries(self.dim, self.degree + 1, entries)
    }

    pub fn wedge(&self, other: &KForm) -> Result<KForm, FormError> {
        if self.dim != other.dim {
            return Err(FormError::Dim(self.dim, other.dim));
        }
        if self.degree + other.degree > self.dim {
            return Err(FormError::DegreeOverflow(self.degree, other.degree, self.dim));
        }
        let mut entries = Vec::new();
        for (i, a) in &self.comps {
            for (k, b) in &other.comps {
                if i.iter().any(|x| k.contains(x)) {
                    continue;
                }
                let mut idx = i.clone();
                idx.extend_from_slice(k);
                entries.push((idx, a * b));
            }
        }
        Ok(KForm::from_entries(
            self.dim,
            self.degree + other.degree,
            entries,
        ))
    }

    /// Interior product `ι_X α`; `(ι_X α)(v2..vk) = α(X, v2..vk)`.
    pub fn interior(&self, x: &VectorField) -> KForm {
        assert!(self.degree >= 1, "interior product of a 0-form");
        let mut entries = Vec::new();
        for (idx, a) in &self.comps {
            for (pos, &m) in idx.iter().enumerate() {
                let xm = x.comp(m);
                if xm.is_zero() {
                    continue;
                }
                let mut rest = idx.clone();
                rest.remove(pos);
                let term = xm * a;
                entries.push((rest, signed(&term, if pos % 2 == 0 { 1.0 } else { -1.0 })));
            }
        }
        KForm::from_entries(self.dim, self.degree - 1, entries)
    }

    /// Evaluation on `k` vector fields.
    pub fn apply(&self, xs: &[&VectorField]) -> Expr {
        assert_eq!(xs.len(), self.degree);
        let mut cur = self.clone();
        for x in xs {
            cur = cur.interior(x);
        }
        cur.as_scalar()
    }

    /// `α ∘ J` for a 1-form, `(α∘J)(v) = α(Jv)`.
    pub fn compose_endo(&self, j: &Endomorphism) -> KForm {
        assert_eq!(self.degree, 1);
        let a = self.covector();
        KForm::from_covector(
            (0..self.dim)
                .map(|k| expr::sum((0..self.dim).map(|i| &a[i] * j.get(i, k))))
                .collect(),
        )
    }

    /// `β(J·, J·)` for a 2-form.
    pub fn pullback_endo2(&self, j: &Endomorphism) -> KForm {
        assert_eq!(self.degree, 2);
        let n = self.dim;
        let mut entries = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let e = expr::sum((0..n).flat_map(|i| (0..n).map(move |k| (i, k))).filter_map(
                    |(i, k)| {
                        if i == k || j.get(i, a).is_zero() || j.get(k, b).is_zero() {
                            return None;
                        }
                        let c = self.component(&[i, k]);
                        if c.is_zero() {
                            None
                        } else {
                            Some(&(j.get(i, a) * j.get(k, b)) * &c)
                        }
                    },
                ));
                entries.push((vec![a, b], e));
            }
        }
        KForm::from_entries(n, 2, entries)
    }

    /// Whether any component depends on coordinate `i`.
    pub fn depends_on(&self, i: usize) -> bool {
        self.comps.values().any(|e| e.depends_on(i))
    }

    pub fn to_tensor(&self) -> TensorField {
        let n = self.dim;
        let k = self.degree;
        let total = n.pow(k as u32);
        let comps = (0..total)
            .map(|flat| {
                let idx = crate::tensor::multi_index(flat, n, k);
                self.component(&idx)
            })
            .collect();
        let sym = if k >= 2 {
            Symmetry::Antisymmetric
        } else {
            Symmetry::None
        };
        TensorField::new(n, k, 0, sym, comps).expect("form components are antisymmetric")
    }

    pub fn from_tensor(t: &TensorField) -> Result<KForm, FormError> {
        let (cov, contra) = t.valence();
        if contra != 0 || (cov >= 2 && t.symmetry() != Symmetry::Antisymmetric) {
            return Err(FormError::NotAForm);
        }
        let entries = combinations(t.dim(), cov)
            .into_iter()
            .map(|idx| {
                let e = t.get(&idx).clone();
                (idx, e)
            });
        Ok(KForm::from_entries(t.dim(), cov, entries))
    }

    pub fn eval_increasing(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        Program::compile(&self.dense_increasing()).eval(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dx(i: usize) -> KForm {
        KForm::coordinate(4, i)
    }

    #[test]
    fn wedge_conventions() {
        assert!(dx(2).wedge(&dx(2)).unwrap().is_structurally_zero());
        let w = dx(2).wedge(&dx(3)).unwrap();
        let v = w.apply(&[&VectorField::coordinate(4, 2), &VectorField::coordinate(4, 3)]);
        assert_eq!(v.as_const(), Some(1.0));
        let w2 = dx(3).wedge(&dx(2)).unwrap();
        assert_eq!(w2.component(&[2, 3]).as_const(), Some(-1.0));
        let big = dx(0).wedge(&dx(1)).unwrap().wedge(&dx(2)).unwrap();
        assert!(matches!(
            big.wedge(&dx(3)).unwrap().wedge(&dx(0)),
            Err(FormError::DegreeOverflow(4, 1, 4))
        ));
    }

    #[test]
    fn exterior_derivative_basics() {
        let x = KForm::scalar(4, Expr::var(2));
        let d = x.d();
        assert_eq!(d.component(&[2]).as_const(), Some(1.0));
        assert!(d.d().is_structurally_zero());
        // d(u dv) = du∧dv
        let a = KForm::coordinate(4, 1).mul_fn(&Expr::var(0));
        let da = a.d();
        assert_eq!(da.component(&[0, 1]).as_const(), Some(1.0));
        assert_eq!(da.terms().count(), 1);
    }

    #[test]
    fn interior_products() {
        let ex = VectorField::coordinate(4, 2);
        let ey = VectorField::coordinate(4, 3);
        assert_eq!(dx(2).interior(&ex).as_scalar().as_const(), Some(1.0));
        assert!(dx(2).interior(&ey).as_scalar().is_zero());
        let w = dx(2).wedge(&dx(3)).unwrap();
        assert_eq!(w.interior(&ey).component(&[2]).as_const(), Some(-1.0));
    }

    #[test]
    fn tensor_round_trip() {
        let w = dx(0).wedge(&dx(3)).unwrap().mul_fn(&Expr::var(1));
        let t = w.to_tensor();
        assert_eq!(t.symmetry(), Symmetry::Antisymmetric);
        let back = KForm::from_tensor(&t).unwrap();
        let p = [0.3, 2.0, 0.1, 0.4];
        assert_eq!(back.eval_increasing(&p).unwrap(), w.eval_increasing(&p).unwrap());
    }
}
