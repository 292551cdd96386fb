//! Real-valued expression trees over chart coordinates.
//!
//! Every component of every field in this crate is an [`Expr`]. Trees are
//! immutable and reference counted, so cloning is cheap and subtrees are shared
//! freely between tensors. Partial derivatives are computed by exact symbolic
//! rewriting; the node set is closed under differentiation.
//!
//! The constructors in this module fold constants and drop trivial terms
//! (`0 + x`, `1 * x`, ...). No further algebraic simplification is attempted:
//! correctness of evaluation is the only guarantee.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

/// A node of an expression tree.
#[derive(Debug, Clone)]
pub enum Node {
    Const(f64),
    /// Chart coordinate by index.
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Powi(Expr, i32),
    Sqrt(Expr),
    Exp(Expr),
    Log(Expr),
    Sin(Expr),
    Cos(Expr),
}

/// Shared, immutable expression tree.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

/// What went wrong while evaluating an expression at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularityKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    NonFinite,
    CoordinateOutOfRange,
}

impl fmt::Display for SingularityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SingularityKind::DivisionByZero => "division by zero",
            SingularityKind::LogOfNonPositive => "log of non-positive argument",
            SingularityKind::SqrtOfNegative => "sqrt of negative argument",
            SingularityKind::NonFinite => "non-finite value",
            SingularityKind::CoordinateOutOfRange => "coordinate index out of range",
        };
        f.write_str(s)
    }
}

/// Evaluation failure carrying the offending subexpression and point.
#[derive(Debug, Clone, Error)]
#[error("{kind} in `{}` at {point:?}", truncated(subexpr))]
pub struct EvalError {
    pub kind: SingularityKind,
    pub subexpr: Expr,
    pub point: Vec<f64>,
}

fn truncated(e: &Expr) -> String {
    let s = e.to_string();
    if s.len() > 160 {
        let mut cut = 157;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        format!("{}...", &s[..cut])
    } else {
        s
    }
}

impl Expr {
    fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn constant(c: f64) -> Self {
        Expr::from_node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    /// The chart coordinate with index `i`.
    pub fn var(i: usize) -> Self {
        Expr::from_node(Node::Var(i))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// True only for the literal constant zero.
    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    fn addr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn powi(&self, n: i32) -> Expr {
        powi(self, n)
    }

    pub fn sqrt(&self) -> Expr {
        unary(self, Node::Sqrt, |c| (c >= 0.0).then(|| c.sqrt()))
    }

    pub fn exp(&self) -> Expr {
        unary(self, Node::Exp, |c| Some(c.exp()).filter(|v| v.is_finite()))
    }

    pub fn ln(&self) -> Expr {
        unary(self, Node::Log, |c| (c > 0.0).then(|| c.ln()))
    }

    pub fn sin(&self) -> Expr {
        unary(self, Node::Sin, |c| Some(c.sin()))
    }

    pub fn cos(&self) -> Expr {
        unary(self, Node::Cos, |c| Some(c.cos()))
    }

    pub fn scale(&self, c: f64) -> Expr {
        mul(&Expr::constant(c), self)
    }

    /// Whether coordinate `var` occurs anywhere in the tree.
    pub fn depends_on(&self, var: usize) -> bool {
        fn rec(e: &Expr, var: usize, seen: &mut HashMap<usize, bool>) -> bool {
            if let Some(&r) = seen.get(&e.addr()) {
                return r;
            }
            let r = match e.node() {
                Node::Const(_) => false,
                Node::Var(i) => *i == var,
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    rec(a, var, seen) || rec(b, var, seen)
                }
                Node::Neg(a)
                | Node::Powi(a, _)
                | Node::Sqrt(a)
                | Node::Exp(a)
                | Node::Log(a)
                | Node::Sin(a)
                | Node::Cos(a) => rec(a, var, seen),
            };
            seen.insert(e.addr(), r);
            r
        }
        rec(self, var, &mut HashMap::new())
    }

    /// Exact partial derivative with respect to coordinate `var`.
    pub fn diff(&self, var: usize) -> Expr {
        let mut memo = HashMap::new();
        diff_rec(self, var, &mut memo)
    }

    /// Direct recursive evaluation. For many expressions sharing subtrees,
    /// compile a [`Program`] instead.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let err = |kind| EvalError {
            kind,
            subexpr: self.clone(),
            point: point.to_vec(),
        };
        let v = match self.node() {
            Node::Const(c) => *c,
            Node::Var(i) => *point
                .get(*i)
                .ok_or_else(|| err(SingularityKind::CoordinateOutOfRange))?,
            Node::Add(a, b) => a.eval(point)? + b.eval(point)?,
            Node::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Node::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Node::Div(a, b) => {
                let num = a.eval(point)?;
                let den = b.eval(point)?;
                if den == 0.0 {
                    return Err(err(SingularityKind::DivisionByZero));
                }
                num / den
            }
            Node::Neg(a) => -a.eval(point)?,
            Node::Powi(a, n) => {
                let base = a.eval(point)?;
                if base == 0.0 && *n < 0 {
                    return Err(err(SingularityKind::DivisionByZero));
                }
                base.powi(*n)
            }
            Node::Sqrt(a) => {
                let x = a.eval(point)?;
                if x < 0.0 {
                    return Err(err(SingularityKind::SqrtOfNegative));
                }
                x.sqrt()
            }
            Node::Exp(a) => a.eval(point)?.exp(),
            Node::Log(a) => {
                let x = a.eval(point)?;
                if x <= 0.0 {
                    return Err(err(SingularityKind::LogOfNonPositive));
                }
                x.ln()
            }
            Node::Sin(a) => a.eval(point)?.sin(),
            Node::Cos(a) => a.eval(point)?.cos(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(SingularityKind::NonFinite))
        }
    }

    /// Display using the given coordinate names instead of `x0, x1, ...`.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        Named { expr: self, names }
    }

    /// Number of distinct nodes reachable from this expression.
    pub fn node_count(&self) -> usize {
        fn rec(e: &Expr, seen: &mut std::collections::HashSet<usize>) {
            if !seen.insert(e.addr()) {
                return;
            }
            match e.node() {
                Node::Const(_) | Node::Var(_) => {}
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    rec(a, seen);
                    rec(b, seen);
                }
                Node::Neg(a)
                | Node::Powi(a, _)
                | Node::Sqrt(a)
                | Node::Exp(a)
                | Node::Log(a)
                | Node::Sin(a)
                | Node::Cos(a) => rec(a, seen),
            }
        }
        let mut seen = std::collections::HashSet::new();
        rec(self, &mut seen);
        seen.len()
    }
}

fn unary(a: &Expr, make: fn(Expr) -> Node, fold: impl Fn(f64) -> Option<f64>) -> Expr {
    if let Some(v) = a.as_const().and_then(fold) {
        return Expr::constant(v);
    }
    Expr::from_node(make(a.clone()))
}

pub fn add(a: &Expr, b: &Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::constant(x + y),
        (Some(x), _) if x == 0.0 => b.clone(),
        (_, Some(y)) if y == 0.0 => a.clone(),
        _ => {
            if let Node::Neg(inner) = b.node() {
                return sub(a, inner);
            }
            Expr::from_node(Node::Add(a.clone(), b.clone()))
        }
    }
}

pub fn sub(a: &Expr, b: &Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::constant(x - y),
        (_, Some(y)) if y == 0.0 => a.clone(),
        (Some(x), _) if x == 0.0 => neg(b),
        _ if a.ptr_eq(b) => Expr::zero(),
        _ => {
            if let Node::Neg(inner) = b.node() {
                return add(a, inner);
            }
            Expr::from_node(Node::Sub(a.clone(), b.clone()))
        }
    }
}

pub fn mul(a: &Expr, b: &Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::constant(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::zero(),
        (Some(x), _) if x == 1.0 => b.clone(),
        (_, Some(y)) if y == 1.0 => a.clone(),
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::from_node(Node::Mul(a.clone(), b.clone())),
    }
}

pub fn div(a: &Expr, b: &Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => Expr::constant(x / y),
        (Some(x), Some(y)) if x == 0.0 && y != 0.0 => Expr::zero(),
        (Some(x), None) if x == 0.0 => Expr::zero(),
        (_, Some(y)) if y == 1.0 => a.clone(),
        _ => Expr::from_node(Node::Div(a.clone(), b.clone())),
    }
}

pub fn neg(a: &Expr) -> Expr {
    match a.node() {
        Node::Const(c) => Expr::constant(-c),
        Node::Neg(inner) => inner.clone(),
        _ => Expr::from_node(Node::Neg(a.clone())),
    }
}

pub fn powi(a: &Expr, n: i32) -> Expr {
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return a.clone();
    }
    if let Some(c) = a.as_const() {
        if c != 0.0 || n > 0 {
            return Expr::constant(c.powi(n));
        }
    }
    if let Node::Powi(base, m) = a.node() {
        if let Some(k) = m.checked_mul(n) {
            return powi(base, k);
        }
    }
    Expr::from_node(Node::Powi(a.clone(), n))
}

/// Balanced sum, keeping tree depth logarithmic in the number of terms.
pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
    let mut terms: Vec<Expr> = terms.into_iter().filter(|t| !t.is_zero()).collect();
    if terms.is_empty() {
        return Expr::zero();
    }
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut it = terms.chunks(2);
        for pair in &mut it {
            match pair {
                [a, b] => next.push(add(a, b)),
                [a] => next.push(a.clone()),
                _ => unreachable!(),
            }
        }
        terms = next;
    }
    terms.pop().unwrap()
}

fn diff_rec(e: &Expr, var: usize, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.addr()) {
        return d.clone();
    }
    let d = match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(i) => {
            if *i == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Add(a, b) => add(&diff_rec(a, var, memo), &diff_rec(b, var, memo)),
        Node::Sub(a, b) => sub(&diff_rec(a, var, memo), &diff_rec(b, var, memo)),
        Node::Mul(a, b) => {
            let da = diff_rec(a, var, memo);
            let db = diff_rec(b, var, memo);
            add(&mul(&da, b), &mul(a, &db))
        }
        Node::Div(a, b) => {
            let da = diff_rec(a, var, memo);
            let db = diff_rec(b, var, memo);
            if db.is_zero() {
                div(&da, b)
            } else {
                // (a'b - ab') / b^2
                div(&sub(&mul(&da, b), &mul(a, &db)), &powi(b, 2))
            }
        }
        Node::Neg(a) => neg(&diff_rec(a, var, memo)),
        Node::Powi(a, n) => {
            let da = diff_rec(a, var, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                mul(&mul(&Expr::constant(*n as f64), &powi(a, n - 1)), &da)
            }
        }
        Node::Sqrt(a) => {
            let da = diff_rec(a, var, memo);
            div(&da, &mul(&Expr::constant(2.0), e))
        }
        Node::Exp(a) => mul(e, &diff_rec(a, var, memo)),
        Node::Log(a) => div(&diff_rec(a, var, memo), a),
        Node::Sin(a) => mul(&a.cos(), &diff_rec(a, var, memo)),
        Node::Cos(a) => neg(&mul(&a.sin(), &diff_rec(a, var, memo))),
    };
    memo.insert(e.addr(), d.clone());
    d
}

macro_rules! bin_op {
    ($tr:ident, $m:ident, $f:ident) => {
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $f(self, rhs)
            }
        }
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $f(&self, &rhs)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $f(&self, rhs)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $f(self, &rhs)
            }
        }
        impl $tr<f64> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                $f(self, &Expr::constant(rhs))
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                $f(&self, &Expr::constant(rhs))
            }
        }
        impl $tr<&Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                $f(&Expr::constant(self), rhs)
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                $f(&Expr::constant(self), &rhs)
            }
        }
    };
}

bin_op!(Add, add, add);
bin_op!(Sub, sub, sub);
bin_op!(Mul, mul, mul);
bin_op!(Div, div, div);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(&self)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

struct Named<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

fn precedence(n: &Node) -> u8 {
    match n {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Powi(..) => 4,
        Node::Const(c) if *c < 0.0 => 3,
        _ => 5,
    }
}

fn write_expr(
    f: &mut fmt::Formatter<'_>,
    e: &Expr,
    names: &[String],
    parent: u8,
    right: bool,
) -> fmt::Result {
    let p = precedence(e.node());
    let paren = p < parent || (right && p == parent && p <= 2);
    if paren {
        f.write_str("(")?;
    }
    match e.node() {
        Node::Const(c) => write!(f, "{c}")?,
        Node::Var(i) => match names.get(*i) {
            Some(n) => f.write_str(n)?,
            None => write!(f, "x{i}")?,
        },
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            let op = match e.node() {
                Node::Add(..) => " + ",
                Node::Sub(..) => " - ",
                Node::Mul(..) => "*",
                _ => "/",
            };
            write_expr(f, a, names, p, false)?;
            f.write_str(op)?;
            write_expr(f, b, names, p, true)?;
        }
        Node::Neg(a) => {
            f.write_str("-")?;
            write_expr(f, a, names, 4, false)?;
        }
        Node::Powi(a, n) => {
            write_expr(f, a, names, 5, false)?;
            if *n < 0 {
                write!(f, "^({n})")?;
            } else {
                write!(f, "^{n}")?;
            }
        }
        Node::Sqrt(a) | Node::Exp(a) | Node::Log(a) | Node::Sin(a) | Node::Cos(a) => {
            let name = match e.node() {
                Node::Sqrt(_) => "sqrt",
                Node::Exp(_) => "exp",
                Node::Log(_) => "log",
                Node::Sin(_) => "sin",
                _ => "cos",
            };
            write!(f, "{name}(")?;
            write_expr(f, a, names, 0, false)?;
            f.write_str(")")?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, self.names, 0, false)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, &[], 0, false)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Powi(u32, i32),
    Sqrt(u32),
    Exp(u32),
    Log(u32),
    Sin(u32),
    Cos(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Var(usize),
    Bin(u8, u32, u32),
    Un(u8, u32),
    Powi(u32, i32),
}

/// A batch of expressions flattened into a single instruction tape with
/// common subexpressions merged. Evaluating a program at a point computes
/// every shared subtree exactly once.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    sources: Vec<Expr>,
    outputs: Vec<u32>,
}

struct Compiler {
    ops: Vec<Op>,
    sources: Vec<Expr>,
    by_addr: HashMap<usize, u32>,
    by_key: HashMap<Key, u32>,
}

impl Compiler {
    fn push(&mut self, key: Key, op: Op, src: &Expr) -> u32 {
        if let Some(&slot) = self.by_key.get(&key) {
            return slot;
        }
        let slot = self.ops.len() as u32;
        self.ops.push(op);
        self.sources.push(src.clone());
        self.by_key.insert(key, slot);
        slot
    }

    fn visit(&mut self, e: &Expr) -> u32 {
        if let Some(&slot) = self.by_addr.get(&e.addr()) {
            return slot;
        }
        let slot = match e.node() {
            Node::Const(c) => self.push(Key::Const(c.to_bits()), Op::Const(*c), e),
            Node::Var(i) => self.push(Key::Var(*i), Op::Var(*i), e),
            Node::Add(a, b) | Node::Mul(a, b) => {
                let (x, y) = (self.visit(a), self.visit(b));
                let (lo, hi) = (x.min(y), x.max(y));
                if matches!(e.node(), Node::Add(..)) {
                    self.push(Key::Bin(0, lo, hi), Op::Add(x, y), e)
                } else {
                    self.push(Key::Bin(2, lo, hi), Op::Mul(x, y), e)
                }
            }
            Node::Sub(a, b) => {
                let (x, y) = (self.visit(a), self.visit(b));
                self.push(Key::Bin(1, x, y), Op::Sub(x, y), e)
            }
            Node::Div(a, b) => {
                let (x, y) = (self.visit(a), self.visit(b));
                self.push(Key::Bin(3, x, y), Op::Div(x, y), e)
            }
            Node::Powi(a, n) => {
                let x = self.visit(a);
                self.push(Key::Powi(x, *n), Op::Powi(x, *n), e)
            }
            Node::Neg(a) => {
                let x = self.visit(a);
                self.push(Key::Un(0, x), Op::Neg(x), e)
            }
            Node::Sqrt(a) => {
                let x = self.visit(a);
                self.push(Key::Un(1, x), Op::Sqrt(x), e)
            }
            Node::Exp(a) => {
                let x = self.visit(a);
                self.push(Key::Un(2, x), Op::Exp(x), e)
            }
            Node::Log(a) => {
                let x = self.visit(a);
                self.push(Key::Un(3, x), Op::Log(x), e)
            }
            Node::Sin(a) => {
                let x = self.visit(a);
                self.push(Key::Un(4, x), Op::Sin(x), e)
            }
            Node::Cos(a) => {
                let x = self.visit(a);
                self.push(Key::Un(5, x), Op::Cos(x), e)
            }
        };
        self.by_addr.insert(e.addr(), slot);
        slot
    }
}

impl Program {
    pub fn compile(exprs: &[Expr]) -> Self {
        let mut c = Compiler {
            ops: Vec::new(),
            sources: Vec::new(),
            by_addr: HashMap::new(),
            by_key: HashMap::new(),
        };
        let outputs = exprs.iter().map(|e| c.visit(e)).collect();
        Program {
            ops: c.ops,
            sources: c.sources,
            outputs,
        }
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    /// Evaluates all outputs at `point`, using `scratch` as the tape buffer.
    pub fn eval_into(
        &self,
        point: &[f64],
        scratch: &mut Vec<f64>,
        out: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        scratch.clear();
        scratch.reserve(self.ops.len());
        for (idx, op) in self.ops.iter().enumerate() {
            let r = |s: &u32| scratch[*s as usize];
            let fail = |kind| EvalError {
                kind,
                subexpr: self.sources[idx].clone(),
                point: point.to_vec(),
            };
            let v = match op {
                Op::Const(c) => *c,
                Op::Var(i) => *point
                    .get(*i)
                    .ok_or_else(|| fail(SingularityKind::CoordinateOutOfRange))?,
                Op::Add(a, b) => r(a) + r(b),
                Op::Sub(a, b) => r(a) - r(b),
                Op::Mul(a, b) => r(a) * r(b),
                Op::Div(a, b) => {
                    let den = r(b);
                    if den == 0.0 {
                        return Err(fail(SingularityKind::DivisionByZero));
                    }
                    r(a) / den
                }
                Op::Neg(a) => -r(a),
                Op::Powi(a, n) => {
                    let base = r(a);
                    if base == 0.0 && *n < 0 {
                        return Err(fail(SingularityKind::DivisionByZero));
                    }
                    base.powi(*n)
                }
                Op::Sqrt(a) => {
                    let x = r(a);
                    if x < 0.0 {
                        return Err(fail(SingularityKind::SqrtOfNegative));
                    }
                    x.sqrt()
                }
                Op::Exp(a) => r(a).exp(),
                Op::Log(a) => {
                    let x = r(a);
                    if x <= 0.0 {
                        return Err(fail(SingularityKind::LogOfNonPositive));
                    }
                    x.ln()
                }
                Op::Sin(a) => r(a).sin(),
                Op::Cos(a) => r(a).cos(),
            };
            if !v.is_finite() {
                return Err(fail(SingularityKind::NonFinite));
            }
            scratch.push(v);
        }
        out.clear();
        out.extend(self.outputs.iter().map(|&s| scratch[s as usize]));
        Ok(())
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut scratch = Vec::new();
        let mut out = Vec::new();
        self.eval_into(point, &mut scratch, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(0)
    }
    fn y() -> Expr {
        Expr::var(1)
    }

    #[test]
    fn constant_derivative_is_zero() {
        let c = Expr::constant(3.5);
        assert!(c.diff(0).is_zero());
        assert!(c.diff(3).is_zero());
    }

    #[test]
    fn power_rule() {
        let f = x().powi(2);
        let d = f.diff(0);
        assert_eq!(d.eval(&[1.5]).unwrap(), 3.0);
        assert!(f.diff(1).is_zero());
    }

    #[test]
    fn log_derivative_matches_central_difference() {
        // f = log(1 + u^2 + v^2), df/du at (1, 0) = 2u / (1 + u^2 + v^2) = 1
        let f = (1.0 + x().powi(2) + y().powi(2)).ln();
        let d = f.diff(0).eval(&[1.0, 0.0]).unwrap();
        let h = 1e-6;
        let fd = (f.eval(&[1.0 + h, 0.0]).unwrap() - f.eval(&[1.0 - h, 0.0]).unwrap()) / (2.0 * h);
        assert!((d - 1.0).abs() < 1e-14);
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn chain_rules() {
        let f = (x() * y()).sin() + x().exp() * y().cos() + (x().powi(2) + 1.0).sqrt();
        let p = [0.3, -0.7];
        let dx = f.diff(0).eval(&p).unwrap();
        let (a, b) = (p[0], p[1]);
        let expect = b * (a * b).cos() + a.exp() * b.cos() + a / (a * a + 1.0).sqrt();
        assert!((dx - expect).abs() < 1e-14);
        let dy = f.diff(1).eval(&p).unwrap();
        let expect_y = a * (a * b).cos() - a.exp() * b.sin();
        assert!((dy - expect_y).abs() < 1e-14);
    }

    #[test]
    fn quotient_rule() {
        let f = x() / (1.0 + y().powi(2));
        let p = [2.0, 0.5];
        let dy = f.diff(1).eval(&p).unwrap();
        let expect = -2.0 * 2.0 * 0.5 / (1.25f64).powi(2);
        assert!((dy - expect).abs() < 1e-14);
    }

    #[test]
    fn singularities_are_typed() {
        let f = (x() - 1.0).ln();
        let e = f.eval(&[0.5]).unwrap_err();
        assert_eq!(e.kind, SingularityKind::LogOfNonPositive);
        assert_eq!(e.point, vec![0.5]);
        let g = 1.0 / x();
        assert_eq!(g.eval(&[0.0]).unwrap_err().kind, SingularityKind::DivisionByZero);
        let s = x().sqrt();
        assert_eq!(s.eval(&[-1.0]).unwrap_err().kind, SingularityKind::SqrtOfNegative);
        let p = Program::compile(&[f.clone()]);
        assert_eq!(p.eval(&[0.5]).unwrap_err().kind, SingularityKind::LogOfNonPositive);
    }

    #[test]
    fn program_matches_tree_evaluation_and_merges_subtrees() {
        let a = (1.0 + x().powi(2) + y().powi(2)).ln();
        let b = (1.0 + x().powi(2) + y().powi(2)).ln();
        let exprs = vec![a.diff(0), b.diff(1), a.clone() * b.clone(), a.clone()];
        let prog = Program::compile(&exprs);
        let p = [0.4, 1.3];
        let out = prog.eval(&p).unwrap();
        for (e, v) in exprs.iter().zip(&out) {
            assert_eq!(e.eval(&p).unwrap(), *v);
        }
        // `a` and `b` are separately built but structurally identical.
        let single = Program::compile(&[a]);
        let doubled = Program::compile(&[b.clone(), b]);
        assert_eq!(single.num_ops(), doubled.num_ops());
    }

    #[test]
    fn folding_rules() {
        assert!((x() * 0.0).is_zero());
        let z = x();
        assert!((&z - &z).is_zero());
        assert!((0.0 / x()).is_zero());
        assert!(x().powi(0).is_one());
        assert_eq!((x() * 1.0).to_string(), "x0");
        assert_eq!((-(-x())).to_string(), "x0");
    }

    #[test]
    fn display_round_trips_precedence() {
        let names = vec!["u".to_string(), "v".to_string()];
        let e = (x() - (y() - 1.0)) * (x() + y()).powi(2);
        assert_eq!(e.display_with(&names).to_string(), "(u - (v - 1))*(u + v)^2");
    }
}
