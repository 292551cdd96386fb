//! Complex-valued fields as pairs of real expressions.

use crate::expr::{self, EvalError, Expr};
use crate::tensor::VectorField;

#[derive(Debug, Clone)]
pub struct ComplexExpr {
    pub re: Expr,
    pub im: Expr,
}

impl ComplexExpr {
    pub fn new(re: Expr, im: Expr) -> Self {
        ComplexExpr { re, im }
    }

    pub fn real(re: Expr) -> Self {
        ComplexExpr::new(re, Expr::zero())
    }

    /// `z = u + i v` from two coordinate indices.
    pub fn coordinate(u: usize, v: usize) -> Self {
        ComplexExpr::new(Expr::var(u), Expr::var(v))
    }

    pub fn conj(&self) -> Self {
        ComplexExpr::new(self.re.clone(), expr::neg(&self.im))
    }

    pub fn add(&self, o: &ComplexExpr) -> Self {
        ComplexExpr::new(&self.re + &o.re, &self.im + &o.im)
    }

    pub fn sub(&self, o: &ComplexExpr) -> Self {
        ComplexExpr::new(&self.re - &o.re, &self.im - &o.im)
    }

    pub fn mul(&self, o: &ComplexExpr) -> Self {
        ComplexExpr::new(
            &(&self.re * &o.re) - &(&self.im * &o.im),
            &(&self.re * &o.im) + &(&self.im * &o.re),
        )
    }

    pub fn eval(&self, p: &[f64]) -> Result<(f64, f64), EvalError> {
        Ok((self.re.eval(p)?, self.im.eval(p)?))
    }
}

/// Complex vector field `re + i·im`.
#[derive(Debug, Clone)]
pub struct ComplexVectorField {
    pub re: VectorField,
    pub im: VectorField,
}

impl ComplexVectorField {
    pub fn conj(&self) -> Self {
        ComplexVectorField {
            re: self.re.clone(),
            im: self.im.neg(),
        }
    }

    /// Multiplication by `i`.
    pub fn times_i(&self) -> Self {
        ComplexVectorField {
            re: self.im.neg(),
            im: self.re.clone(),
        }
    }

    pub fn sub(&self, o: &ComplexVectorField) -> Self {
        ComplexVectorField {
            re: self.re.sub(&o.re),
            im: self.im.sub(&o.im),
        }
    }

    pub fn comps(&self) -> Vec<Expr> {
        let mut v = self.re.comps().to_vec();
        v.extend_from_slice(self.im.comps());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_arithmetic() {
        let z = ComplexExpr::coordinate(0, 1);
        let zz = z.mul(&z.conj());
        let (re, im) = zz.eval(&[3.0, 4.0]).unwrap();
        assert_eq!((re, im), (25.0, 0.0));
        let (re, im) = z.mul(&z).eval(&[1.0, 1.0]).unwrap();
        assert_eq!((re, im), (0.0, 2.0));
    }
}
