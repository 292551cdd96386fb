//! Batched evaluation of many checks over a grid.
//!
//! All expressions needed by a set of checks go into one [`Program`], so
//! shared subtrees are evaluated once per point. Each check then reduces
//! its slice of the output vector to a single per-point value.

use std::ops::Range;

use crate::expr::{Expr, Program};
use crate::grid::SampleGrid;
use crate::report::{CheckKind, CheckRecord};

/// Why a check produced no value at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skip {
    SingularMetric,
}

type PointFn = Box<dyn Fn(&[f64], &[f64]) -> Result<f64, Skip> + Send + Sync>;

struct CheckDef {
    name: String,
    anchor: &'static str,
    kind: CheckKind,
    tolerance: f64,
    eval: PointFn,
}

#[derive(Default)]
pub struct Suite {
    exprs: Vec<Expr>,
    checks: Vec<CheckDef>,
}

pub(crate) fn max_abs(vals: &[f64]) -> f64 {
    vals.iter().fold(0.0, |m, v| {
        if v.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(v.abs())
        }
    })
}

impl Suite {
    pub fn new() -> Self {
        Suite::default()
    }

    /// Appends expressions to the shared batch and returns their slot range.
    pub fn slot(&mut self, exprs: impl IntoIterator<Item = Expr>) -> Range<usize> {
        let start = self.exprs.len();
        self.exprs.extend(exprs);
        start..self.exprs.len()
    }

    /// A check whose per-point value is the largest absolute entry of `exprs`.
    pub fn residual(&mut self, name: &str, anchor: &'static str, tolerance: f64, exprs: Vec<Expr>) {
        let r = self.slot(exprs);
        self.custom(name, anchor, CheckKind::Residual, tolerance, move |_, v| {
            Ok(max_abs(&v[r.clone()]))
        });
    }

    /// A check computed by `f(point, values)` from previously reserved slots.
    /// For [`CheckKind::LowerBound`] the tolerance is the floor.
    pub fn custom(
        &mut self,
        name: &str,
        anchor: &'static str,
        kind: CheckKind,
        tolerance: f64,
        f: impl Fn(&[f64], &[f64]) -> Result<f64, Skip> + Send + Sync + 'static,
    ) {
        self.checks.push(CheckDef {
            name: name.to_string(),
            anchor,
            kind,
            tolerance,
            eval: Box::new(f),
        });
    }

    pub fn len(&self) -> usize {
        self.checks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }

    /// Evaluates every check at every grid point. Points where the batch
    /// cannot be evaluated are skipped by all checks.
    pub fn run(&self, grid: &SampleGrid) -> Vec<CheckRecord> {
        let program = Program::compile(&self.exprs);
        let per_point: Vec<Vec<Option<f64>>> = grid.map(|p| {
            let mut scratch = Vec::new();
            let mut vals = Vec::new();
            match program.eval_into(p, &mut scratch, &mut vals) {
                Ok(()) => self
                    .checks
                    .iter()
                    .map(|c| (c.eval)(p, &vals).ok())
                    .collect(),
                Err(_) => vec![None; self.checks.len()],
            }
        });
        self.checks
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let values: Vec<Option<f64>> = per_point.iter().map(|v| v[i]).collect();
                CheckRecord::from_values(&c.name, c.anchor, c.kind, c.tolerance, grid.points(), &values)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_reduces_in_point_order() {
        let grid = SampleGrid::from_points(vec![vec![1.0], vec![-3.0], vec![0.0]]);
        let mut s = Suite::new();
        s.residual("abs", "integrability", 2.0, vec![Expr::var(0)]);
        let r = s.slot([Expr::one() / Expr::var(0)]);
        s.custom("inv", "integrability", CheckKind::Residual, 1.0, move |_, v| {
            Ok(v[r.start])
        });
        let recs = s.run(&grid);
        assert_eq!(recs[0].max_residual, 3.0);
        assert!(!recs[0].pass);
        // the pole at 0 makes the whole batch fail there
        assert_eq!(recs[0].skipped, 1);
        assert_eq!(recs[1].max_residual, 1.0);
    }
}
