//! Foliated coordinate charts.
//!
//! A chart has real dimension `2n + 2`. Two coordinates are leafwise (the
//! foliation directions, conventionally `x` and `y`); the remaining `2n` are
//! transverse and are paired in listed order into complex coordinates
//! `z^j = u^j + i v^j`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::parse::{parse_expr, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("chart dimension {0} must be even and at least 4")]
    BadDimension(usize),
    #[error("expected {expected} coordinate intervals, got {got}")]
    DomainLength { expected: usize, got: usize },
    #[error("interval for `{name}` has non-positive length: [{lo}, {hi}]")]
    EmptyInterval { name: String, lo: f64, hi: f64 },
    #[error("leaf coordinates ({0}, {1}) must be two distinct valid indices")]
    BadLeaf(usize, usize),
    #[error("duplicate coordinate name `{0}`")]
    DuplicateName(String),
    #[error("point has {got} coordinates, chart has {expected}")]
    PointLength { expected: usize, got: usize },
    #[error("coordinate `{name}` = {value} lies outside [{lo}, {hi}]")]
    OutsideDomain {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    coord_names: Vec<String>,
    domain: Vec<Interval>,
    leaf: [usize; 2],
    /// Optional bound on the Euclidean norm of the transverse coordinates.
    transverse_radius: Option<f64>,
}

impl ChartSpec {
    pub fn new(
        coord_names: Vec<String>,
        domain: Vec<Interval>,
        leaf: [usize; 2],
    ) -> Result<Self, ChartError> {
        let dim = coord_names.len();
        if dim < 4 || dim % 2 != 0 {
            return Err(ChartError::BadDimension(dim));
        }
        if domain.len() != dim {
            return Err(ChartError::DomainLength {
                expected: dim,
                got: domain.len(),
            });
        }
        for (i, name) in coord_names.iter().enumerate() {
            if coord_names[..i].contains(name) {
                return Err(ChartError::DuplicateName(name.clone()));
            }
        }
        for (name, iv) in coord_names.iter().zip(&domain) {
            if !(iv.len() > 0.0) {
                return Err(ChartError::EmptyInterval {
                    name: name.clone(),
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
        }
        if leaf[0] == leaf[1] || leaf[0] >= dim || leaf[1] >= dim {
            return Err(ChartError::BadLeaf(leaf[0], leaf[1]));
        }
        Ok(ChartSpec {
            coord_names,
            domain,
            leaf,
            transverse_radius: None,
        })
    }

    /// Restricts the sampling region to `|transverse coords| <= radius`.
    pub fn with_transverse_radius(mut self, radius: f64) -> Self {
        self.transverse_radius = Some(radius);
        self
    }

    /// Standard chart with coordinates `u1 v1 ... un vn x y`, every interval
    /// equal to `[-half_width, half_width]`.
    pub fn standard(n: usize, half_width: f64) -> Self {
        let mut names = Vec::new();
        if n == 1 {
            names.push("u".to_string());
            names.push("v".to_string());
        } else {
            for j in 1..=n {
                names.push(format!("u{j}"));
                names.push(format!("v{j}"));
            }
        }
        names.push("x".to_string());
        names.push("y".to_string());
        let dim = names.len();
        let domain = vec![Interval::new(-half_width, half_width); dim];
        ChartSpec::new(names, domain, [dim - 2, dim - 1]).expect("standard chart is valid")
    }

    pub fn dim(&self) -> usize {
        self.coord_names.len()
    }

    /// Complex transverse dimension.
    pub fn n(&self) -> usize {
        self.dim() / 2 - 1
    }

    pub fn coord_names(&self) -> &[String] {
        &self.coord_names
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn leaf(&self) -> [usize; 2] {
        self.leaf
    }

    pub fn transverse_radius(&self) -> Option<f64> {
        self.transverse_radius
    }

    /// Transverse coordinate indices in listed order.
    pub fn transverse(&self) -> Vec<usize> {
        (0..self.dim()).filter(|i| !self.leaf.contains(i)).collect()
    }

    /// Pairs `(u^j, v^j)` of transverse indices.
    pub fn complex_pairs(&self) -> Vec<(usize, usize)> {
        self.transverse()
            .chunks(2)
            .map(|c| (c[0], c[1]))
            .collect()
    }

    pub fn coord(&self, i: usize) -> Expr {
        assert!(i < self.dim(), "coordinate index {i} out of range");
        Expr::var(i)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coord_names.iter().position(|n| n == name)
    }

    pub fn parse(&self, src: &str) -> Result<Expr, ParseError> {
        parse_expr(src, &self.coord_names)
    }

    /// Whether `p` lies in the sampling region shrunk by `margin`.
    pub fn in_region(&self, p: &[f64], margin: f64) -> bool {
        if p.len() != self.dim() {
            return false;
        }
        let boxed = p
            .iter()
            .zip(&self.domain)
            .all(|(x, iv)| *x >= iv.lo + margin && *x <= iv.hi - margin);
        boxed
            && self.transverse_radius.is_none_or(|r| {
                let s: f64 = self.transverse().iter().map(|&i| p[i] * p[i]).sum();
                s.sqrt() <= r - margin
            })
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<PointSample, ChartError> {
        if coords.len() != self.dim() {
            return Err(ChartError::PointLength {
                expected: self.dim(),
                got: coords.len(),
            });
        }
        for ((x, iv), name) in coords.iter().zip(&self.domain).zip(&self.coord_names) {
            if !iv.contains(*x) {
                return Err(ChartError::OutsideDomain {
                    name: name.clone(),
                    value: *x,
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
        }
        Ok(PointSample { coords })
    }
}

/// A validated point of a chart's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSample {
    coords: Vec<f64>,
}

impl PointSample {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

impl AsRef<[f64]> for PointSample {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_chart_layout() {
        let c = ChartSpec::standard(2, 1.0);
        assert_eq!(c.dim(), 6);
        assert_eq!(c.n(), 2);
        assert_eq!(c.leaf(), [4, 5]);
        assert_eq!(c.complex_pairs(), vec![(0, 1), (2, 3)]);
        assert_eq!(c.index_of("v2"), Some(3));
    }

    #[test]
    fn rejects_invalid_charts() {
        let names = |k: usize| (0..k).map(|i| format!("c{i}")).collect::<Vec<_>>();
        let iv = |k: usize| vec![Interval::new(0.0, 1.0); k];
        assert_eq!(
            ChartSpec::new(names(3), iv(3), [0, 1]),
            Err(ChartError::BadDimension(3))
        );
        assert_eq!(
            ChartSpec::new(names(2), iv(2), [0, 1]),
            Err(ChartError::BadDimension(2))
        );
        assert!(matches!(
            ChartSpec::new(names(4), iv(4), [2, 2]),
            Err(ChartError::BadLeaf(2, 2))
        ));
        assert!(matches!(
            ChartSpec::new(names(4), iv(4), [2, 4]),
            Err(ChartError::BadLeaf(..))
        ));
        let mut bad = iv(4);
        bad[1] = Interval::new(1.0, 1.0);
        assert!(matches!(
            ChartSpec::new(names(4), bad, [2, 3]),
            Err(ChartError::EmptyInterval { .. })
        ));
    }

    #[test]
    fn point_validation_and_region() {
        let c = ChartSpec::standard(1, 3.0).with_transverse_radius(3.0);
        assert!(c.point(vec![0.0, 0.0, 1.0, 1.0]).is_ok());
        assert!(matches!(
            c.point(vec![4.0, 0.0, 1.0, 1.0]),
            Err(ChartError::OutsideDomain { .. })
        ));
        assert!(c.in_region(&[2.0, 2.0, 0.0, 0.0], 0.0));
        assert!(!c.in_region(&[2.5, 2.5, 0.0, 0.0], 0.0));
        assert!(!c.in_region(&[3.0, 0.0, 0.0, 0.0], 1e-3));
    }
}
