//! Verification records and reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::deformation::AdmissibilityCertificate;
use crate::grid::{GridSpec, SampleGrid};

/// Every anchor string a record may carry.
pub const ANCHORS: &[&str] = &[
    "structure equation",
    "canonical foliation",
    "basic forms and basic de Rham derivative",
    "Lee-field parallelism",
    "Killing/holomorphy properties",
    "foliated charts",
    "potential-based complex structure",
    "transverse frame X_j",
    "transverse metric g^T",
    "complete deformation method",
    "J_t² = −Id claim",
    "integrability",
    "volume-form bound",
    "ω_t type-(1,1) claim",
    "LCS property",
    "positivity condition μ",
    "U-Killing",
    "unit norms",
    "det M_t closed form",
    "eigenvalue-positivity claim",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Passes when the largest residual is at most the tolerance.
    Residual,
    /// Passes when the smallest value exceeds a floor. Stored negated so
    /// that `pass` still means `max_residual <= tolerance`.
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    pub kind: CheckKind,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub worst_point: Option<Vec<f64>>,
    pub tolerance: f64,
    pub pass: bool,
    pub evaluated: usize,
    pub skipped: usize,
}

impl CheckRecord {
    /// Builds a record from per-point values (`None` marks a skipped point).
    pub fn from_values(
        name: &str,
        anchor: &str,
        kind: CheckKind,
        tolerance: f64,
        points: &[Vec<f64>],
        values: &[Option<f64>],
    ) -> Self {
        debug_assert!(ANCHORS.contains(&anchor), "unknown anchor {anchor}");
        let sign = match kind {
            CheckKind::Residual => 1.0,
            CheckKind::LowerBound => -1.0,
        };
        let mut max = f64::NEG_INFINITY;
        let mut worst = None;
        let mut total = 0.0;
        let mut evaluated = 0;
        let mut skipped = 0;
        for (p, v) in points.iter().zip(values) {
            match v {
                Some(v) => {
                    let r = sign * v;
                    evaluated += 1;
                    total += r;
                    // NaN residuals count as failures
                    if r > max || r.is_nan() && !max.is_nan() {
                        max = r;
                        worst = Some(p.clone());
                    }
                }
                None => skipped += 1,
            }
        }
        if evaluated == 0 {
            max = f64::INFINITY;
        }
        let tol = sign * tolerance;
        CheckRecord {
            name: name.to_string(),
            anchor: anchor.to_string(),
            kind,
            max_residual: max,
            mean_residual: if evaluated > 0 {
                total / evaluated as f64
            } else {
                f64::INFINITY
            },
            worst_point: worst,
            tolerance: tol,
            pass: max <= tol,
            evaluated,
            skipped,
        }
    }

    /// A record for a single scalar quantity.
    pub fn scalar(name: &str, anchor: &str, residual: f64, tolerance: f64) -> Self {
        CheckRecord::from_values(
            name,
            anchor,
            CheckKind::Residual,
            tolerance,
            &[Vec::new()],
            &[Some(residual)],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: f64,
    pub note: String,
}

impl Diagnostic {
    pub fn new(name: &str, value: f64, note: impl Into<String>) -> Self {
        Diagnostic {
            name: name.to_string(),
            value,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub wedge: String,
    pub anti_lee: String,
    pub fundamental_form: String,
    pub complex_operator: String,
    /// Sign `s` with `ω = s (dθ^c − θ∧θ^c)`.
    pub omega_structure_sign: i8,
    pub interior_of_lee_field: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            wedge: "determinant: (dx^dy)(d/dx, d/dy) = 1".into(),
            anti_lee: "theta^c = -theta o J".into(),
            fundamental_form: "omega(X, Y) = g(X, JY), g(X, Y) = omega(JX, Y)".into(),
            complex_operator: "d^c phi = -d phi o J".into(),
            omega_structure_sign: 1,
            interior_of_lee_field: "i_U omega = -theta^c".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub lattice: usize,
    pub random: usize,
    pub seed: u64,
    pub margin: f64,
    pub points: usize,
}

impl GridInfo {
    pub fn of(grid: &SampleGrid) -> Self {
        let GridSpec {
            lattice,
            random,
            seed,
            margin,
        } = grid.spec().clone();
        GridInfo {
            lattice,
            random,
            seed,
            margin,
            points: grid.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub subject: String,
    pub conventions: Conventions,
    pub grid: GridInfo,
    pub records: Vec<CheckRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<AdmissibilityCertificate>,
}

impl VerificationReport {
    pub fn new(subject: impl Into<String>, grid: &SampleGrid) -> Self {
        VerificationReport {
            subject: subject.into(),
            conventions: Conventions::default(),
            grid: GridInfo::of(grid),
            records: Vec::new(),
            diagnostics: Vec::new(),
            certificate: None,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
            && self.certificate.as_ref().is_none_or(|c| c.all_pass())
    }

    pub fn failing(&self) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| !r.pass)
            .map(|r| r.name.as_str())
            .collect()
    }

    pub fn record(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn diagnostic(&self, name: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.name == name)
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.records.extend(other.records);
        self.diagnostics.extend(other.diagnostics);
    }

    /// Largest fraction of skipped points over all records.
    pub fn skipped_fraction(&self) -> f64 {
        self.records
            .iter()
            .map(|r| {
                let total = r.evaluated + r.skipped;
                if total == 0 {
                    0.0
                } else {
                    r.skipped as f64 / total as f64
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Per-check tolerance overrides on top of a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub default: f64,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            default: 1e-8,
            overrides: BTreeMap::new(),
        }
    }
}

impl Tolerances {
    pub fn get(&self, name: &str) -> f64 {
        self.overrides.get(name).copied().unwrap_or(self.default)
    }

    /// Tolerance for `name`, falling back to `fallback` instead of the default.
    pub fn get_or(&self, name: &str, fallback: f64) -> f64 {
        self.overrides.get(name).copied().unwrap_or(fallback)
    }
}
