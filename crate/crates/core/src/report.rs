//! Structured pass/fail records shared by the identity suite and the
//! quadrature module.

use serde::{Deserialize, Serialize};

/// Absolute floor under every relative-residual denominator, so identities
/// among near-zero quantities do not fail spuriously.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Relative residual against the largest term entering an identity.
pub fn rel_residual(diff: f64, scale: f64) -> f64 {
    diff.abs() / scale.abs().max(SCALE_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Identity or inequality satisfied within tolerance.
    Pass,
    /// Identity or inequality violated: a tool-level failure.
    Fail,
    /// Preconditions not met; the check does not apply (not a failure).
    Inapplicable,
    /// A pinching-style predicate holds at every sampled point.
    PredicateHolds,
    /// A pinching-style predicate fails at one or more points. This is a
    /// finding about the metric, not a tool failure.
    PredicateFails,
}

impl Verdict {
    /// Only `Fail` gates the process exit status.
    pub fn is_failure(self) -> bool {
        matches!(self, Verdict::Fail)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub verdict: Verdict,
    pub residual_or_margin: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// One check over one metric: residual (identities) or margin
/// (inequalities/predicates), the tolerance used, and the worst offender.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub metric: String,
    pub verdict: Verdict,
    /// Max relative residual for identities; min margin for inequalities.
    pub residual_or_margin: f64,
    pub tolerance: f64,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub subchecks: Vec<SubCheck>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn inapplicable(name: &str, metric: &str, points: usize, reason: String) -> Self {
        CheckReport {
            name: name.into(),
            metric: metric.into(),
            verdict: Verdict::Inapplicable,
            residual_or_margin: 0.0,
            tolerance: 0.0,
            points,
            worst_point: None,
            subchecks: Vec::new(),
            notes: vec![reason],
        }
    }
}

/// Tracks the worst residual (max) over a point loop.
#[derive(Debug, Clone, Default)]
pub struct WorstResidual {
    pub value: f64,
    pub point: Option<Vec<f64>>,
}

impl WorstResidual {
    pub fn update(&mut self, residual: f64, point: &[f64]) {
        if self.point.is_none() || residual > self.value {
            self.value = residual;
            self.point = Some(point.to_vec());
        }
    }
}

/// Tracks the worst margin (min) over a point loop.
#[derive(Debug, Clone)]
pub struct WorstMargin {
    pub value: f64,
    pub point: Option<Vec<f64>>,
}

impl Default for WorstMargin {
    fn default() -> Self {
        WorstMargin { value: f64::INFINITY, point: None }
    }
}

impl WorstMargin {
    pub fn update(&mut self, margin: f64, point: &[f64]) {
        if self.point.is_none() || margin < self.value {
            self.value = margin;
            self.point = Some(point.to_vec());
        }
    }
}
