//! Outcome of an exhaustive consistency scan.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Result of checking an identity over every instance of a finite scan.
///
/// `witness` names the instance with the largest violation (the first one in
/// scan order on ties) and is only attached when the check fails.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub passed: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, String>>,
}

impl ConsistencyReport {
    pub fn vacuous(tolerance: f64) -> Self {
        ConsistencyReport {
            passed: true,
            worst_violation: 0.0,
            tolerance,
            witness: None,
        }
    }

    /// Combines reports from disjoint parts of one scan; earlier reports win ties.
    pub fn merge(self, other: ConsistencyReport) -> ConsistencyReport {
        let tolerance = self.tolerance.max(other.tolerance);
        let worst = if other.worst_violation > self.worst_violation {
            other
        } else {
            self
        };
        let passed = worst.worst_violation <= tolerance;
        ConsistencyReport {
            passed,
            worst_violation: worst.worst_violation,
            tolerance,
            witness: if passed { None } else { worst.witness },
        }
    }
}

/// Accumulates the running maximum violation of a scan.
pub(crate) struct ViolationTracker {
    tolerance: f64,
    worst: f64,
    witness: Option<BTreeMap<String, String>>,
}

impl ViolationTracker {
    pub(crate) fn new(tolerance: f64) -> Self {
        ViolationTracker {
            tolerance,
            worst: 0.0,
            witness: None,
        }
    }

    /// Records one residual. NaN counts as an infinite violation.
    pub(crate) fn observe(
        &mut self,
        violation: f64,
        witness: impl FnOnce() -> Vec<(&'static str, String)>,
    ) {
        let v = if violation.is_nan() {
            f64::INFINITY
        } else {
            violation.abs()
        };
        if v > self.worst || (self.witness.is_none() && v > self.tolerance) {
            self.worst = self.worst.max(v);
            self.witness = Some(
                witness()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            );
        }
    }

    pub(crate) fn finish(self) -> ConsistencyReport {
        let passed = self.worst <= self.tolerance;
        ConsistencyReport {
            passed,
            worst_violation: self.worst,
            tolerance: self.tolerance,
            witness: if passed { None } else { self.witness },
        }
    }
}
