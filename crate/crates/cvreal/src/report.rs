//! Shared result type for every entanglement criterion in the crate.

use serde::Serialize;

/// Half-width of the band around the threshold inside which a result is
/// reported as boundary rather than as a verdict.
pub const BOUNDARY_BAND: f64 = 1e-9;

/// Which of the two sign branches produced the reported value. The second
/// branch evaluates the same formulas on the kernel with `(c1, c2)` negated,
/// which is what appending the parity operator amounts to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plain,
    PiAppended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Separable,
    Entangled,
    Boundary,
}

/// Outcome of one criterion evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    /// Criterion value; for realignment-type criteria this is a certified lower
    /// bound on the trace norm of the realigned matrix.
    pub value: f64,
    /// Detection threshold the value is compared against.
    pub threshold: f64,
    /// True when crossing the threshold upward signals entanglement; false when
    /// the detecting direction is downward (second-moment style criteria).
    pub detects_above: bool,
    pub branch: Branch,
    /// Set when the value is only certified as a lower bound on the trace norm,
    /// not as the trace norm itself.
    pub lower_bound_only: bool,
    pub notes: Vec<String>,
}

impl CriterionReport {
    pub fn verdict(&self) -> Verdict {
        let d = self.value - self.threshold;
        if d.abs() <= BOUNDARY_BAND {
            Verdict::Boundary
        } else if (d > 0.0) == self.detects_above {
            Verdict::Entangled
        } else {
            Verdict::Separable
        }
    }

    pub fn entangled(&self) -> bool {
        self.verdict() == Verdict::Entangled
    }
}
