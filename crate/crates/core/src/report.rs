use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The hypothesis of an implication did not hold on the sample, so the
    /// implication is vacuously satisfied.
    NotApplicable,
}

/// Outcome of one named check over a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub samples: usize,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, max_residual: f64, tolerance: f64, samples: usize) -> Self {
        let verdict = if max_residual < tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        CheckReport {
            name: name.into(),
            max_residual,
            tolerance,
            verdict,
            samples,
            notes: Vec::new(),
        }
    }

    pub fn failed(name: impl Into<String>, tolerance: f64, note: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            max_residual: f64::NAN,
            tolerance,
            verdict: Verdict::Fail,
            samples: 0,
            notes: vec![note.into()],
        }
    }

    pub fn pass(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Running maximum that propagates NaN as a failure.
pub(crate) fn max_abs(acc: f64, v: f64) -> f64 {
    if v.is_nan() || acc.is_nan() {
        f64::NAN
    } else {
        acc.max(v.abs())
    }
}
