//! Per-check records shared by the verification modules and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ExpectedFail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub anchor: String,
    pub status: Status,
    pub residual_valuation: Option<i64>,
    pub threshold: Option<i64>,
    pub millis: Option<u64>,
    pub detail: String,
}

impl Check {
    /// Passes iff `residual ≥ threshold`.
    pub fn measured(
        name: impl Into<String>,
        anchor: &str,
        residual: i64,
        threshold: i64,
        detail: impl Into<String>,
    ) -> Self {
        Check {
            name: name.into(),
            anchor: anchor.to_string(),
            status: if residual >= threshold {
                Status::Pass
            } else {
                Status::Fail
            },
            residual_valuation: Some(residual),
            threshold: Some(threshold),
            millis: None,
            detail: detail.into(),
        }
    }

    pub fn flag(
        name: impl Into<String>,
        anchor: &str,
        ok: bool,
        detail: impl Into<String>,
    ) -> Self {
        Check {
            name: name.into(),
            anchor: anchor.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            residual_valuation: None,
            threshold: None,
            millis: None,
            detail: detail.into(),
        }
    }

    pub fn failed(name: impl Into<String>, anchor: &str, err: &LabError) -> Self {
        Check::flag(name, anchor, false, err.to_string())
    }

    pub fn skipped(name: impl Into<String>, anchor: &str, why: impl Into<String>) -> Self {
        Check {
            status: Status::Skipped,
            ..Check::flag(name, anchor, true, why)
        }
    }

    /// Turns a detected failure into the expected outcome of a negative
    /// control, and an unexpected pass into a failure.
    pub fn expect_failure(mut self) -> Self {
        self.status = match self.status {
            Status::Fail => Status::ExpectedFail,
            Status::Pass => {
                self.detail = format!("negative control did not fail: {}", self.detail);
                Status::Fail
            }
            s => s,
        };
        self
    }

    pub fn passed(&self) -> bool {
        matches!(self.status, Status::Pass)
    }

    /// Whether this check counts against the exit status.
    pub fn is_failure(&self) -> bool {
        matches!(self.status, Status::Fail)
    }
}

/// Runs a fallible check, recording an error as a failed check.
pub fn guarded(name: &str, anchor: &str, f: impl FnOnce() -> Result<Check, LabError>) -> Check {
    f().unwrap_or_else(|e| Check::failed(name, anchor, &e))
}

/// Like [`guarded`] for producers of several checks.
pub fn guarded_many(
    name: &str,
    anchor: &str,
    f: impl FnOnce() -> Result<Vec<Check>, LabError>,
) -> Vec<Check> {
    f().unwrap_or_else(|e| vec![Check::failed(name, anchor, &e)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses() {
        assert!(Check::measured("a", "x", 30, 28, "").passed());
        assert!(!Check::measured("a", "x", 27, 28, "").passed());
        let neg = Check::measured("n", "x", 1, 2, "").expect_failure();
        assert_eq!(neg.status, Status::ExpectedFail);
        assert!(!neg.is_failure());
        let bad = Check::measured("n", "x", 3, 2, "").expect_failure();
        assert!(bad.is_failure());
        let json = serde_json::to_string(&neg).unwrap();
        assert!(json.contains("\"expected-fail\""));
        let back: Check = serde_json::from_str(&json).unwrap();
        assert_eq!(back, neg);
    }
}
