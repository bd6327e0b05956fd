//! Machine-readable reports and CSV time series.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::config::Check;
use crate::dynamics::ObservableDrift;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    pub verdict: Verdict,
    pub residual: f64,
    pub tolerance: f64,
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub schema: u64,
    pub config_sha256: String,
    pub seed: u64,
    pub sample_count: usize,
    pub kmax: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub command: String,
    pub experiment: Value,
    pub verdict: Verdict,
    pub checks: Vec<CheckResult>,
    pub drift: Vec<ObservableDrift>,
    pub notes: Vec<String>,
}

impl Report {
    /// Fail if any check failed, pass otherwise.
    pub fn overall(checks: &[CheckResult]) -> Verdict {
        if checks.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else {
            Verdict::Pass
        }
    }

    pub fn check(&self, check: Check) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == check)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// 17 significant digits, locale independent.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `time,<col1>,...`, one row per time.
pub fn csv(columns: &[String], times: &[f64], values: &[Vec<f64>]) -> String {
    let mut out = String::from("time");
    for c in columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (i, t) in times.iter().enumerate() {
        out.push_str(&format_f64(*t));
        for col in values {
            out.push(',');
            out.push_str(&format_f64(col[i]));
        }
        out.push('\n');
    }
    out
}
