use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};

use crate::dispersion::serialize_finite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Oracle,
    Smeared,
    Series,
}

/// One emitted number with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_over_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_over_x: Option<f64>,
    #[serde(serialize_with = "serialize_finite")]
    pub value: f64,
    pub regular: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_estimate: Option<f64>,
    /// Free-form qualifier, e.g. the vacuum classification.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub provenance: Provenance,
}

impl PointResult {
    pub fn new(quantity: impl Into<String>, value: f64, regular: bool, provenance: Provenance) -> Self {
        Self {
            quantity: quantity.into(),
            tau_over_x: None,
            sigma_over_x: None,
            value,
            regular,
            error_estimate: None,
            label: None,
            provenance,
        }
    }

    pub fn at_tau(mut self, tau_over_x: f64) -> Self {
        self.tau_over_x = Some(tau_over_x);
        self
    }

    pub fn at_sigma(mut self, sigma_over_x: f64) -> Self {
        self.sigma_over_x = Some(sigma_over_x);
        self
    }

    pub fn with_error(mut self, error: f64) -> Self {
        self.error_estimate = Some(error);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    #[serde(serialize_with = "serialize_finite")]
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckOutcome {
    /// Passes when `measured <= threshold`.
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: measured <= threshold,
            measured,
            threshold,
            detail: detail.into(),
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            measured: if passed { 0.0 } else { 1.0 },
            threshold: 0.0,
            detail: detail.into(),
        }
    }

    pub fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::flag(name, false, detail)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub command: Vec<String>,
    pub params: Value,
    pub results: Vec<PointResult>,
    pub checks: Vec<CheckOutcome>,
    pub duration: Option<Duration>,
}

impl RunReport {
    pub fn new(command: Vec<String>, params: Value) -> Self {
        Self {
            command,
            params,
            ..Self::default()
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_count(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn to_json(&self) -> Value {
        let mut report = json!({ "command": self.command });
        if let Some(d) = self.duration {
            report["duration_ms"] = json!(d.as_secs_f64() * 1e3);
        }
        if !self.checks.is_empty() {
            report["checks"] = json!(self.checks);
            report["summary"] = json!({
                "passed": self.checks.len() - self.failed_count(),
                "failed": self.failed_count(),
            });
        }
        json!({
            "params": self.params,
            "results": self.results,
            "report": report,
        })
    }

    /// Aligned pass/fail table for the verification suite.
    pub fn check_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "{status}  {:<width$}  {:>11.3e} / {:<9.1e} {}\n",
                c.name, c.measured, c.threshold, c.detail
            ));
        }
        out.push_str(&format!(
            "{} passed, {} failed",
            self.checks.len() - self.failed_count(),
            self.failed_count()
        ));
        if let Some(d) = self.duration {
            out.push_str(&format!(" in {:.2} s", d.as_secs_f64()));
        }
        out.push('\n');
        out
    }
}
