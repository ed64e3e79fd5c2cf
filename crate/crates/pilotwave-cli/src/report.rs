//! Machine-readable run reports: one named check per verified property, a
//! pass/fail verdict each, and deterministic JSON output.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// value < threshold passes.
    Below,
    /// value > threshold passes.
    Above,
    /// |value − target| < tolerance passes (target carried separately).
    Near,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub comparison: Comparison,
    pub pass: bool,
}

impl CheckResult {
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            target: None,
            comparison: Comparison::Below,
            pass: value < threshold,
        }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            target: None,
            comparison: Comparison::Above,
            pass: value > threshold,
        }
    }

    pub fn near(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: tolerance,
            target: Some(target),
            comparison: Comparison::Near,
            pass: (value - target).abs() < tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub scenario: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    /// Relative paths of every artifact the run wrote.
    pub outputs: Vec<String>,
    /// Elapsed wall time in seconds (excluded from determinism comparisons
    /// by being written to a separate file).
    #[serde(skip)]
    pub elapsed_seconds: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for c in &self.checks {
            let verdict = if c.pass { "pass" } else { "FAIL" };
            let relation = match c.comparison {
                Comparison::Below => format!("{:.6e} < {:.6e}", c.value, c.threshold),
                Comparison::Above => format!("{:.6e} > {:.6e}", c.value, c.threshold),
                Comparison::Near => format!(
                    "{:.6e} within {:.3e} of {:.6e}",
                    c.value,
                    c.threshold,
                    c.target.unwrap_or(f64::NAN)
                ),
            };
            lines.push(format!("[{verdict}] {}: {relation}", c.name));
        }
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons_behave() {
        assert!(CheckResult::below("a", 0.1, 0.5).pass);
        assert!(!CheckResult::below("a", 0.5, 0.1).pass);
        assert!(CheckResult::above("b", 0.5, 0.2).pass);
        assert!(CheckResult::near("c", 0.51, 0.5, 0.02).pass);
        assert!(!CheckResult::near("c", 0.55, 0.5, 0.02).pass);
    }

    #[test]
    fn report_serialization_is_deterministic() {
        let report = RunReport {
            schema: 1,
            scenario: "x".into(),
            seed: 1,
            checks: vec![CheckResult::below("a", 0.1, 0.5)],
            outputs: vec!["a.csv".into()],
            elapsed_seconds: 1.0,
            warnings: vec![],
        };
        let a = serde_json::to_string(&report).unwrap();
        let b = serde_json::to_string(&report).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains("elapsed"));
    }
}
