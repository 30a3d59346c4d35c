//! Machine-readable certificate records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    /// Boolean condition; `measured` is 1 for true.
    #[serde(rename = "holds")]
    Holds,
}

impl Relation {
    pub fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Relation::Le => measured <= threshold,
            Relation::Lt => measured < threshold,
            Relation::Ge => measured >= threshold,
            Relation::Gt => measured > threshold,
            Relation::Holds => measured == 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub name: String,
    #[serde(default)]
    pub inputs_hash: String,
    pub checks: Vec<Check>,
    pub values: BTreeMap<String, Value>,
    pub passed: bool,
    #[serde(default)]
    pub wall_time_s: f64,
}

impl CertificateReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            inputs_hash: String::new(),
            checks: Vec::new(),
            values: BTreeMap::new(),
            passed: true,
            wall_time_s: 0.0,
        }
    }

    pub fn check(
        &mut self,
        name: impl Into<String>,
        measured: f64,
        relation: Relation,
        threshold: f64,
    ) -> bool {
        let passed = relation.holds(measured, threshold);
        self.checks.push(Check {
            name: name.into(),
            measured,
            relation,
            threshold,
            passed,
            detail: None,
        });
        self.passed &= passed;
        passed
    }

    pub fn check_le(&mut self, name: impl Into<String>, measured: f64, threshold: f64) -> bool {
        self.check(name, measured, Relation::Le, threshold)
    }

    pub fn check_ge(&mut self, name: impl Into<String>, measured: f64, threshold: f64) -> bool {
        self.check(name, measured, Relation::Ge, threshold)
    }

    pub fn check_gt(&mut self, name: impl Into<String>, measured: f64, threshold: f64) -> bool {
        self.check(name, measured, Relation::Gt, threshold)
    }

    pub fn check_lt(&mut self, name: impl Into<String>, measured: f64, threshold: f64) -> bool {
        self.check(name, measured, Relation::Lt, threshold)
    }

    pub fn check_holds(
        &mut self,
        name: impl Into<String>,
        holds: bool,
        detail: Option<String>,
    ) -> bool {
        self.checks.push(Check {
            name: name.into(),
            measured: if holds { 1.0 } else { 0.0 },
            relation: Relation::Holds,
            threshold: 1.0,
            passed: holds,
            detail,
        });
        self.passed &= holds;
        holds
    }

    /// Attaches a note to the most recent check.
    pub fn with_detail(&mut self, detail: impl Into<String>) -> &mut Self {
        if let Some(c) = self.checks.last_mut() {
            c.detail = Some(detail.into());
        }
        self
    }

    pub fn record(&mut self, key: impl Into<String>, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.values.insert(key.into(), v);
    }

    pub fn value_f64(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(Value::as_f64)
    }

    pub fn get_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Names of failed checks, comma separated.
    pub fn failure_summary(&self) -> String {
        self.failures()
            .iter()
            .map(|c| match &c.detail {
                Some(d) => format!("{} ({d})", c.name),
                None => c.name.clone(),
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Re-evaluates every check from its stored measurement and threshold.
    pub fn recheck(&self) -> bool {
        let all = self
            .checks
            .iter()
            .all(|c| c.relation.holds(c.measured, c.threshold) == c.passed);
        let overall = self.checks.iter().all(|c| c.passed);
        all && overall == self.passed
    }

    pub fn merge(&mut self, prefix: &str, other: &CertificateReport) {
        for c in &other.checks {
            let mut c = c.clone();
            c.name = format!("{prefix}.{}", c.name);
            self.passed &= c.passed;
            self.checks.push(c);
        }
        for (k, v) in &other.values {
            self.values.insert(format!("{prefix}.{k}"), v.clone());
        }
    }
}
