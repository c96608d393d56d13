use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

/// Pass rule of a record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    AtMost { threshold: f64 },
    Within { low: f64, high: f64 },
    /// A property checked exactly (counts of violations, identities).
    Holds,
    /// Recorded for reference; always passes.
    Reported,
}

impl Rule {
    pub fn check(&self, statistic: f64) -> bool {
        match *self {
            Rule::AtMost { threshold } => statistic <= threshold,
            Rule::Within { low, high } => (low..=high).contains(&statistic),
            Rule::Holds => statistic == 0.0,
            Rule::Reported => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRecord {
    pub name: String,
    pub inputs: BTreeMap<String, Value>,
    pub statistic: f64,
    pub rule: Rule,
    pub passed: bool,
    pub seed: u64,
    pub replicas: u64,
}

impl TestRecord {
    pub fn new(name: &str, statistic: f64, rule: Rule, seed: u64, replicas: u64) -> Self {
        Self {
            name: name.to_string(),
            inputs: BTreeMap::new(),
            statistic,
            passed: rule.check(statistic),
            rule,
            seed,
            replicas,
        }
    }

    pub fn input(mut self, key: &str, value: impl Serialize) -> Self {
        self.inputs
            .insert(key.to_string(), serde_json::to_value(value).expect("input serializes"));
        self
    }

    /// Verdict decided by the caller (compound rules such as monotonicity).
    pub fn with_verdict(mut self, passed: bool) -> Self {
        self.passed = passed;
        self
    }
}

/// A figure-ready table written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, provenance: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {provenance}");
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: Value,
}

impl Provenance {
    /// Header line of every written data file.
    pub fn line(&self) -> String {
        format!("{} {} {} config={}", self.tool, self.version, self.subcommand, self.config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub provenance: Provenance,
    pub passed: bool,
    pub records: Vec<TestRecord>,
}

impl Report {
    pub fn new(provenance: Provenance, records: Vec<TestRecord>) -> Self {
        Self {
            passed: records.iter().all(|r| r.passed),
            provenance,
            records,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules() {
        assert!(Rule::AtMost { threshold: 0.05 }.check(0.05));
        assert!(!Rule::AtMost { threshold: 0.05 }.check(0.051));
        assert!(Rule::Within { low: 0.47, high: 0.53 }.check(0.5));
        assert!(!Rule::Within { low: 0.47, high: 0.53 }.check(0.46));
        assert!(Rule::Holds.check(0.0));
        assert!(!Rule::Holds.check(1.0));
    }

    #[test]
    fn dataset_csv() {
        let mut d = Dataset::new("x", &["a", "b"]);
        d.push(vec![1.0, 0.5]);
        assert_eq!(d.to_csv("seed=1"), "# seed=1\na,b\n1,0.5\n");
    }
}
