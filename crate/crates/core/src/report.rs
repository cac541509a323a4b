//! Check records and the JSON report envelope.

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: &str = "1.0.0";

/// One verified inequality or identity: `lhs` relates to `rhs` as the check
/// name says, and `margin` is the signed slack (positive when passing).
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub lhs: Value,
    pub rhs: Value,
    pub margin: Option<f64>,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, lhs: Value, rhs: Value, margin: Option<f64>) -> Self {
        Check {
            name: name.into(),
            pass,
            lhs,
            rhs,
            margin,
        }
    }

    /// lhs <= rhs in binary64, with relative slack `rel`.
    pub fn le_f64(name: impl Into<String>, lhs: f64, rhs: f64, rel: f64) -> Self {
        let pass = lhs <= rhs + rel * rhs.abs();
        Check::new(name, pass, num(lhs), num(rhs), Some(rhs - lhs))
    }

    /// |lhs - rhs| <= tol.
    pub fn close(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let diff = (lhs - rhs).abs();
        Check::new(name, diff <= tol, num(lhs), num(rhs), Some(tol - diff))
    }

    /// A boolean condition with descriptive sides.
    pub fn flag(name: impl Into<String>, pass: bool, lhs: Value, rhs: Value) -> Self {
        Check::new(name, pass, lhs, rhs, None)
    }
}

pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// The document every CLI command prints.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: &'static str,
    pub command: String,
    pub results: Value,
    pub checks: Vec<Check>,
    pub wall_time: f64,
}

impl Report {
    pub fn new(command: impl Into<String>, results: Value, checks: Vec<Check>, wall_time: f64) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            results,
            checks,
            wall_time,
        }
    }

    pub fn passed(&self) -> bool {
        all_pass(&self.checks)
    }
}
