//! Structured verification results and the JSON run report.

use serde::{Serialize, Serializer};
use serde_json::{Map, Value};

/// Serializes a real that may be `+∞` (KL divergence, Conjecture-1 gaps).
/// Infinities are written as the strings `"inf"` / `"-inf"`.
pub fn ser_real<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*x)
    }
}

pub fn ser_opt_real<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_real(v, s),
        None => s.serialize_none(),
    }
}

/// JSON value for a real, with the `"inf"` convention.
pub fn real(x: f64) -> Value {
    if x.is_infinite() {
        Value::String(if x > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
    }
}

/// One inequality `lhs ≥ rhs`, checked with slack `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(serialize_with = "ser_real")]
    pub lhs: f64,
    #[serde(serialize_with = "ser_real")]
    pub rhs: f64,
    #[serde(serialize_with = "ser_real")]
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let margin = lhs - rhs;
        Check {
            name: name.into(),
            lhs,
            rhs,
            margin,
            tolerance,
            passed: margin >= -tolerance,
        }
    }
}

/// Result of any inequality verification: the checks with their signed
/// margins, the worst one, an optional witness and free-form summary data.
///
/// A report whose hypothesis does not hold still carries its checks, but
/// [`VerificationReport::violated`] only counts failures under the hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub hypothesis_ok: bool,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub worst: Option<Check>,
    pub witness: Option<Value>,
    pub data: Map<String, Value>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>) -> Self {
        VerificationReport {
            name: name.into(),
            hypothesis_ok: true,
            passed: true,
            checks: Vec::new(),
            worst: None,
            witness: None,
            data: Map::new(),
        }
    }

    pub fn push(&mut self, check: Check) -> &mut Self {
        self.passed &= check.passed;
        let replace = match &self.worst {
            None => true,
            Some(w) => check.margin < w.margin,
        };
        if replace {
            self.worst = Some(check.clone());
        }
        self.checks.push(check);
        self
    }

    pub fn check(&mut self, name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> &mut Self {
        self.push(Check::new(name, lhs, rhs, tolerance))
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.data.insert(key.to_owned(), value.into());
        self
    }

    pub fn set_real(&mut self, key: &str, value: f64) -> &mut Self {
        self.data.insert(key.to_owned(), real(value));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.data.get(key)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.data.get(key).and_then(Value::as_f64)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// True when the hypothesis holds and some check failed.
    pub fn violated(&self) -> bool {
        self.hypothesis_ok && !self.passed
    }
}

/// Top-level JSON document emitted by every CLI command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub parameters: Map<String, Value>,
    pub seed: Option<u64>,
    pub results: Value,
    pub timing_ms: u64,
    pub tool_version: String,
}

impl RunReport {
    pub fn new(command: impl Into<String>) -> Self {
        RunReport {
            command: command.into(),
            parameters: Map::new(),
            seed: None,
            results: Value::Null,
            timing_ms: 0,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.parameters.insert(key.to_owned(), value.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}
