//! Check records, run reports and their canonical JSON form.

use serde::ser::Serialize;
use serde::Serialize as DeriveSerialize;
use serde_json::{Map, Value};
use std::io::{self, Write};

/// One verdict: `pass` is computed by the experiment from `value`, `stderr`
/// and `tolerance`; see `criterion` for the rule.
#[derive(Debug, Clone, PartialEq, DeriveSerialize)]
pub struct CheckRecord {
    pub experiment: String,
    pub statistic: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub tolerance: f64,
    pub criterion: String,
    pub pass: bool,
}

impl CheckRecord {
    /// `value <= tolerance`.
    pub fn at_most(experiment: &str, statistic: &str, value: f64, tolerance: f64) -> Self {
        Self {
            experiment: experiment.into(),
            statistic: statistic.into(),
            value,
            stderr: None,
            tolerance,
            criterion: "value <= tolerance".into(),
            pass: value <= tolerance,
        }
    }

    /// `value >= tolerance`.
    pub fn at_least(experiment: &str, statistic: &str, value: f64, tolerance: f64) -> Self {
        Self {
            criterion: "value >= tolerance".into(),
            pass: value >= tolerance,
            ..Self::at_most(experiment, statistic, value, tolerance)
        }
    }

    /// `|value - target| <= z * stderr`; `tolerance` holds `z`.
    pub fn within_stderr(experiment: &str, statistic: &str, value: f64, target: f64, stderr: f64, z: f64) -> Self {
        Self {
            experiment: experiment.into(),
            statistic: statistic.into(),
            value,
            stderr: Some(stderr),
            tolerance: z,
            criterion: format!("|value - {target:.16e}| <= tolerance * stderr"),
            pass: (value - target).abs() <= z * stderr,
        }
    }
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct RunReport {
    pub experiment: String,
    pub seed: u64,
    pub code_version: String,
    pub config: Value,
    pub checks: Vec<CheckRecord>,
    /// Estimates and diagnostics that are reported without a verdict.
    pub statistics: Map<String, Value>,
    /// Runtime failure, if the experiment could not complete.
    pub error: Option<String>,
    pub pass: bool,
}

impl RunReport {
    pub fn new(experiment: &str, seed: u64, config: Value) -> Self {
        Self {
            experiment: experiment.into(),
            seed,
            code_version: env!("CARGO_PKG_VERSION").into(),
            config,
            checks: Vec::new(),
            statistics: Map::new(),
            error: None,
            pass: false,
        }
    }

    /// Overall verdict: every check passed and nothing failed at runtime.
    pub fn finalize(&mut self) {
        self.pass = self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(|c| c.pass);
    }

    pub fn stat(&mut self, key: &str, value: impl Serialize) {
        self.statistics.insert(key.into(), to_value(&value));
    }

    pub fn to_json(&self) -> String {
        canonical_json(&to_value(self))
    }
}

/// Non-finite floats become null; the accompanying check fails on its own.
pub fn to_value<T: Serialize + ?Sized>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values are serializable")
}

/// Floats as `{:.16e}` (17 significant digits); object keys sorted.
struct FixedDigits;

impl serde_json::ser::Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }
}

/// Deterministic text form of a JSON value. `serde_json::Map` is a BTreeMap
/// in this build, so keys come out sorted.
pub fn canonical_json(v: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits);
    v.serialize(&mut ser).expect("writing to a Vec cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}
