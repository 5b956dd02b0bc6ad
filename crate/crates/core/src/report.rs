//! Machine-readable run reports: per-check status with certificates, results and timings.

use crate::formmat::FormMatrix;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// One entry per failure, enough to locate it (simplex, block, entry).
    pub certificates: Vec<Value>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub version: u32,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub results: BTreeMap<String, Value>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(command: &str) -> Report {
        Report {
            command: command.into(),
            version: crate::instance::VERSION,
            passed: true,
            checks: Vec::new(),
            results: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn check<T: Serialize>(&mut self, name: &str, failures: impl IntoIterator<Item = T>) -> bool {
        let certificates: Vec<Value> = failures.into_iter().map(|f| serde_json::to_value(f).unwrap()).collect();
        let passed = certificates.is_empty();
        self.passed &= passed;
        self.checks.push(Check { name: name.into(), passed, certificates });
        passed
    }

    pub fn fail(&mut self, name: &str, certificate: Value) {
        self.check(name, [certificate]);
    }

    pub fn result(&mut self, key: &str, v: impl Serialize) {
        self.results.insert(key.into(), serde_json::to_value(v).unwrap());
    }

    pub fn timed<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        *self.timings_ms.entry(name.into()).or_default() += t0.elapsed().as_secs_f64() * 1e3;
        out
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    /// The report with timings removed; identical inputs give identical output.
    pub fn to_json_deterministic(&self) -> String {
        let mut v = serde_json::to_value(self).unwrap();
        v.as_object_mut().unwrap().remove("timings_ms");
        serde_json::to_string_pretty(&v).unwrap()
    }
}

/// {"k", "entries": {"r,c": form}} with only nonzero entries.
pub fn form_matrix_json(m: &FormMatrix) -> Value {
    let entries: serde_json::Map<String, Value> = m.nonzero_entries().map(|(r, c, f)| (format!("{r},{c}"), f.to_json())).collect();
    json!({"k": m.k, "entries": entries})
}
