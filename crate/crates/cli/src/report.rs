use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Passes iff `value <= threshold`; NaN never passes.
    pub fn at_most(value: f64, threshold: f64) -> Self {
        Self {
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs_digest: String,
    pub results: Value,
    pub checks: BTreeMap<String, Check>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }
}

/// SHA-256 over the raw input bytes, a NUL, and the canonical JSON of the
/// effective configuration.
pub fn digest(input: &[u8], config: &impl Serialize) -> String {
    let mut h = Sha256::new();
    h.update(input);
    h.update([0u8]);
    h.update(serde_json::to_vec(config).expect("config serializes"));
    hex::encode(h.finalize())
}
