//! Reproducible run manifests.
//!
//! Every CLI run writes a `manifest.json` describing exactly what was
//! computed: tool version, subcommand, estimation method, horizon, seed,
//! named input and output paths, free-form parameters, and a SHA-256 digest
//! of the whole configuration. The manifest is fully determined by the run
//! configuration — no timestamps, hostnames, or other ambient state — so
//! byte-identical manifests certify byte-identical runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Hex-encoded SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Description of one deterministic CLI run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    /// Estimation method, when the subcommand has one.
    pub method: Option<String>,
    pub horizon: u32,
    /// Master seed, when the subcommand consumes randomness.
    pub seed: Option<u64>,
    /// Extra knobs (bootstrap size, level, scenario name, ...), sorted by key.
    pub parameters: BTreeMap<String, String>,
    /// Logical name -> path of every input file.
    pub inputs: BTreeMap<String, String>,
    /// Logical name -> path of every output file.
    pub outputs: BTreeMap<String, String>,
    /// SHA-256 over the canonical JSON of all fields above (with this field
    /// empty), fixed by [`RunManifest::finalize`].
    pub config_sha256: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, horizon: u32) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            method: None,
            horizon,
            seed: None,
            parameters: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config_sha256: String::new(),
        }
    }

    pub fn method(mut self, method: &str) -> Self {
        self.method = Some(method.to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn parameter(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(mut self, name: &str, path: impl ToString) -> Self {
        self.inputs.insert(name.to_string(), path.to_string());
        self
    }

    pub fn output(mut self, name: &str, path: impl ToString) -> Self {
        self.outputs.insert(name.to_string(), path.to_string());
        self
    }

    /// Fill `config_sha256` from the other fields. Idempotent.
    pub fn finalize(mut self) -> Self {
        let mut unhashed = self.clone();
        unhashed.config_sha256 = String::new();
        let canonical =
            serde_json::to_string(&unhashed).expect("manifest serialization cannot fail");
        self.config_sha256 = sha256_hex(canonical.as_bytes());
        self
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("manifest serialization cannot fail");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("bad manifest JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunManifest {
        RunManifest::new("estimate", 6)
            .method("censoring")
            .seed(7)
            .parameter("bootstrap_replicates", 500u64)
            .input("patients", "data/patients.csv")
            .output("curves", "out/curves.csv")
            .finalize()
    }

    #[test]
    fn digest_matches_reference_vector() {
        // SHA-256 of the empty string and of "abc" are published constants.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_is_deterministic_and_insertion_order_free() {
        let a = sample();
        let b = RunManifest::new("estimate", 6)
            .input("patients", "data/patients.csv")
            .parameter("bootstrap_replicates", 500u64)
            .seed(7)
            .output("curves", "out/curves.csv")
            .method("censoring")
            .finalize();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn any_field_change_moves_the_digest() {
        let base = sample();
        let variants = [
            sample().method("exclusion").finalize(),
            sample().seed(8).finalize(),
            sample().parameter("level", "0.9").finalize(),
            sample().input("covariates", "c.csv").finalize(),
            RunManifest::new("estimate", 7)
                .method("censoring")
                .seed(7)
                .parameter("bootstrap_replicates", 500u64)
                .input("patients", "data/patients.csv")
                .output("curves", "out/curves.csv")
                .finalize(),
        ];
        for v in variants {
            assert_ne!(v.config_sha256, base.config_sha256);
        }
    }

    #[test]
    fn finalize_is_idempotent_and_excludes_its_own_digest() {
        let once = sample();
        let twice = once.clone().finalize();
        assert_eq!(once, twice);
    }

    #[test]
    fn json_round_trips() {
        let m = sample();
        let back = RunManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(RunManifest::from_json("{\"nope\": 1}").is_err());
    }

    #[test]
    fn manifest_carries_no_ambient_state() {
        let text = sample().to_json();
        for needle in ["time", "date", "host", "user"] {
            assert!(!text.contains(needle), "manifest leaks `{needle}`: {text}");
        }
    }
}
