//! Reproducibility manifests written next to every command's outputs.
//!
//! A manifest records what a run consumed (input digests), what it produced,
//! and every parameter that influences the result. Two runs with the same
//! inputs and parameters write byte-identical manifests, so execution-only
//! knobs such as the thread count are deliberately absent.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<InputRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor_checksum: Option<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &'static str, seed: u64) -> Self {
        RunManifest {
            tool: "crosstitch",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            anchor_checksum: None,
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("manifest parameter serializes");
        self.parameters.insert(key.to_string(), value);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_hex(path)?;
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn anchor_checksum(&mut self, checksum: u64) {
        self.anchor_checksum = Some(format!("{checksum:016x}"));
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("cannot read input {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(digest.len() * 2);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn digest_matches_known_vector() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(b"abc").unwrap();
        file.flush().unwrap();
        // NIST test vector for SHA-256("abc").
        assert_eq!(
            sha256_hex(file.path()).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_json_is_stable() {
        let mut a = RunManifest::new("map", 7);
        a.param("scheme", "softmax");
        a.param("top_k", 50);
        a.anchor_checksum(0xdead_beef);
        let mut b = RunManifest::new("map", 7);
        // Insertion order must not leak into the serialized form.
        b.anchor_checksum(0xdead_beef);
        b.param("top_k", 50);
        b.param("scheme", "softmax");
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.to_json().contains("\"00000000deadbeef\""));
    }
}
