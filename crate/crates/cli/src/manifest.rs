//! Run manifests and layered configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const ELBO_NOTE: &str = "ELBo values omit additive terms that do not depend on the variational parameters";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the compact JSON encoding of `config`.
    pub config_digest: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    /// SHA-256 of each input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub truncated: bool,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn start(command: &str, config: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Input(format!("config: {e}")))?;
        Ok(Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: config_digest(&config),
            config,
            seed,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
            truncated: false,
            notes: Vec::new(),
        })
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Input(format!("manifest: {e}")))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

pub fn config_digest(config: &serde_json::Value) -> String {
    // serde_json maps are ordered, so the encoding is canonical
    sha256_hex(config.to_string().as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// `base` with the top-level keys of the TOML file at `path` laid over it.
/// Unknown keys are rejected by the target type.
pub fn layer_toml<T: Serialize + DeserializeOwned + Clone>(base: &T, path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(base.clone());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let overlay: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut merged = match toml::Value::try_from(base) {
        Ok(toml::Value::Table(t)) => t,
        _ => return Err(CliError::Input("config defaults are not a table".into())),
    };
    merged.extend(overlay);
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_construction_order() {
        let a = serde_json::json!({"a": 1, "b": [0.5, 1e-10]});
        let b = serde_json::json!({"b": [0.5, 1e-10], "a": 1});
        assert_eq!(config_digest(&a), config_digest(&b));
        assert_eq!(config_digest(&a).len(), 64);
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
