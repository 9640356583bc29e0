use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// SHA-256 of the config's canonical JSON, as lowercase hex.
pub fn config_hash(config: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let mut hex = String::with_capacity(64);
    for b in Sha256::digest(&bytes).iter() {
        write!(hex, "{b:02x}").unwrap();
    }
    hex
}

/// Logs the resolved config and returns its hash.
pub fn announce(command: &str, config: &impl Serialize) -> String {
    let hash = config_hash(config);
    log::info!(
        "{command} config {} (hash {hash})",
        serde_json::to_string(config).expect("config serializes")
    );
    hash
}

/// Writes `{"command", "config", "config_hash", "results"}` to `path` when given.
pub fn write_report(
    path: Option<&Path>,
    command: &str,
    config: &impl Serialize,
    hash: &str,
    results: Value,
) -> Result<(), CliError> {
    let Some(path) = path else {
        return Ok(());
    };
    let doc = json!({
        "command": command,
        "config": config,
        "config_hash": hash,
        "results": results,
    });
    let text = serde_json::to_string_pretty(&doc).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}
