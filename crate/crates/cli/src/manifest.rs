//! Run manifest written alongside every output directory: the resolved
//! parameters, input digests, and master seed needed to reproduce a run
//! byte-for-byte (the timestamp is informational only).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub tool_version: &'static str,
    pub timestamp: String,
    pub master_seed: u64,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub input_digests: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(
        command: &'static str,
        master_seed: u64,
        parameters: BTreeMap<String, serde_json::Value>,
        input_digests: BTreeMap<String, String>,
    ) -> Self {
        Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339(),
            master_seed,
            parameters,
            input_digests,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
