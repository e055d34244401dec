use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::commands::Resolved;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Resolved,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// SHA-256 of every input file, keyed by path as given.
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
    pub workers: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Fails if any input changed since the run was recorded.
    pub fn verify_inputs(&self) -> Result<()> {
        for (path, digest) in &self.input_digests {
            let now = file_digest(Path::new(path))?;
            if &now != digest {
                return Err(Error::invalid(format!(
                    "input {path} changed since the manifest was written (sha256 {now}, recorded {digest})"
                )));
            }
        }
        Ok(())
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

pub fn digests<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<BTreeMap<String, String>> {
    paths
        .into_iter()
        .map(|p| Ok((p.display().to_string(), file_digest(p)?)))
        .collect()
}
