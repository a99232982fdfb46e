//! Content-hash manifest. A stage is skipped when its input key matches the
//! recorded one and every recorded output still has its recorded hash.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Option<String> {
    std::fs::read(path).ok().map(|b| sha256_hex(&b))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    /// Hash over the stage name, its settings and its input contents.
    pub key: String,
    /// Output path to content hash.
    pub outputs: BTreeMap<PathBuf, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageEntry>,
}

impl Manifest {
    pub fn load(work: &Path) -> Manifest {
        std::fs::read_to_string(work.join(MANIFEST_FILE))
            .ok()
            .and_then(|s| serde_json::from_str(&s).ok())
            .unwrap_or_default()
    }

    pub fn save(&self, work: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        crate::write_file(&work.join(MANIFEST_FILE), text.as_bytes())
    }

    /// True when `stage` already produced its outputs from the same key.
    pub fn is_fresh(&self, stage: &str, key: &str) -> bool {
        self.stages.get(stage).is_some_and(|e| {
            e.key == key
                && !e.outputs.is_empty()
                && e.outputs.iter().all(|(p, h)| file_hash(p).as_deref() == Some(h.as_str()))
        })
    }

    pub fn record(&mut self, stage: &str, key: String, outputs: &[PathBuf]) {
        let outputs = outputs.iter().filter_map(|p| file_hash(p).map(|h| (p.clone(), h))).collect();
        self.stages.insert(stage.to_string(), StageEntry { key, outputs });
    }
}

/// Builds a stage key from named parts. Inputs are hashed by file name and
/// content, so moving the working tree does not invalidate it.
#[derive(Debug, Clone)]
pub struct KeyBuilder {
    hasher: Sha256,
}

impl KeyBuilder {
    pub fn new(stage: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(stage.as_bytes());
        Self { hasher }
    }

    pub fn setting(mut self, name: &str, value: &impl Serialize) -> Self {
        self.hasher.update(name.as_bytes());
        self.hasher.update(serde_json::to_vec(value).expect("settings serialize"));
        self
    }

    pub fn files(mut self, paths: &[PathBuf]) -> Self {
        for p in paths {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            self.hasher.update(name.as_bytes());
            self.hasher.update(file_hash(p).unwrap_or_default().as_bytes());
        }
        self
    }

    pub fn finish(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}
