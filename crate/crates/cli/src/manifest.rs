use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifacts::{read_json, sha256_hex, write_json, FileEntry};
use crate::error::CliResult;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = concat!("lcswitch ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    /// Hash of the configuration section and input checksums the stage saw.
    pub inputs_hash: String,
    pub status: StageStatus,
    pub outputs: Vec<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Bookkeeping of the last invocation; not part of the manifest hash.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    /// Wall-clock seconds per executed stage.
    pub timing: BTreeMap<String, f64>,
    pub executed: Vec<String>,
    pub reused: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub stages: Vec<StageRecord>,
    #[serde(default)]
    pub manifest_hash: String,
    #[serde(default)]
    pub run: RunInfo,
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config_hash,
            stages: Vec::new(),
            manifest_hash: String::new(),
            run: RunInfo::default(),
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn upsert(&mut self, record: StageRecord) {
        match self.stages.iter_mut().find(|s| s.name == record.name) {
            Some(s) => *s = record,
            None => self.stages.push(record),
        }
    }

    /// Every output of every completed stage.
    pub fn files(&self) -> impl Iterator<Item = &FileEntry> {
        self.stages.iter().filter(|s| s.status == StageStatus::Done).flat_map(|s| s.outputs.iter())
    }

    pub fn is_complete(&self) -> bool {
        !self.stages.is_empty() && self.stages.iter().all(|s| s.status == StageStatus::Done)
    }

    /// Hash over the version, configuration and stage records.
    pub fn compute_hash(&self) -> String {
        let content = (&self.tool_version, &self.config_hash, &self.stages);
        sha256_hex(&serde_json::to_vec(&content).expect("manifest serializes"))
    }

    pub fn load(root: &Path) -> CliResult<Option<Self>> {
        let path = root.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }

    pub fn save(&mut self, root: &Path) -> CliResult<()> {
        self.manifest_hash = self.compute_hash();
        write_json(&root.join(MANIFEST_FILE), self)
    }

    /// Checks every recorded output against its size and checksum.
    pub fn verify(&self, root: &Path) -> CliResult<Vec<&FileEntry>> {
        let mut missing = Vec::new();
        for f in self.files() {
            if !f.verify(root)? {
                missing.push(f);
            }
        }
        Ok(missing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_run_info() {
        let mut a = RunManifest::new("abc".into());
        a.upsert(StageRecord {
            name: "simulate".into(),
            inputs_hash: "h".into(),
            status: StageStatus::Done,
            outputs: vec![],
            diagnostic: None,
        });
        let mut b = a.clone();
        b.run.timing.insert("simulate".into(), 3.5);
        assert_eq!(a.compute_hash(), b.compute_hash());
        b.stages[0].inputs_hash = "g".into();
        assert_ne!(a.compute_hash(), b.compute_hash());
        assert!(a.is_complete());
    }
}
