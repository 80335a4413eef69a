//! Artifact manifest: every file under the output directory with its hash.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use super::dataset::sha256_hex;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: Vec<StageRecord>,
    pub entries: Vec<ManifestEntry>,
}

fn collect(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect(&path, root, out)?;
        } else if path != root.join(MANIFEST_FILE) {
            out.push(path);
        }
    }
    Ok(())
}

impl Manifest {
    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Records the outcome of a stage, replacing an earlier record of it.
    pub fn record(&mut self, stage: &str, error: Option<String>) {
        self.stages.retain(|s| s.stage != stage);
        let status = if error.is_some() { StageStatus::Failed } else { StageStatus::Complete };
        self.stages.push(StageRecord { stage: stage.to_string(), status, error });
    }

    /// Rehashes every file under `root` and writes the manifest there.
    pub fn refresh(&mut self, root: &Path) -> Result<()> {
        let mut files = Vec::new();
        collect(root, root, &mut files)?;
        let mut entries = Vec::with_capacity(files.len());
        for f in files {
            let data = std::fs::read(&f)?;
            let rel = f.strip_prefix(root).expect("inside root");
            let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            entries.push(ManifestEntry { path, sha256: sha256_hex(&data), bytes: data.len() as u64 });
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        self.entries = entries;
        std::fs::write(root.join(MANIFEST_FILE), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Paths whose current hash no longer matches the manifest.
    pub fn verify(&self, root: &Path) -> Result<Vec<String>> {
        let mut stale = Vec::new();
        for e in &self.entries {
            match std::fs::read(root.join(&e.path)) {
                Ok(data) if sha256_hex(&data) == e.sha256 => {}
                _ => stale.push(e.path.clone()),
            }
        }
        Ok(stale)
    }
}
