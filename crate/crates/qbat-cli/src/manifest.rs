//! Run manifests: a JSON sidecar per output file recording the fully
//! resolved job, the seed, and the emitted schema. Re-running the job in a
//! manifest reproduces the CSV byte for byte.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::jobs::ResolvedJob;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub rows: u64,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub created_unix: u64,
    pub duration_seconds: f64,
    /// Seed echoed verbatim for seeded jobs.
    pub seed: Option<u64>,
    pub job: ResolvedJob,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn new(job: ResolvedJob, seed: Option<u64>, duration_seconds: f64, files: Vec<FileRecord>) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            tool: "qbat".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            created_unix,
            duration_seconds,
            seed,
            job,
            files,
        }
    }

    pub fn write(&self, csv_path: &Path) -> anyhow::Result<std::path::PathBuf> {
        let path = manifest_path(csv_path);
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let body = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&body)?)
    }
}

pub fn manifest_path(csv_path: &Path) -> std::path::PathBuf {
    let mut s = csv_path.as_os_str().to_os_string();
    s.push(".manifest.json");
    std::path::PathBuf::from(s)
}
