//! Run provenance. Trace and report files carry the manifest id; the full
//! manifest, including the wall-clock timestamp, goes to a sidecar file so
//! the primary outputs stay byte-identical across reruns.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use groundcheck_core::ReasoningConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::LoadError;

pub const TOOL: &str = "groundcheck";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub id: String,
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ReasoningConfig>,
    /// Keyed by role: dataset, fixtures, embeddings, traces, ...
    pub inputs: BTreeMap<String, InputDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote: Option<String>,
    /// Seconds since the Unix epoch; honours `SOURCE_DATE_EPOCH`.
    pub timestamp: u64,
}

pub fn sha256_file(path: &Path) -> Result<String, LoadError> {
    let bytes = fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn now() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: Option<ReasoningConfig>,
        inputs: &[(&str, &Path)],
    ) -> Result<Self, LoadError> {
        let mut digests = BTreeMap::new();
        for (role, path) in inputs {
            digests.insert(
                role.to_string(),
                InputDigest {
                    path: path.display().to_string(),
                    sha256: sha256_file(path)?,
                },
            );
        }
        let mut m = Self {
            id: String::new(),
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config,
            inputs: digests,
            remote: None,
            timestamp: now(),
        };
        m.id = m.content_id();
        Ok(m)
    }

    /// Hash of everything that determines the outputs: tool version,
    /// command, config and input contents. Paths and time are excluded.
    pub fn content_id(&self) -> String {
        let digests: BTreeMap<&str, &str> = self
            .inputs
            .iter()
            .map(|(k, v)| (k.as_str(), v.sha256.as_str()))
            .collect();
        let key = serde_json::json!({
            "tool": self.tool,
            "version": self.version,
            "command": self.command,
            "config": self.config,
            "inputs": digests,
            "remote": self.remote,
        });
        let hash = Sha256::digest(key.to_string().as_bytes());
        hex::encode(&hash[..8])
    }

    pub fn with_remote(mut self, endpoint: Option<&str>) -> Self {
        self.remote = endpoint.map(str::to_string);
        self.id = self.content_id();
        self
    }

    /// `<out>.manifest.json`
    pub fn sidecar_path(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write_sidecar(&self, out: &Path) -> std::io::Result<PathBuf> {
        let path = Self::sidecar_path(out);
        let mut body = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        body.push('\n');
        fs::write(&path, body)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_ignores_paths_and_time() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        fs::write(&a, "x\n").unwrap();
        fs::write(&b, "x\n").unwrap();
        let m1 = RunManifest::new(
            "judge",
            Some(ReasoningConfig::default()),
            &[("dataset", &a)],
        )
        .unwrap();
        let mut m2 = RunManifest::new(
            "judge",
            Some(ReasoningConfig::default()),
            &[("dataset", &b)],
        )
        .unwrap();
        m2.timestamp += 100;
        assert_eq!(m1.id, m2.content_id());
        let cfg = ReasoningConfig {
            tau_iou: 0.9,
            ..Default::default()
        };
        let m3 = RunManifest::new("judge", Some(cfg), &[("dataset", &a)]).unwrap();
        assert_ne!(m1.id, m3.id);
        assert_eq!(
            RunManifest::sidecar_path(Path::new("out/t.jsonl")),
            PathBuf::from("out/t.jsonl.manifest.json")
        );
    }
}
