//! Run manifest: config snapshot, input hashes and per-stage output hashes.
//! Re-running a stage on identical inputs must reproduce identical output
//! hashes; the manifest is how that is checked.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lexsim_core::PipelineConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RunManifest {
    pub version: String,
    pub config: Option<PipelineConfig>,
    /// Input name -> sha256 (targets, stoplist, corpus tree, config file).
    pub inputs: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub completed_epoch_s: u64,
    /// Output filename -> sha256 of its bytes.
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
}

impl RunManifest {
    pub fn load_or_default(out_dir: &Path) -> Self {
        let path = out_dir.join(MANIFEST_FILE);
        fs::read_to_string(&path)
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default()
    }

    pub fn set_config(&mut self, cfg: &PipelineConfig) {
        self.version = env!("CARGO_PKG_VERSION").to_string();
        self.config = Some(cfg.clone());
    }

    pub fn record_input(&mut self, name: &str, hash: String) {
        self.inputs.insert(name.to_string(), hash);
    }

    /// Hashes the given output files and stores them under the stage name.
    pub fn record_stage(&mut self, name: &str, outputs: &[PathBuf], seeds: Vec<u64>) -> io::Result<()> {
        let mut hashes = BTreeMap::new();
        for path in outputs {
            let file_name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            hashes.insert(file_name, sha256_file(path)?);
        }
        let completed = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.stages.insert(
            name.to_string(),
            StageRecord {
                completed_epoch_s: completed,
                outputs: hashes,
                seeds,
            },
        );
        Ok(())
    }

    pub fn save(&self, out_dir: &Path) -> io::Result<()> {
        let path = out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text)
    }
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    to_hex(&hasher.finalize())
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(sha256_bytes(&fs::read(path)?))
}

/// Hash of a directory tree: sha256 over "relative-path\0file-hash\n" lines
/// in sorted path order.
pub fn sha256_tree(root: &Path) -> io::Result<String> {
    let mut files = Vec::new();
    collect_files(root, root, &mut files)?;
    files.sort();
    let mut hasher = Sha256::new();
    for rel in files {
        let hash = sha256_file(&root.join(&rel))?;
        hasher.update(rel.replace('\\', "/").as_bytes());
        hasher.update([0]);
        hasher.update(hash.as_bytes());
        hasher.update(*b"\n");
    }
    Ok(to_hex(&hasher.finalize()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> io::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .collect::<io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .collect();
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path.is_file() {
            let rel = path
                .strip_prefix(root)
                .unwrap_or(&path)
                .to_string_lossy()
                .into_owned();
            out.push(rel);
        }
    }
    Ok(())
}
