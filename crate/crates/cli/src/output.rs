//! Run directories and manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use shiftlab::certify::Verdict;
use shiftlab::field::RadiusLadder;

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";

/// Output root when neither the flag, the environment nor the config file sets one.
pub const DEFAULT_ROOT: &str = "shiftlab-runs";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub run_id: String,
    pub config: RunConfig,
    /// Subcommand-specific arguments.
    pub args: Value,
    /// `sha256` of the `r_log` array as little-endian `f64` bytes.
    pub ladder_digest: String,
    /// Claim id to verdict, for `certify`; empty otherwise.
    pub verdicts: BTreeMap<String, Verdict>,
    /// Command-specific result summary, such as the terminal status of a simulation.
    pub result: Value,
    pub files: Vec<FileEntry>,
}

pub fn ladder_digest(ladder: &RadiusLadder) -> String {
    let mut h = Sha256::new();
    for r in ladder.r_logs() {
        h.update(r.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Deterministic id from the command, its arguments and the effective config.
pub fn default_run_id(command: &str, config: &RunConfig, args: &Value) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(serde_json::to_vec(config).expect("config serializes"));
    h.update(serde_json::to_vec(args).expect("args serialize"));
    format!("{command}-{}", &hex::encode(h.finalize())[..12])
}

/// One run's output directory. Files are registered as they are written and
/// listed in the manifest, which goes last.
pub struct RunDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl RunDir {
    pub fn create(root: &Path, run_id: &str) -> Result<Self> {
        let dir = root.join(run_id);
        // A stale manifest would claim completion for a half-rewritten run.
        let stale = dir.join(MANIFEST);
        if stale.exists() {
            fs::remove_file(&stale).with_context(|| format!("removing {}", stale.display()))?;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, files: Vec::new() })
    }


    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        atomic_write(&self.dir.join(name), bytes)?;
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf> {
        manifest.files = self.files;
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        atomic_write(&self.dir.join(MANIFEST), &text)?;
        Ok(self.dir)
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use shiftlab::field::{build_ladder, FieldParams};

    #[test]
    fn digest_tracks_the_ladder() {
        let a = build_ladder(&FieldParams::default()).unwrap();
        let b = build_ladder(&FieldParams { gamma: 0.4, ..FieldParams::default() }).unwrap();
        assert_eq!(ladder_digest(&a), ladder_digest(&a.clone()));
        assert_ne!(ladder_digest(&a), ladder_digest(&b));
        assert_eq!(ladder_digest(&a).len(), 64);
    }

    #[test]
    fn run_id_depends_on_config() {
        let cfg = RunConfig::default();
        let args = serde_json::json!({});
        let id = default_run_id("ladder", &cfg, &args);
        assert!(id.starts_with("ladder-"));
        assert_eq!(id, default_run_id("ladder", &cfg, &args));
        let other = RunConfig { seed: 1, ..cfg };
        assert_ne!(id, default_run_id("ladder", &other, &args));
    }
}
