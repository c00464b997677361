//! Staged artifact output and run manifests.
//!
//! Artifacts are written to a hidden staging directory inside the output
//! directory and moved into place only when the command succeeds; on
//! failure the staging directory is dropped and nothing partial remains.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

pub const MANIFEST_FILE: &str = "manifest.json";

pub struct Staging {
    out: PathBuf,
    created_out: bool,
    dir: Option<TempDir>,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self> {
        let created_out = !out.exists();
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        let dir = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(out)
            .with_context(|| format!("cannot stage in {}", out.display()))?;
        Ok(Self { out: out.to_path_buf(), created_out, dir: Some(dir) })
    }

    pub fn root(&self) -> &Path {
        self.dir.as_ref().expect("staging is live").path()
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root().join(rel)
    }

    pub fn write(&self, rel: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, contents).with_context(|| format!("cannot write {rel}"))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Relative paths of staged files, sorted.
    pub fn files(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        walk(self.root(), self.root(), &mut out)?;
        out.sort();
        Ok(out)
    }

    /// Moves every staged file into the output directory.
    pub fn commit(mut self) -> Result<()> {
        let dir = self.dir.take().expect("staging is live");
        for rel in {
            let mut v = Vec::new();
            walk(dir.path(), dir.path(), &mut v)?;
            v
        } {
            let to = self.out.join(&rel);
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(dir.path().join(&rel), &to).with_context(|| format!("cannot move {rel} into place"))?;
        }
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        // Uncommitted: the TempDir removes the staged files; an output
        // directory this run created is removed too if nothing else is in it.
        if let Some(dir) = self.dir.take() {
            drop(dir);
            if self.created_out {
                let _ = fs::remove_dir(&self.out);
            }
        }
    }
}

fn walk(base: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            walk(base, &path, out)?;
        } else {
            let rel = path.strip_prefix(base).expect("under base");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    /// Resolved settings after merging the config file and flags.
    pub settings: serde_json::Value,
    /// Input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Artifact path, relative to the output directory, to SHA-256.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    /// Hashes the staged artifacts and the inputs, then stages the manifest.
    pub fn write(mut self, staging: &Staging, inputs: &[PathBuf]) -> Result<()> {
        for p in inputs {
            self.inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        for rel in staging.files()? {
            self.outputs.insert(rel.clone(), sha256_file(&staging.path(&rel))?);
        }
        staging.write_json(MANIFEST_FILE, &self)
    }
}
