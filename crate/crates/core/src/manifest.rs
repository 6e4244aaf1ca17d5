//! Run manifests and all-or-nothing output directories.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::pipeline::Timings;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// What a run did and produced. Inputs and config are enough to rerun
/// it; `outputs` maps each written file to its SHA-256.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub config: ConfigFile,
    pub seed: Option<u64>,
    pub timings: Vec<StageTiming>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: ConfigFile) -> Self {
        RunManifest {
            command: command.to_owned(),
            inputs: BTreeMap::new(),
            config,
            seed: None,
            timings: Vec::new(),
            outputs: BTreeMap::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn input(mut self, key: &str, path: &Path) -> Self {
        self.inputs.insert(key.to_owned(), path.display().to_string());
        self
    }

    pub fn add_timings(&mut self, t: &Timings) {
        self.timings.extend(t.iter().map(|(s, secs)| StageTiming {
            stage: (*s).to_owned(),
            seconds: *secs,
        }));
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn input_path(&self, key: &str) -> Result<PathBuf> {
        self.inputs
            .get(key)
            .map(PathBuf::from)
            .ok_or_else(|| Error::invalid(format!("manifest has no input {key:?}")))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Hashes of every file below `dir` keyed by relative path, skipping the
/// manifest itself.
pub fn hash_tree(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let path = entry.map_err(|e| Error::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).expect("walk stays below root");
            let key = rel.to_string_lossy().replace('\\', "/");
            if key != MANIFEST_FILE {
                out.insert(key, sha256_file(&path)?);
            }
        }
    }
    Ok(out)
}

/// A scratch directory next to the destination that replaces it in one
/// rename on [`StagedOutput::commit`]. Dropping it uncommitted removes
/// everything written so far.
pub struct StagedOutput {
    dest: PathBuf,
    tmp: tempfile::TempDir,
}

impl StagedOutput {
    /// Fails if `dest` exists and is neither empty nor a previous run.
    pub fn new(dest: &Path) -> Result<Self> {
        if dest.exists() && !(is_empty_dir(dest)? || dest.join(MANIFEST_FILE).is_file()) {
            return Err(Error::Inconsistent(format!(
                "{} exists and does not hold a previous run",
                dest.display()
            )));
        }
        let parent = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let tmp = tempfile::Builder::new()
            .prefix(".shbrdf-stage-")
            .tempdir_in(&parent)
            .map_err(|e| Error::io(&parent, e))?;
        Ok(StagedOutput {
            dest: dest.to_path_buf(),
            tmp,
        })
    }

    pub fn path(&self) -> &Path {
        self.tmp.path()
    }

    /// Hashes the staged files into `manifest`, writes it, and moves the
    /// directory into place.
    pub fn commit(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.outputs = hash_tree(self.path())?;
        let mpath = self.path().join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;
        if self.dest.exists() {
            fs::remove_dir_all(&self.dest).map_err(|e| Error::io(&self.dest, e))?;
        }
        let staged = self.tmp.keep();
        fs::rename(&staged, &self.dest).map_err(|e| Error::io(&self.dest, e))?;
        Ok(manifest)
    }
}

fn is_empty_dir(p: &Path) -> Result<bool> {
    Ok(p.is_dir() && fs::read_dir(p).map_err(|e| Error::io(p, e))?.next().is_none())
}
