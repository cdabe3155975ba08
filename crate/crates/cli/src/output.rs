//! Output files: config echo, input hashing and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Digest of one input file, hashed like a git blob (`blob <len>\0<bytes>`) with SHA-256.
#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Header embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Echo {
    pub command: String,
    pub seed: u64,
    pub tol: f64,
    pub damping: f64,
    pub max_iter: usize,
    pub inputs: Vec<InputDigest>,
    /// Hash over all input digests in order.
    pub input_hash: String,
    /// Subcommand settings.
    pub settings: serde_json::Value,
}

impl Echo {
    pub fn finish_inputs(&mut self) {
        let joined: String = self
            .inputs
            .iter()
            .map(|d| d.sha256.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        self.input_hash = blob_hash(joined.as_bytes());
    }
}

/// Reads an input file and records its digest.
pub fn read_input(path: &Path, echo: &mut Echo) -> Result<Vec<u8>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    echo.inputs.push(InputDigest {
        path: path.display().to_string(),
        sha256: blob_hash(&bytes),
    });
    echo.finish_inputs();
    Ok(bytes)
}

pub struct OutDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes through a temporary file in the same directory, then renames it into place.
    pub fn write_atomic(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target)
            .with_context(|| format!("writing {}", target.display()))?;
        self.written.push(target);
        Ok(())
    }

    /// JSON object `{"config": echo, ...body}`.
    pub fn write_json<T: Serialize>(&mut self, name: &str, echo: &Echo, body: &T) -> Result<()> {
        let mut doc = serde_json::Map::new();
        doc.insert("config".into(), serde_json::to_value(echo)?);
        match serde_json::to_value(body)? {
            serde_json::Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let mut bytes = serde_json::to_vec_pretty(&serde_json::Value::Object(doc))?;
        bytes.push(b'\n');
        self.write_atomic(name, &bytes)
    }

    /// CSV whose first line is `# config <compact json>`; readers should skip `#` lines.
    pub fn write_csv<F>(&mut self, name: &str, echo: &Echo, fill: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut bytes = format!("# config {}\n", serde_json::to_string(echo)?).into_bytes();
        fill(&mut bytes)?;
        self.write_atomic(name, &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_layout() {
        // sha256 of "blob 0\0", as in `git hash-object` under the sha256 object format.
        assert_eq!(
            blob_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.write_atomic("a.txt", b"one").unwrap();
        out.write_atomic("a.txt", b"two").unwrap();
        assert_eq!(fs::read(dir.path().join("a.txt")).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
