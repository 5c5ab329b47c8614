//! Artifact files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One written file with its content hash.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Collects the files of a run in write order.
#[derive(Debug, Default)]
pub struct ArtifactSet {
    pub records: Vec<ArtifactRecord>,
}

impl ArtifactSet {
    /// Writes `contents` to `dir/file` atomically and records it.
    pub fn write(&mut self, dir: &Path, file: &str, contents: &[u8]) -> Result<()> {
        write_atomic(&dir.join(file), contents)?;
        self.records.push(ArtifactRecord {
            file: file.to_string(),
            bytes: contents.len(),
            sha256: sha256_hex(contents),
        });
        Ok(())
    }

    /// Serializes `value` as pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, dir: &Path, file: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Io(format!("{file}: {e}")))?;
        text.push('\n');
        self.write(dir, file, text.as_bytes())
    }
}

/// Provenance of a run. Everything except `wall_time_s` is a function of the
/// configuration.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub surface_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub artifacts: Vec<ArtifactRecord>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub npspec: String,
    pub manifest_format: u32,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            npspec: env!("CARGO_PKG_VERSION").to_string(),
            manifest_format: 1,
        }
    }
}
