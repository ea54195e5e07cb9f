use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const LOCK_FILE: &str = ".icw.lock";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub version: String,
}

/// An output directory held exclusively for one command.
pub struct RunDir {
    root: PathBuf,
    manifest: RunManifest,
    _lock: File,
}

impl RunDir {
    /// Creates `root`, takes its lock and writes the initial manifest.
    pub fn open(root: &Path, command: &str, config_hash: String) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let lock_path = root.join(LOCK_FILE);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| CliError::io(&lock_path, e))?;
        lock.try_lock().map_err(|_| {
            CliError::Io(format!("{} is in use by another icw process", root.display()))
        })?;
        let dir = Self {
            root: root.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                config_hash,
                started_at: now(),
                finished_at: None,
                artifacts: Vec::new(),
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            _lock: lock,
        };
        dir.write_manifest()?;
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn subdir(&self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.root.join(rel);
        std::fs::create_dir_all(&p).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    pub fn record(&mut self, rel: impl Into<String>) {
        self.manifest.artifacts.push(rel.into());
    }

    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.finished_at = Some(now());
        self.write_manifest()?;
        Ok(self.manifest.clone())
    }

    fn write_manifest(&self) -> Result<(), CliError> {
        write_json_atomic(&self.root.join(MANIFEST_FILE), &self.manifest)
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes through a temporary file and renames it into place.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_holder_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let first = RunDir::open(dir.path(), "simulate", "h".into()).unwrap();
        assert!(matches!(RunDir::open(dir.path(), "simulate", "h".into()), Err(CliError::Io(_))));
        let m = first.finish().unwrap();
        assert!(m.finished_at.is_some());
        let again = RunDir::open(dir.path(), "simulate", "h".into());
        assert!(again.is_ok());
    }
}
