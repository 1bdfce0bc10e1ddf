//! Run directories and their manifests.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use fibxy::export::Csv;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub schema: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    /// Seconds since the Unix epoch; the only field that differs between reruns.
    pub created_unix: u64,
    pub files: Vec<FileEntry>,
}

/// Collects the files of one command run in `<root>/<command>/`.
pub struct RunDir {
    dir: PathBuf,
    command: String,
    files: Vec<FileEntry>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::config(format!("cannot write {}: {e}", path.display()))
}

impl RunDir {
    /// Creates the directory, removing the files listed by a previous
    /// manifest there so that nothing stale survives a rerun.
    pub fn create(root: &Path, command: &str) -> Result<Self, CliError> {
        let dir = root.join(command);
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        if let Some(old) = read_manifest(&dir)? {
            for f in old.files {
                let _ = std::fs::remove_file(dir.join(&f.path));
            }
            let _ = std::fs::remove_file(dir.join(MANIFEST));
        }
        let probe = dir.join(".write-test");
        std::fs::write(&probe, b"").map_err(|e| io_err(&dir, e))?;
        let _ = std::fs::remove_file(&probe);
        Ok(RunDir { dir, command: command.to_string(), files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, schema: String, rows: usize, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        self.files.push(FileEntry { path: name.to_string(), schema, rows });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, csv: &Csv) -> Result<(), CliError> {
        let header = csv.as_str().lines().next().unwrap_or_default();
        self.write(name, format!("csv:{header}"), csv.rows(), csv.as_str())
    }

    /// Pretty JSON; `rows` is the array length for arrays and 1 otherwise.
    pub fn json<T: Serialize>(&mut self, name: &str, kind: &str, value: &T) -> Result<(), CliError> {
        let v = serde_json::to_value(value).map_err(|e| CliError::numeric(format!("cannot serialize {name}: {e}")))?;
        let rows = v.as_array().map_or(1, Vec::len);
        let mut text = serde_json::to_string_pretty(&v).expect("json value serializes");
        text.push('\n');
        self.write(name, format!("json:{kind}"), rows, &text)
    }

    pub fn text(&mut self, name: &str, schema: &str, rows: usize, text: &str) -> Result<(), CliError> {
        self.write(name, schema.to_string(), rows, text)
    }

    pub fn finish(self, config_hash: &str) -> Result<Manifest, CliError> {
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let manifest = Manifest { command: self.command, config_hash: config_hash.to_string(), created_unix, files: self.files };
        let path = self.dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Option<Manifest>, CliError> {
    let path = dir.join(MANIFEST);
    match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::config(format!("unreadable manifest {}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CliError::config(format!("cannot read {}: {e}", path.display()))),
    }
}
