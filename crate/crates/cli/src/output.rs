//! Output directory handling: CSV writers, the metadata record, and removal
//! of partial outputs when a run fails.

use crate::error::CliError;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

/// Files written by one run. Unless [`RunOutput::commit`] is called, every
/// file created through it (and the directory, if the run created it) is
/// removed on drop.
pub struct RunOutput {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl RunOutput {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| {
            CliError::Validation(format!("cannot create output directory {}: {e}", dir.display()))
        })?;
        if !dir.is_dir() {
            return Err(CliError::Validation(format!("{} is not a directory", dir.display())));
        }
        Ok(RunOutput {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            committed: false,
        })
    }

    fn track(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        path
    }

    /// Opens a CSV file and writes its header row.
    pub fn csv(&mut self, name: &str, header: &[&str]) -> Result<csv::Writer<fs::File>, CliError> {
        let path = self.track(name);
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))?;
        w.write_record(header)?;
        Ok(w)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.track(name);
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numerical(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.track(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for RunOutput {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Formats a float for CSV output: shortest round-trip representation,
/// `inf`/`nan` for non-finite values.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}
