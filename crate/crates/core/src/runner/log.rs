//! Append-only prediction log with per-example idempotency keys.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::DatasetKind;
use crate::stitch::ViewConfiguration;
use crate::vlm::Prediction;

/// Identifies one (dataset, configuration, prompt flag, example) query.
pub fn idempotency_key(dataset: DatasetKind, configuration: ViewConfiguration, prompt_on: bool, example_id: &str) -> String {
    format!("{}|{}|{}|{}", dataset.name(), configuration.name(), u8::from(prompt_on), example_id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub key: String,
    pub dataset: DatasetKind,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub key: String,
    pub example_id: String,
    pub stage: String,
    pub message: String,
}

pub struct PredictionLog {
    path: PathBuf,
    file: File,
    entries: BTreeMap<String, LogEntry>,
}

impl PredictionLog {
    /// Opens (or creates) the log and replays it. A torn final line from an
    /// interrupted write is ignored and overwritten by the next append.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let mut entries = BTreeMap::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let mut reader = BufReader::new(File::open(path)?);
            let mut line = Vec::new();
            loop {
                line.clear();
                if reader.read_until(b'\n', &mut line)? == 0 || line.last() != Some(&b'\n') {
                    break;
                }
                match serde_json::from_slice::<LogEntry>(&line[..line.len() - 1]) {
                    Ok(entry) => {
                        valid_len += line.len() as u64;
                        entries.entry(entry.key.clone()).or_insert(entry);
                    }
                    Err(_) => break,
                }
            }
        }
        let file = OpenOptions::new().create(true).write(true).truncate(false).open(path)?;
        file.set_len(valid_len)?;
        let mut log = PredictionLog { path: path.to_path_buf(), file, entries };
        log.seek_end()?;
        Ok(log)
    }

    fn seek_end(&mut self) -> std::io::Result<()> {
        use std::io::Seek;
        self.file.seek(std::io::SeekFrom::End(0)).map(|_| ())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends `entry` unless its key is already logged. Returns whether it was written.
    pub fn append(&mut self, entry: LogEntry) -> std::io::Result<bool> {
        if self.entries.contains_key(&entry.key) {
            return Ok(false);
        }
        let mut line = serde_json::to_vec(&entry).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        self.entries.insert(entry.key.clone(), entry);
        Ok(true)
    }

    pub fn entries(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.values()
    }
}
