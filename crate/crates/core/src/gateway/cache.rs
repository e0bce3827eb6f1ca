//! Disk-persisted response cache.
//!
//! Entries live in an append-only JSONL file and are replayed into memory on
//! open, so a warm cache makes reruns free of backend traffic. Writers race
//! only on identical keys, and determinism makes their values identical, so
//! last-writer-wins is safe.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    value: String,
}

pub struct DiskCache {
    entries: Mutex<HashMap<String, String>>,
    writer: Mutex<File>,
    path: PathBuf,
}

impl DiskCache {
    /// Open (creating if needed) the cache stored under `dir/cache.jsonl`.
    pub fn open(dir: &Path) -> Result<Self, GatewayError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("cache.jsonl");
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                // Torn trailing writes from an interrupted run are skipped;
                // the entry is simply recomputed.
                if let Ok(record) = serde_json::from_str::<CacheLine>(&line) {
                    entries.insert(record.key, record.value);
                }
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            entries: Mutex::new(entries),
            writer: Mutex::new(writer),
            path,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.lock().is_empty()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.lock().get(key).cloned()
    }

    pub fn put(&self, key: &str, value: &str) {
        {
            let mut entries = self.entries.lock();
            if entries.get(key).map(String::as_str) == Some(value) {
                return;
            }
            entries.insert(key.to_string(), value.to_string());
        }
        let line = serde_json::to_string(&CacheLine {
            key: key.to_string(),
            value: value.to_string(),
        })
        .expect("cache line serializes");
        let mut writer = self.writer.lock();
        // Cache persistence is best-effort: failure to append degrades to a
        // cold cache on the next run, it must not fail the pipeline.
        let _ = writeln!(writer, "{line}");
        let _ = writer.flush();
    }
}
