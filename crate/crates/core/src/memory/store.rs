//! On-disk format for the memory index: `entries.jsonl` with the textual
//! fields, plus `vectors.bin` holding the embeddings as little-endian f32
//! arrays behind an offset table. Splitting the two keeps the JSONL greppable
//! and the vectors compact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gateway::EmbeddingVector;
use crate::memory::{MemoryEntry, MemoryError, MemoryIndex};

const MAGIC: &[u8; 8] = b"GARVEC01";
const ENTRIES_FILE: &str = "entries.jsonl";
const VECTORS_FILE: &str = "vectors.bin";

#[derive(Serialize, Deserialize)]
struct EntryRow {
    paper_id: String,
    community_id: u32,
    descriptor_text: String,
    review_snippet: String,
}

/// Write the index into `dir` (created if missing).
pub fn save_index(index: &MemoryIndex, dir: &Path) -> Result<(), MemoryError> {
    std::fs::create_dir_all(dir)?;

    let mut jsonl = BufWriter::new(File::create(dir.join(ENTRIES_FILE))?);
    for entry in index.entries() {
        let row = EntryRow {
            paper_id: entry.paper_id.clone(),
            community_id: entry.community_id,
            descriptor_text: entry.descriptor_text.clone(),
            review_snippet: entry.review_snippet.clone(),
        };
        serde_json::to_writer(&mut jsonl, &row)?;
        jsonl.write_all(b"\n")?;
    }
    jsonl.flush()?;

    // Layout: magic, u32 model-id length, model-id bytes, u64 entry count,
    // u64 offset per entry (absolute), then per entry u32 dim + dim f32 LE.
    let mut bin = BufWriter::new(File::create(dir.join(VECTORS_FILE))?);
    let model = index.model_id().as_bytes();
    bin.write_all(MAGIC)?;
    bin.write_all(&(model.len() as u32).to_le_bytes())?;
    bin.write_all(model)?;
    let n = index.entries().len() as u64;
    bin.write_all(&n.to_le_bytes())?;
    let table_start = MAGIC.len() as u64 + 4 + model.len() as u64 + 8;
    let mut offset = table_start + 8 * n;
    for entry in index.entries() {
        bin.write_all(&offset.to_le_bytes())?;
        offset += 4 + 4 * entry.embedding.values.len() as u64;
    }
    for entry in index.entries() {
        let values = &entry.embedding.values;
        bin.write_all(&(values.len() as u32).to_le_bytes())?;
        for v in values {
            bin.write_all(&v.to_le_bytes())?;
        }
    }
    bin.flush()?;
    Ok(())
}

/// Read an index previously written by [`save_index`].
pub fn load_index(dir: &Path) -> Result<MemoryIndex, MemoryError> {
    let jsonl = BufReader::new(File::open(dir.join(ENTRIES_FILE))?);
    let mut rows = Vec::new();
    for (i, line) in jsonl.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EntryRow = serde_json::from_str(&line).map_err(|e| {
            MemoryError::CorruptSidecar(format!("{ENTRIES_FILE} line {}: {e}", i + 1))
        })?;
        rows.push(row);
    }

    let mut bin = File::open(dir.join(VECTORS_FILE))?;
    let mut magic = [0u8; 8];
    bin.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(MemoryError::CorruptSidecar("bad magic".to_string()));
    }
    let model_len = read_u32(&mut bin)? as usize;
    let mut model = vec![0u8; model_len];
    bin.read_exact(&mut model)?;
    let model_id = String::from_utf8(model)
        .map_err(|_| MemoryError::CorruptSidecar("model id is not UTF-8".to_string()))?;
    let n = read_u64(&mut bin)? as usize;
    if n != rows.len() {
        return Err(MemoryError::CorruptSidecar(format!(
            "{} rows in {ENTRIES_FILE} but {n} vectors",
            rows.len()
        )));
    }
    let mut offsets = Vec::with_capacity(n);
    for _ in 0..n {
        offsets.push(read_u64(&mut bin)?);
    }

    let mut entries = Vec::with_capacity(n);
    for (row, offset) in rows.into_iter().zip(offsets) {
        bin.seek(SeekFrom::Start(offset))?;
        let dim = read_u32(&mut bin)? as usize;
        let mut raw = vec![0u8; 4 * dim];
        bin.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        entries.push(MemoryEntry {
            paper_id: row.paper_id,
            community_id: row.community_id,
            descriptor_text: row.descriptor_text,
            review_snippet: row.review_snippet,
            embedding: EmbeddingVector::new(values, model_id.clone()),
        });
    }
    MemoryIndex::build(entries)
}

fn read_u32(r: &mut impl Read) -> Result<u32, MemoryError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64, MemoryError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::NO_MENTION_SENTINEL;

    fn sample_index() -> MemoryIndex {
        MemoryIndex::build(vec![
            MemoryEntry {
                paper_id: "p1".into(),
                community_id: 0,
                descriptor_text: "graph attention".into(),
                review_snippet: "the attention ablation is convincing".into(),
                embedding: EmbeddingVector::new(vec![0.25, -1.5, 3.0], "m"),
            },
            MemoryEntry {
                paper_id: "p2".into(),
                community_id: 4,
                descriptor_text: "dataset shift".into(),
                review_snippet: NO_MENTION_SENTINEL.into(),
                embedding: EmbeddingVector::new(vec![1.0, 2.0], "m"),
            },
        ])
        .unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let index = sample_index();
        save_index(&index, dir.path()).unwrap();
        let loaded = load_index(dir.path()).unwrap();
        assert_eq!(loaded, index);
        assert_eq!(loaded.model_id(), "m");
    }

    #[test]
    fn ragged_dimensions_roundtrip() {
        // The offset table must cope with entries of different lengths.
        let index = sample_index();
        assert_ne!(
            index.entries()[0].embedding.values.len(),
            index.entries()[1].embedding.values.len()
        );
        let dir = tempfile::tempdir().unwrap();
        save_index(&index, dir.path()).unwrap();
        assert_eq!(load_index(dir.path()).unwrap(), index);
    }

    #[test]
    fn truncated_sidecar_is_loud() {
        let dir = tempfile::tempdir().unwrap();
        save_index(&sample_index(), dir.path()).unwrap();
        let path = dir.path().join(VECTORS_FILE);
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 5]).unwrap();
        assert!(load_index(dir.path()).is_err());
    }

    #[test]
    fn row_count_mismatch_is_loud() {
        let dir = tempfile::tempdir().unwrap();
        save_index(&sample_index(), dir.path()).unwrap();
        let path = dir.path().join(ENTRIES_FILE);
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str(&text.lines().next().unwrap().to_string());
        text.push('\n');
        std::fs::write(&path, text).unwrap();
        let err = load_index(dir.path()).unwrap_err();
        assert!(matches!(err, MemoryError::CorruptSidecar(_)), "{err}");
    }

    #[test]
    fn empty_index_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let index = MemoryIndex::default();
        save_index(&index, dir.path()).unwrap();
        assert!(load_index(dir.path()).unwrap().is_empty());
    }
}
