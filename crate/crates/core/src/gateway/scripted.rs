//! Deterministic fixture-driven backend for tests and offline runs.
//!
//! Chat completions are looked up by `(template_id, bindings_hash)`; a
//! fixture may use the wildcard hash `"*"` to answer every rendering of one
//! template. Unmatched chat calls fail loudly so fixture drift surfaces
//! immediately. Embeddings fall back to a hash-derived unit vector when no
//! fixture matches, so any text is embeddable without enumerating it.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{bindings_hash, Bindings, ChatBackend, EmbedBackend, GatewayError, PromptInstance};

pub const WILDCARD_HASH: &str = "*";

/// Dimension of hash-derived embeddings when no fixture overrides them.
pub const DEFAULT_EMBEDDING_DIM: usize = 8;

#[derive(Debug, Serialize, Deserialize)]
struct FixtureRecord {
    template_id: String,
    bindings_hash: String,
    response: Value,
}

/// Build one fixture JSONL line. `bindings` of None produces a wildcard
/// fixture answering every rendering of the template.
pub fn fixture_line(template_id: &str, bindings: Option<&Bindings>, response: Value) -> String {
    let record = FixtureRecord {
        template_id: template_id.to_string(),
        bindings_hash: bindings.map_or_else(|| WILDCARD_HASH.to_string(), bindings_hash),
        response,
    };
    serde_json::to_string(&record).expect("fixture record serializes")
}

pub struct ScriptedBackend {
    fixtures: std::collections::BTreeMap<(String, String), Value>,
    embedding_dim: usize,
    chat_calls: AtomicU64,
    embed_calls: AtomicU64,
}

impl ScriptedBackend {
    pub fn empty(embedding_dim: usize) -> Self {
        Self {
            fixtures: Default::default(),
            embedding_dim,
            chat_calls: AtomicU64::new(0),
            embed_calls: AtomicU64::new(0),
        }
    }

    pub fn from_fixture_lines<'a>(
        lines: impl Iterator<Item = &'a str>,
        embedding_dim: usize,
    ) -> Result<Self, GatewayError> {
        let mut backend = Self::empty(embedding_dim);
        for (n, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(line).map_err(|e| {
                GatewayError::BackendUnavailable(format!("fixture line {}: {e}", n + 1))
            })?;
            backend
                .fixtures
                .insert((record.template_id, record.bindings_hash), record.response);
        }
        Ok(backend)
    }

    pub fn from_fixture_file(path: &Path, embedding_dim: usize) -> Result<Self, GatewayError> {
        let content = std::fs::read_to_string(path)?;
        Self::from_fixture_lines(content.lines(), embedding_dim)
    }

    pub fn fixture_count(&self) -> usize {
        self.fixtures.len()
    }

    fn lookup(&self, template_id: &str, hash: &str) -> Option<&Value> {
        self.fixtures
            .get(&(template_id.to_string(), hash.to_string()))
            .or_else(|| self.fixtures.get(&(template_id.to_string(), WILDCARD_HASH.to_string())))
    }
}

impl ChatBackend for ScriptedBackend {
    fn backend_id(&self) -> &str {
        "scripted"
    }

    fn model_id(&self) -> &str {
        "scripted-chat"
    }

    fn complete(&self, prompt: &PromptInstance, _temperature: f64) -> Result<String, GatewayError> {
        self.chat_calls.fetch_add(1, Ordering::Relaxed);
        let hash = bindings_hash(&prompt.bindings);
        let response = self
            .lookup(&prompt.template_id, &hash)
            .ok_or_else(|| GatewayError::UnmatchedFixture {
                template_id: prompt.template_id.clone(),
                bindings_hash: hash,
            })?;
        Ok(match response {
            Value::String(s) => s.clone(),
            other => serde_json::to_string(other).expect("fixture value serializes"),
        })
    }

    fn calls(&self) -> u64 {
        self.chat_calls.load(Ordering::Relaxed)
    }
}

impl EmbedBackend for ScriptedBackend {
    fn backend_id(&self) -> &str {
        "scripted"
    }

    fn model_id(&self) -> &str {
        "scripted-embed"
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, GatewayError> {
        self.embed_calls.fetch_add(1, Ordering::Relaxed);
        let mut bindings = Bindings::new();
        bindings.insert("text".to_string(), text.to_string());
        let hash = bindings_hash(&bindings);
        if let Some(fixture) = self.lookup("embed", &hash) {
            let values: Vec<f32> = serde_json::from_value(fixture.clone()).map_err(|e| {
                GatewayError::BackendUnavailable(format!("embed fixture is not a float array: {e}"))
            })?;
            return Ok(values);
        }
        Ok(derived_embedding(text, self.embedding_dim))
    }

    fn calls(&self) -> u64 {
        self.embed_calls.load(Ordering::Relaxed)
    }
}

/// Deterministic unit vector derived from the text digest. Distinct texts get
/// (almost surely) distinct directions; equal texts always get equal vectors.
fn derived_embedding(text: &str, dim: usize) -> Vec<f32> {
    let mut values = Vec::with_capacity(dim);
    let mut counter: u64 = 0;
    let mut block: Vec<u8> = Vec::new();
    while values.len() < dim {
        if block.len() < 4 {
            let mut hasher = Sha256::new();
            hasher.update(text.as_bytes());
            hasher.update(counter.to_le_bytes());
            block = hasher.finalize().to_vec();
            counter += 1;
        }
        let chunk: [u8; 4] = block[..4].try_into().expect("4 bytes");
        block.drain(..4);
        let raw = u32::from_le_bytes(chunk);
        values.push((raw as f64 / u32::MAX as f64) * 2.0 - 1.0);
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        let mut unit = vec![0.0; dim];
        unit[0] = 1.0;
        return unit;
    }
    values.iter().map(|v| (v / norm) as f32).collect()
}
