//! Embedding-indexed memory of (community descriptor, review snippet) pairs.
//!
//! Each descriptor of each corpus paper is paired with what the human
//! reviewers said about it — a verbatim quote, or a fixed sentinel sentence
//! when nothing matches — and indexed by its descriptor embedding. Retrieval
//! works at two levels: nearest communities by cosine, and nearest papers by
//! the structural similarity of their descriptor sets.

mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use store::{load_index, save_index};

use crate::gateway::{Bindings, EmbeddingVector, Gateway, OutputSchema};
use crate::graph::PaperGraph;
use crate::ingest::ReviewRecord;

/// Stored verbatim when no review passage addresses a descriptor.
pub const NO_MENTION_SENTINEL: &str = "No specific mention was found in the review.";

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("embedding model mismatch: {0} vs {1}")]
    ModelMismatch(String, String),
    #[error("embedding length mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("memory index is empty")]
    EmptyIndex,
    #[error("memory store is empty")]
    EmptyStore,
    #[error("descriptor set is empty")]
    EmptySet,
    #[error("similarity threshold {0} outside [0, 1)")]
    InvalidTau(f64),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("corrupt sidecar: {0}")]
    CorruptSidecar(String),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub paper_id: String,
    pub community_id: u32,
    pub descriptor_text: String,
    pub review_snippet: String,
    pub embedding: EmbeddingVector,
}

/// Immutable store of memory entries with a per-paper view.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryIndex {
    entries: Vec<MemoryEntry>,
    model_id: String,
}

impl MemoryIndex {
    pub fn build(entries: Vec<MemoryEntry>) -> Result<Self, MemoryError> {
        let model_id = entries
            .first()
            .map(|e| e.embedding.model_id.clone())
            .unwrap_or_default();
        for entry in &entries {
            if entry.embedding.model_id != model_id {
                return Err(MemoryError::ModelMismatch(
                    model_id,
                    entry.embedding.model_id.clone(),
                ));
            }
        }
        Ok(Self { entries, model_id })
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn paper_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.entries.iter().map(|e| e.paper_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn descriptors_of(&self, paper_id: &str) -> Vec<&MemoryEntry> {
        self.entries.iter().filter(|e| e.paper_id == paper_id).collect()
    }
}

/// Cosine similarity between two embeddings of the same model.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MemoryError> {
    if a.model_id != b.model_id {
        return Err(MemoryError::ModelMismatch(a.model_id.clone(), b.model_id.clone()));
    }
    if a.values.len() != b.values.len() {
        return Err(MemoryError::DimensionMismatch(a.values.len(), b.values.len()));
    }
    let norm_a = a.norm();
    let norm_b = b.norm();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(MemoryError::ZeroVector);
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (*x as f64) * (*y as f64))
        .sum();
    Ok(dot / (norm_a * norm_b))
}

/// Pair every descriptor of a paper with what its human reviews say about it.
///
/// The model is asked to quote the review verbatim; any snippet that is not a
/// substring of a source review is replaced by the sentinel, so downstream
/// consumers never see invented review text.
pub fn index_paper(
    graph: &PaperGraph,
    reviews: &[ReviewRecord],
    gateway: &Gateway,
) -> Result<Vec<MemoryEntry>, MemoryError> {
    let review_block = reviews
        .iter()
        .enumerate()
        .map(|(i, r)| format!("Review {} (reviewer {}):\n{}", i + 1, r.reviewer_id, r.text))
        .collect::<Vec<_>>()
        .join("\n\n");
    let mut entries = Vec::new();
    for (community_id, descriptor) in &graph.descriptors {
        let mut bindings = Bindings::new();
        bindings.insert("descriptor".to_string(), descriptor.text.clone());
        bindings.insert("reviews".to_string(), review_block.clone());
        let prompt = gateway.render("memory_mention", &bindings)?;
        let value = gateway.complete_structured(&prompt, &OutputSchema::memory_mention())?;
        let candidate = value["mention"].as_str().unwrap_or_default().to_string();
        let review_snippet = if candidate == NO_MENTION_SENTINEL
            || reviews.iter().any(|r| r.text.contains(&candidate))
        {
            candidate
        } else {
            log::warn!(
                "paper {} community {}: snippet is not a verbatim quote, storing sentinel",
                graph.paper_id,
                community_id
            );
            NO_MENTION_SENTINEL.to_string()
        };
        let embedding = gateway.embed(&descriptor.text)?;
        entries.push(MemoryEntry {
            paper_id: graph.paper_id.clone(),
            community_id: *community_id,
            descriptor_text: descriptor.text.clone(),
            review_snippet,
            embedding,
        });
    }
    Ok(entries)
}

/// Top-M entries most similar to a query descriptor embedding, excluding
/// entries from the query's own paper. Sorted by similarity descending, ties
/// by (paper_id, community_id).
pub fn retrieve_communities<'a>(
    index: &'a MemoryIndex,
    query: &EmbeddingVector,
    query_paper_id: &str,
    m: usize,
) -> Result<Vec<(&'a MemoryEntry, f64)>, MemoryError> {
    if index.is_empty() {
        return Err(MemoryError::EmptyIndex);
    }
    let mut scored: Vec<(&MemoryEntry, f64)> = Vec::new();
    for entry in &index.entries {
        if entry.paper_id == query_paper_id {
            continue;
        }
        scored.push((entry, cosine(query, &entry.embedding)?));
    }
    scored.sort_by(|(ea, sa), (eb, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ea.paper_id.cmp(&eb.paper_id))
            .then_with(|| ea.community_id.cmp(&eb.community_id))
    });
    scored.truncate(m);
    Ok(scored)
}

/// Fraction of the query set's descriptors with a τ-close partner in the
/// candidate set, normalized by the larger set size. Asymmetric by design:
/// the first argument is the query paper. Matching is strict (`> τ`).
pub fn structural_similarity(
    query: &[EmbeddingVector],
    candidate: &[EmbeddingVector],
    tau: f64,
) -> Result<f64, MemoryError> {
    if query.is_empty() || candidate.is_empty() {
        return Err(MemoryError::EmptySet);
    }
    if !(0.0..1.0).contains(&tau) {
        return Err(MemoryError::InvalidTau(tau));
    }
    let mut matched = 0usize;
    for q in query {
        for c in candidate {
            if cosine(q, c)? > tau {
                matched += 1;
                break;
            }
        }
    }
    Ok(matched as f64 / query.len().max(candidate.len()) as f64)
}

/// Papers ranked by structural similarity to the query descriptor set.
/// Deterministic: descending score, ties by paper id.
pub fn retrieve_papers(
    index: &MemoryIndex,
    query: &[EmbeddingVector],
    tau: f64,
    k: usize,
) -> Result<Vec<(String, f64)>, MemoryError> {
    if index.is_empty() {
        return Err(MemoryError::EmptyStore);
    }
    let mut scored = Vec::new();
    for paper_id in index.paper_ids() {
        let candidate: Vec<EmbeddingVector> = index
            .descriptors_of(&paper_id)
            .iter()
            .map(|e| e.embedding.clone())
            .collect();
        let score = structural_similarity(query, &candidate, tau)?;
        scored.push((paper_id, score));
    }
    scored.sort_by(|(pa, sa), (pb, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| pa.cmp(pb))
    });
    scored.truncate(k);
    Ok(scored)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaMemoryEntry {
    pub paper_id: String,
    pub graph_signature: Vec<EmbeddingVector>,
    pub meta_review_text: String,
}

/// Store of genuine meta-reviews keyed by the paper's descriptor embeddings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetaMemory {
    pub entries: Vec<MetaMemoryEntry>,
}

impl MetaMemory {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Top-K meta-reviews of papers structurally similar to the query.
    pub fn retrieve(
        &self,
        query: &[EmbeddingVector],
        tau: f64,
        k: usize,
    ) -> Result<Vec<(&MetaMemoryEntry, f64)>, MemoryError> {
        if self.entries.is_empty() {
            return Err(MemoryError::EmptyStore);
        }
        let mut scored = Vec::new();
        for entry in &self.entries {
            let score = structural_similarity(query, &entry.graph_signature, tau)?;
            scored.push((entry, score));
        }
        scored.sort_by(|(ea, sa), (eb, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| ea.paper_id.cmp(&eb.paper_id))
        });
        scored.truncate(k);
        Ok(scored)
    }
}
