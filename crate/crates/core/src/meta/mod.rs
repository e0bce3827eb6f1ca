//! Meta-review: fold a committee's final reviews into one decision.
//!
//! Two modes. The agentic meta-reviewer runs T self-reflection turns over the
//! committee reviews and retrieved exemplar meta-reviews of structurally
//! similar papers, then emits a three-way decision. The threshold variant is
//! mechanical: mean overall score against a fixed cut, no model involved.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Bindings, EmbeddingVector, Gateway, OutputSchema};
use crate::memory::MetaMemory;
use crate::review::{BinaryDecision, Review};

pub const DEFAULT_EXEMPLARS: usize = 5;
pub const DEFAULT_REFLECTION_TURNS: usize = 2;
pub const DEFAULT_THRESHOLD: f64 = 6.0;

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("no committee reviews to aggregate")]
    EmptyCommittee,
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
    #[error(transparent)]
    Memory(#[from] crate::memory::MemoryError),
}

/// The conference's three-way outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    AcceptOral,
    AcceptPoster,
    Reject,
}

impl Decision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::AcceptOral => "accept_oral",
            Decision::AcceptPoster => "accept_poster",
            Decision::Reject => "reject",
        }
    }

    pub fn parse(raw: &str) -> Option<Self> {
        match raw {
            "accept_oral" => Some(Decision::AcceptOral),
            "accept_poster" => Some(Decision::AcceptPoster),
            "reject" => Some(Decision::Reject),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaMode {
    Agentic,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaReview {
    pub summary: String,
    pub decision: Decision,
    /// One reflection summary per agentic turn; empty in threshold mode.
    pub turn_summaries: Vec<String>,
    /// Paper ids of the retrieved exemplar meta-reviews.
    pub retrieved_meta_ids: Vec<String>,
    pub mode: MetaMode,
}

/// Arithmetic mean of the committee's overall scores.
pub fn mean_score(reviews: &[Review]) -> Result<f64, MetaError> {
    if reviews.is_empty() {
        return Err(MetaError::EmptyCommittee);
    }
    Ok(reviews.iter().map(|r| r.overall as f64).sum::<f64>() / reviews.len() as f64)
}

/// Collapse the three-way decision to the binary outcome.
pub fn to_binary(decision: Decision) -> BinaryDecision {
    match decision {
        Decision::AcceptOral | Decision::AcceptPoster => BinaryDecision::Accept,
        Decision::Reject => BinaryDecision::Reject,
    }
}

/// Fixed-threshold meta-review: mean overall ≥ threshold accepts (as poster —
/// this variant cannot award orals), anything below rejects. Deterministic
/// and gateway-free; the summary is assembled mechanically.
pub fn threshold_meta(reviews: &[Review], threshold: f64) -> Result<MetaReview, MetaError> {
    let mean = mean_score(reviews)?;
    let decision = if mean >= threshold {
        Decision::AcceptPoster
    } else {
        Decision::Reject
    };
    let strengths: usize = reviews.iter().map(|r| r.strengths.len()).sum();
    let weaknesses: usize = reviews.iter().map(|r| r.weaknesses.len()).sum();
    let relation = if mean >= threshold { "meets" } else { "falls below" };
    let summary = format!(
        "Committee of {} reviewer(s): mean overall score {:.2} {} the acceptance threshold {:.2}. \
         Reviews list {} strength(s) and {} weakness(es) in total. Decision: {}.",
        reviews.len(),
        mean,
        relation,
        threshold,
        strengths,
        weaknesses,
        decision.as_str()
    );
    Ok(MetaReview {
        summary,
        decision,
        turn_summaries: Vec::new(),
        retrieved_meta_ids: Vec::new(),
        mode: MetaMode::Threshold,
    })
}

/// Committee reviews rendered for meta prompts: one JSON block per reviewer,
/// in committee order.
pub fn committee_block(reviews: &[Review]) -> String {
    reviews
        .iter()
        .map(|r| {
            format!(
                "Review by {}:\n{}",
                r.reviewer_id,
                serde_json::to_string_pretty(r).expect("review serializes")
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn summaries_block(summaries: &[String]) -> String {
    if summaries.is_empty() {
        "(none)".to_string()
    } else {
        summaries
            .iter()
            .enumerate()
            .map(|(i, s)| format!("Turn {}: {}", i + 1, s))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Agentic meta-review: retrieve up to `k2` exemplar meta-reviews of
/// structurally similar papers, reflect for `turns` turns (each turn sees the
/// committee reviews, the exemplars, and all previous turn summaries), then
/// decide.
///
/// `graph_signature` is the descriptor embedding set of the paper under
/// decision; with an empty meta-memory the prompt renders without exemplars
/// and a warning is logged.
pub fn agentic_meta(
    reviews: &[Review],
    meta_memory: &MetaMemory,
    graph_signature: &[EmbeddingVector],
    k2: usize,
    turns: usize,
    tau: f64,
    gateway: &Gateway,
) -> Result<MetaReview, MetaError> {
    if reviews.is_empty() {
        return Err(MetaError::EmptyCommittee);
    }
    let (exemplars, retrieved_meta_ids) = if meta_memory.is_empty() || graph_signature.is_empty() {
        log::warn!("meta-memory empty or no graph signature; deciding without exemplars");
        ("(none)".to_string(), Vec::new())
    } else {
        let retrieved = meta_memory.retrieve(graph_signature, tau, k2)?;
        let block = retrieved
            .iter()
            .enumerate()
            .map(|(i, (entry, score))| {
                format!(
                    "Exemplar {} (paper {}, similarity {:.3}):\n{}",
                    i + 1,
                    entry.paper_id,
                    score,
                    entry.meta_review_text
                )
            })
            .collect::<Vec<_>>()
            .join("\n\n");
        let ids = retrieved.iter().map(|(e, _)| e.paper_id.clone()).collect();
        (block, ids)
    };
    let reviews_block = committee_block(reviews);

    let mut turn_summaries: Vec<String> = Vec::with_capacity(turns);
    for _ in 0..turns {
        let mut bindings = Bindings::new();
        bindings.insert("exemplars".to_string(), exemplars.clone());
        bindings.insert("reviews".to_string(), reviews_block.clone());
        bindings.insert("summaries".to_string(), summaries_block(&turn_summaries));
        let prompt = gateway.render("meta_reflect", &bindings)?;
        let value = gateway.complete_structured_at(
            &prompt,
            &OutputSchema::meta_reflection(),
            gateway.config().prose_temperature,
        )?;
        turn_summaries.push(value["summary"].as_str().unwrap_or_default().to_string());
    }

    let mut bindings = Bindings::new();
    bindings.insert("exemplars".to_string(), exemplars);
    bindings.insert("reviews".to_string(), reviews_block);
    bindings.insert("summaries".to_string(), summaries_block(&turn_summaries));
    let prompt = gateway.render("meta_decide", &bindings)?;
    let value = gateway.complete_structured_at(
        &prompt,
        &OutputSchema::meta_decision(),
        gateway.config().prose_temperature,
    )?;
    let decision = Decision::parse(value["decision"].as_str().unwrap_or_default())
        .expect("schema-checked enum");
    Ok(MetaReview {
        summary: value["summary"].as_str().unwrap_or_default().to_string(),
        decision,
        turn_summaries,
        retrieved_meta_ids,
        mode: MetaMode::Agentic,
    })
}
