//! One reviewer agent, and the committee around it.
//!
//! A reviewer produces an initial review from persona + novelty assessment +
//! all community descriptors, then walks the descriptors again in K blocks:
//! each refinement round retrieves the M most similar communities of other
//! papers (with what their human reviewers said) and restates the complete
//! review. The last round's review is the final one. Committee members run
//! independently and never see each other's output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Bindings, Gateway, OutputSchema, StructuredValue};
use crate::graph::PaperGraph;
use crate::ingest::AcronymTable;
use crate::memory::{retrieve_communities, MemoryIndex};
use crate::novelty::NoveltyAssessment;
use crate::persona::ReviewerPersona;

pub const DEFAULT_ROUNDS: usize = 3;
pub const DEFAULT_RETRIEVALS_PER_DESCRIPTOR: usize = 3;
/// Upper bound on strengths/weaknesses/suggestions kept per review.
pub const MAX_LIST_ITEMS: usize = 16;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("K must be at least 1 to plan rounds")]
    KZero,
    #[error("graph {0} has no community descriptors")]
    NoDescriptors(String),
    #[error("committee size {0} outside 3..=6")]
    CommitteeSizeOutOfRange(usize),
    #[error("round mismatch: previous review has round {prev}, expected {expected}")]
    RoundMismatch { prev: usize, expected: usize },
    #[error("retrieval bundle does not cover the block: missing {missing:?}, extra {extra:?}")]
    BundleMismatch { missing: Vec<u32>, extra: Vec<u32> },
    #[error("unknown descriptor {0} in round plan")]
    UnknownDescriptor(u32),
    #[error("transcript at {path} is corrupt: {detail}")]
    CorruptTranscript { path: PathBuf, detail: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
    #[error(transparent)]
    Memory(#[from] crate::memory::MemoryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryDecision {
    Accept,
    Reject,
}

/// A complete review at one round. Every round restates the whole review, so
/// the final review is simply the last element of the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub reviewer_id: String,
    pub round: usize,
    pub soundness: i64,
    pub presentation: i64,
    pub contribution: i64,
    pub overall: i64,
    pub confidence: i64,
    pub summary: String,
    pub strengths: Vec<String>,
    pub weaknesses: Vec<String>,
    pub suggestions: Vec<String>,
    pub decision: BinaryDecision,
    pub rationale: String,
}

/// Ordered blocks of descriptor ids, one block per refinement round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub blocks: Vec<Vec<u32>>,
}

/// One retrieved (similar community, human review snippet) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedPair {
    pub paper_id: String,
    pub community_id: u32,
    pub descriptor_text: String,
    pub review_snippet: String,
    pub similarity: f64,
}

/// Retrievals for one refinement block, keyed by block descriptor id. Each
/// list is sorted by similarity descending and never references the paper
/// under review.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalBundle {
    pub per_descriptor: BTreeMap<u32, Vec<RetrievedPair>>,
}

/// Partition descriptor ids into K blocks whose sizes differ by at most one,
/// preserving id order; with fewer descriptors than K the empty trailing
/// blocks are dropped and the effective round count shrinks.
pub fn plan_rounds(descriptor_ids: &[u32], k: usize) -> Result<RoundPlan, ReviewError> {
    if k == 0 {
        return Err(ReviewError::KZero);
    }
    if descriptor_ids.is_empty() {
        return Err(ReviewError::NoDescriptors("(no ids)".to_string()));
    }
    let n = descriptor_ids.len();
    let base = n / k;
    let remainder = n % k;
    let mut blocks = Vec::new();
    let mut cursor = 0usize;
    for i in 0..k {
        let size = base + usize::from(i < remainder);
        if size == 0 {
            continue;
        }
        blocks.push(descriptor_ids[cursor..cursor + size].to_vec());
        cursor += size;
    }
    Ok(RoundPlan { blocks })
}

fn render_review(review: &Review) -> String {
    serde_json::to_string_pretty(review).expect("review serializes")
}

fn parse_review(
    value: &StructuredValue,
    reviewer_id: &str,
    round: usize,
) -> Review {
    let strings = |field: &str| -> Vec<String> {
        let mut items: Vec<String> = value[field]
            .as_array()
            .map(|a| {
                a.iter()
                    .filter_map(|v| v.as_str())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default();
        if items.len() > MAX_LIST_ITEMS {
            log::warn!(
                "review by {reviewer_id} round {round}: {field} truncated to {MAX_LIST_ITEMS} items"
            );
            items.truncate(MAX_LIST_ITEMS);
        }
        items
    };
    Review {
        reviewer_id: reviewer_id.to_string(),
        round,
        soundness: value["soundness"].as_i64().expect("schema-checked"),
        presentation: value["presentation"].as_i64().expect("schema-checked"),
        contribution: value["contribution"].as_i64().expect("schema-checked"),
        overall: value["overall"].as_i64().expect("schema-checked"),
        confidence: value["confidence"].as_i64().expect("schema-checked"),
        summary: value["summary"].as_str().unwrap_or_default().to_string(),
        strengths: strings("strengths"),
        weaknesses: strings("weaknesses"),
        suggestions: strings("suggestions"),
        decision: if value["decision"].as_str() == Some("accept") {
            BinaryDecision::Accept
        } else {
            BinaryDecision::Reject
        },
        rationale: value["rationale"].as_str().unwrap_or_default().to_string(),
    }
}

/// The persona block injected into review prompts.
pub fn reviewer_style_block(
    persona: &ReviewerPersona,
    gateway: &Gateway,
) -> Result<String, ReviewError> {
    let mut bindings = Bindings::new();
    bindings.insert("strictness".to_string(), persona.strictness.as_str().to_string());
    bindings.insert(
        "evidence_focus".to_string(),
        persona.evidence_focus.as_str().to_string(),
    );
    bindings.insert(
        "open_mindedness".to_string(),
        persona.open_mindedness.as_str().to_string(),
    );
    bindings.insert("tone".to_string(), persona.tone.as_str().to_string());
    bindings.insert(
        "technical_focus".to_string(),
        persona.technical_focus.as_str().to_string(),
    );
    bindings.insert("ethic_focus".to_string(), persona.ethic_focus.as_str().to_string());
    bindings.insert("expertise".to_string(), persona.expertise.to_string());
    bindings.insert(
        "focus_areas".to_string(),
        if persona.focus_areas.is_empty() {
            "(unspecified)".to_string()
        } else {
            persona.focus_areas.join("; ")
        },
    );
    Ok(gateway.render("reviewer_style", &bindings)?.rendered)
}

fn novelty_block(novelty: &NoveltyAssessment, gateway: &Gateway) -> Result<String, ReviewError> {
    let mut bindings = Bindings::new();
    bindings.insert("novelty_score".to_string(), novelty.score.to_string());
    bindings.insert("novelty_explanation".to_string(), novelty.explanation.clone());
    Ok(gateway.render("novelty_context", &bindings)?.rendered)
}

fn descriptor_lines(graph: &PaperGraph, ids: &[u32]) -> Result<String, ReviewError> {
    let mut lines = Vec::new();
    for id in ids {
        let descriptor = graph
            .descriptors
            .get(id)
            .ok_or(ReviewError::UnknownDescriptor(*id))?;
        lines.push(format!("[community {id}] {}", descriptor.text));
    }
    Ok(lines.join("\n"))
}

/// Round-0 review: guidance, novelty context, persona style, acronyms, and
/// every community descriptor, in one prompt.
pub fn initial_review(
    persona: &ReviewerPersona,
    graph: &PaperGraph,
    novelty: &NoveltyAssessment,
    acronyms: &AcronymTable,
    gateway: &Gateway,
) -> Result<Review, ReviewError> {
    if graph.descriptors.is_empty() {
        return Err(ReviewError::NoDescriptors(graph.paper_id.clone()));
    }
    let all_ids: Vec<u32> = graph.descriptors.keys().copied().collect();
    let mut bindings = Bindings::new();
    bindings.insert(
        "guidance".to_string(),
        gateway.render("review_guidance", &Bindings::new())?.rendered,
    );
    bindings.insert("novelty".to_string(), novelty_block(novelty, gateway)?);
    bindings.insert("style".to_string(), reviewer_style_block(persona, gateway)?);
    bindings.insert("acronyms".to_string(), acronyms.render());
    bindings.insert("descriptors".to_string(), descriptor_lines(graph, &all_ids)?);
    let prompt = gateway.render("review_initial", &bindings)?;
    let value = gateway.complete_structured_at(
        &prompt,
        &OutputSchema::review(),
        gateway.config().prose_temperature,
    )?;
    Ok(parse_review(&value, &persona.reviewer_id, 0))
}

fn render_bundle(block: &[u32], bundle: &RetrievalBundle) -> String {
    let mut sections = Vec::new();
    for id in block {
        let pairs = &bundle.per_descriptor[id];
        if pairs.is_empty() {
            sections.push(format!("For community {id}: (no similar communities found)"));
            continue;
        }
        let mut lines = vec![format!("For community {id}:")];
        for pair in pairs {
            lines.push(format!(
                "- similar community (paper {}, community {}, similarity {:.3}): {}\n  reviewer comment: {}",
                pair.paper_id, pair.community_id, pair.similarity, pair.descriptor_text, pair.review_snippet
            ));
        }
        sections.push(lines.join("\n"));
    }
    sections.join("\n\n")
}

/// One refinement round: the agent re-reads a block of descriptors next to
/// the retrieved similar communities and restates the complete review.
pub fn refine_round(
    initial: &Review,
    prev: &Review,
    block: &[u32],
    bundle: &RetrievalBundle,
    graph: &PaperGraph,
    gateway: &Gateway,
) -> Result<Review, ReviewError> {
    let round = prev.round + 1;
    let missing: Vec<u32> = block
        .iter()
        .filter(|id| !bundle.per_descriptor.contains_key(id))
        .copied()
        .collect();
    let extra: Vec<u32> = bundle
        .per_descriptor
        .keys()
        .filter(|id| !block.contains(id))
        .copied()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(ReviewError::BundleMismatch { missing, extra });
    }
    let mut bindings = Bindings::new();
    bindings.insert("initial_review".to_string(), render_review(initial));
    bindings.insert("previous_review".to_string(), render_review(prev));
    bindings.insert("block".to_string(), descriptor_lines(graph, block)?);
    bindings.insert("retrieved".to_string(), render_bundle(block, bundle));
    let prompt = gateway.render("review_refine", &bindings)?;
    let value = gateway.complete_structured_at(
        &prompt,
        &OutputSchema::review(),
        gateway.config().prose_temperature,
    )?;
    Ok(parse_review(&value, &prev.reviewer_id, round))
}

/// Build the retrieval bundle for a block: the M most similar foreign
/// communities per descriptor. An empty memory index degrades to empty
/// retrievals (cold start) rather than failing the round.
pub fn build_bundle(
    block: &[u32],
    graph: &PaperGraph,
    index: &MemoryIndex,
    m: usize,
    gateway: &Gateway,
) -> Result<RetrievalBundle, ReviewError> {
    let mut bundle = RetrievalBundle::default();
    for id in block {
        let descriptor = graph
            .descriptors
            .get(id)
            .ok_or(ReviewError::UnknownDescriptor(*id))?;
        let query = match &descriptor.embedding {
            Some(e) => e.clone(),
            None => gateway.embed(&descriptor.text)?,
        };
        let pairs = if index.is_empty() {
            log::warn!(
                "memory index is empty; round retrieval for {} community {id} is empty",
                graph.paper_id
            );
            Vec::new()
        } else {
            retrieve_communities(index, &query, &graph.paper_id, m)?
                .into_iter()
                .map(|(entry, similarity)| RetrievedPair {
                    paper_id: entry.paper_id.clone(),
                    community_id: entry.community_id,
                    descriptor_text: entry.descriptor_text.clone(),
                    review_snippet: entry.review_snippet.clone(),
                    similarity,
                })
                .collect()
        };
        bundle.per_descriptor.insert(*id, pairs);
    }
    Ok(bundle)
}

fn transcript_dir(root: &Path, paper_id: &str, reviewer_id: &str) -> PathBuf {
    root.join(paper_id).join(reviewer_id)
}

fn round_path(root: &Path, paper_id: &str, reviewer_id: &str, round: usize) -> PathBuf {
    transcript_dir(root, paper_id, reviewer_id).join(format!("round-{round}.json"))
}

fn persist_round(
    root: &Path,
    paper_id: &str,
    review: &Review,
) -> Result<(), ReviewError> {
    let dir = transcript_dir(root, paper_id, &review.reviewer_id);
    std::fs::create_dir_all(&dir)?;
    let path = round_path(root, paper_id, &review.reviewer_id, review.round);
    std::fs::write(&path, serde_json::to_string_pretty(review)?)?;
    Ok(())
}

/// Load the consecutive rounds already on disk (0, 1, …); stops at the first
/// gap. Used to resume interrupted runs.
pub fn load_transcript(
    root: &Path,
    paper_id: &str,
    reviewer_id: &str,
) -> Result<Vec<Review>, ReviewError> {
    let mut transcript = Vec::new();
    for round in 0.. {
        let path = round_path(root, paper_id, reviewer_id, round);
        if !path.exists() {
            break;
        }
        let text = std::fs::read_to_string(&path)?;
        let review: Review = serde_json::from_str(&text).map_err(|e| {
            ReviewError::CorruptTranscript {
                path: path.clone(),
                detail: e.to_string(),
            }
        })?;
        if review.round != round {
            return Err(ReviewError::CorruptTranscript {
                path,
                detail: format!("file claims round {}, expected {round}", review.round),
            });
        }
        transcript.push(review);
    }
    Ok(transcript)
}

/// Run one reviewer end to end and return the full transcript (rounds
/// 0..=effective K). With a transcript root, every round is persisted as it
/// completes and existing rounds are reused, so interrupted runs resume.
pub fn run_reviewer(
    persona: &ReviewerPersona,
    graph: &PaperGraph,
    novelty: &NoveltyAssessment,
    index: &MemoryIndex,
    acronyms: &AcronymTable,
    k: usize,
    m: usize,
    gateway: &Gateway,
    transcript_root: Option<&Path>,
) -> Result<Vec<Review>, ReviewError> {
    if graph.descriptors.is_empty() {
        return Err(ReviewError::NoDescriptors(graph.paper_id.clone()));
    }
    let descriptor_ids: Vec<u32> = graph.descriptors.keys().copied().collect();
    let plan = if k == 0 {
        RoundPlan { blocks: Vec::new() }
    } else {
        plan_rounds(&descriptor_ids, k)?
    };
    let mut transcript = match transcript_root {
        Some(root) => load_transcript(root, &graph.paper_id, &persona.reviewer_id)?,
        None => Vec::new(),
    };
    transcript.truncate(plan.blocks.len() + 1);
    if transcript.is_empty() {
        let review = initial_review(persona, graph, novelty, acronyms, gateway)?;
        if let Some(root) = transcript_root {
            persist_round(root, &graph.paper_id, &review)?;
        }
        transcript.push(review);
    }
    for round in transcript.len()..=plan.blocks.len() {
        let block = &plan.blocks[round - 1];
        let bundle = build_bundle(block, graph, index, m, gateway)?;
        let initial = &transcript[0];
        let prev = transcript.last().expect("transcript non-empty");
        if prev.round != round - 1 {
            return Err(ReviewError::RoundMismatch {
                prev: prev.round,
                expected: round - 1,
            });
        }
        let review = refine_round(initial, prev, block, &bundle, graph, gateway)?;
        if let Some(root) = transcript_root {
            persist_round(root, &graph.paper_id, &review)?;
        }
        transcript.push(review);
    }
    Ok(transcript)
}

/// Committee settings shared by all members.
#[derive(Debug, Clone, Copy)]
pub struct CommitteeConfig {
    pub rounds: usize,
    pub retrievals_per_descriptor: usize,
}

impl Default for CommitteeConfig {
    fn default() -> Self {
        Self {
            rounds: DEFAULT_ROUNDS,
            retrievals_per_descriptor: DEFAULT_RETRIEVALS_PER_DESCRIPTOR,
        }
    }
}

/// Run 3–6 independent reviewers in parallel; returns the final review of
/// each, in persona order.
pub fn run_committee(
    graph: &PaperGraph,
    personas: &[ReviewerPersona],
    novelty: &NoveltyAssessment,
    index: &MemoryIndex,
    acronyms: &AcronymTable,
    config: CommitteeConfig,
    gateway: &Gateway,
    transcript_root: Option<&Path>,
) -> Result<Vec<Review>, ReviewError> {
    if !(3..=6).contains(&personas.len()) {
        return Err(ReviewError::CommitteeSizeOutOfRange(personas.len()));
    }
    let transcripts: Vec<Result<Vec<Review>, ReviewError>> = personas
        .par_iter()
        .map(|persona| {
            run_reviewer(
                persona,
                graph,
                novelty,
                index,
                acronyms,
                config.rounds,
                config.retrievals_per_descriptor,
                gateway,
                transcript_root,
            )
        })
        .collect();
    let mut finals = Vec::with_capacity(personas.len());
    for transcript in transcripts {
        let mut transcript = transcript?;
        finals.push(transcript.pop().expect("transcript has at least round 0"));
    }
    Ok(finals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{fixture_line, EmbeddingVector};
    use crate::graph::Descriptor;
    use crate::memory::{MemoryEntry, NO_MENTION_SENTINEL};
    use crate::persona::{Level, Provenance};

    fn persona(id: &str) -> ReviewerPersona {
        ReviewerPersona {
            reviewer_id: id.to_string(),
            strictness: Level::High,
            evidence_focus: Level::Medium,
            open_mindedness: Level::Low,
            tone: Level::Medium,
            technical_focus: Level::High,
            ethic_focus: Level::Low,
            expertise: 4,
            focus_areas: vec!["clarity".to_string()],
            raw_scores: None,
            provenance: Provenance::Historical,
        }
    }

    fn graph(paper_id: &str, n_descriptors: u32) -> PaperGraph {
        let mut descriptors = BTreeMap::new();
        for id in 0..n_descriptors {
            descriptors.insert(
                id,
                Descriptor {
                    community_id: id,
                    text: format!("community {id} of {paper_id}"),
                    member_entity_ids: vec![format!("e{id}")],
                    embedding: None,
                },
            );
        }
        PaperGraph {
            paper_id: paper_id.to_string(),
            entities: Vec::new(),
            relations: Vec::new(),
            partition: BTreeMap::new(),
            descriptors,
        }
    }

    fn novelty() -> NoveltyAssessment {
        NoveltyAssessment {
            score: 3,
            explanation: "Differs from prior work in scope.".to_string(),
            cited_candidate_ids: Vec::new(),
        }
    }

    fn review_json(summary: &str, weaknesses: &[&str]) -> serde_json::Value {
        serde_json::json!({
            "soundness": 3, "presentation": 2, "contribution": 3,
            "overall": 6, "confidence": 4,
            "summary": summary,
            "strengths": ["clear problem statement"],
            "weaknesses": weaknesses,
            "suggestions": ["add ablations"],
            "decision": "accept",
            "rationale": "solid enough"
        })
    }

    fn scripted(fixtures: &[String]) -> Gateway {
        Gateway::scripted_from_lines(&fixtures.join("\n")).unwrap()
    }

    #[test]
    fn ten_descriptors_three_rounds_split_4_3_3() {
        let ids: Vec<u32> = (0..10).collect();
        let plan = plan_rounds(&ids, 3).unwrap();
        let sizes: Vec<usize> = plan.blocks.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let flat: Vec<u32> = plan.blocks.concat();
        assert_eq!(flat, ids, "order must be preserved");
    }

    #[test]
    fn three_descriptors_three_rounds_are_singletons() {
        let plan = plan_rounds(&[5, 7, 9], 3).unwrap();
        assert_eq!(plan.blocks, vec![vec![5], vec![7], vec![9]]);
    }

    #[test]
    fn two_descriptors_three_rounds_drop_empty_block() {
        let plan = plan_rounds(&[1, 2], 3).unwrap();
        assert_eq!(plan.blocks, vec![vec![1], vec![2]]);
    }

    #[test]
    fn zero_k_and_empty_ids_are_errors() {
        assert!(matches!(plan_rounds(&[1], 0), Err(ReviewError::KZero)));
        assert!(matches!(plan_rounds(&[], 2), Err(ReviewError::NoDescriptors(_))));
    }

    #[test]
    fn plan_partitions_for_all_shapes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let n = rng.random_range(1..40usize);
            let k = rng.random_range(1..10usize);
            let ids: Vec<u32> = (0..n as u32).collect();
            let plan = plan_rounds(&ids, k).unwrap();
            let flat: Vec<u32> = plan.blocks.concat();
            assert_eq!(flat, ids, "n={n} k={k}");
            assert!(plan.blocks.len() <= k);
            let max = plan.blocks.iter().map(Vec::len).max().unwrap();
            let min = plan.blocks.iter().map(Vec::len).min().unwrap();
            assert!(max - min <= 1, "unbalanced blocks for n={n} k={k}");
            assert!(plan.blocks.iter().all(|b| !b.is_empty()));
        }
    }

    #[test]
    fn initial_review_round_zero() {
        let gateway = scripted(&[fixture_line(
            "review_initial",
            None,
            review_json("a fine paper", &["notation is dense"]),
        )]);
        let review = initial_review(&persona("r1"), &graph("p1", 3), &novelty(), &AcronymTable::default(), &gateway).unwrap();
        assert_eq!(review.round, 0);
        assert_eq!(review.reviewer_id, "r1");
        assert_eq!(review.decision, BinaryDecision::Accept);
        assert_eq!(review.weaknesses, vec!["notation is dense"]);
    }

    #[test]
    fn invalid_soundness_is_schema_violation() {
        let mut bad = review_json("x", &[]);
        bad["soundness"] = serde_json::json!(0);
        let gateway = scripted(&[fixture_line("review_initial", None, bad)]);
        let err = initial_review(&persona("r1"), &graph("p1", 2), &novelty(), &AcronymTable::default(), &gateway)
            .unwrap_err();
        assert!(matches!(
            err,
            ReviewError::Gateway(crate::gateway::GatewayError::SchemaViolation { .. })
        ));
    }

    #[test]
    fn empty_graph_is_rejected() {
        let gateway = scripted(&[]);
        assert!(matches!(
            initial_review(&persona("r1"), &graph("p1", 0), &novelty(), &AcronymTable::default(), &gateway),
            Err(ReviewError::NoDescriptors(_))
        ));
    }

    #[test]
    fn personas_differing_in_one_trait_change_only_the_style_block() {
        let gateway = scripted(&[]);
        let a = persona("r1");
        let mut b = persona("r1");
        b.strictness = Level::Low;
        let style_a = reviewer_style_block(&a, &gateway).unwrap();
        let style_b = reviewer_style_block(&b, &gateway).unwrap();
        assert_ne!(style_a, style_b);
        // The composed initial prompts differ exactly by the style swap.
        let compose = |style: &str| {
            let mut bindings = Bindings::new();
            bindings.insert("guidance".to_string(), "G".to_string());
            bindings.insert("novelty".to_string(), "N".to_string());
            bindings.insert("style".to_string(), style.to_string());
            bindings.insert("acronyms".to_string(), "(none)".to_string());
            bindings.insert("descriptors".to_string(), "D".to_string());
            gateway.render("review_initial", &bindings).unwrap().rendered
        };
        let prompt_a = compose(&style_a);
        let prompt_b = compose(&style_b);
        assert_eq!(prompt_a.replace(&style_a, "{STYLE}"), prompt_b.replace(&style_b, "{STYLE}"));
    }

    fn one_entry_index(model: &str) -> MemoryIndex {
        MemoryIndex::build(vec![MemoryEntry {
            paper_id: "other".to_string(),
            community_id: 2,
            descriptor_text: "similar community".to_string(),
            review_snippet: "humans liked this part".to_string(),
            embedding: EmbeddingVector::new(vec![1.0, 0.0], model),
        }])
        .unwrap()
    }

    #[test]
    fn refine_identity_advances_round_only() {
        let g = graph("p1", 2);
        let gateway = scripted(&[
            fixture_line("review_initial", None, review_json("v0", &["w1"])),
            fixture_line("review_refine", None, review_json("v0", &["w1"])),
        ]);
        let r0 = initial_review(&persona("r1"), &g, &novelty(), &AcronymTable::default(), &gateway).unwrap();
        let bundle = RetrievalBundle {
            per_descriptor: BTreeMap::from([(0, Vec::new())]),
        };
        let r1 = refine_round(&r0, &r0, &[0], &bundle, &g, &gateway).unwrap();
        assert_eq!(r1.round, 1);
        assert_eq!(r1.summary, r0.summary);
        assert_eq!(r1.weaknesses, r0.weaknesses);
    }

    #[test]
    fn refinement_can_grow_weaknesses() {
        let g = graph("p1", 1);
        let gateway = scripted(&[
            fixture_line("review_initial", None, review_json("v0", &["w1"])),
            fixture_line(
                "review_refine",
                None,
                review_json("v1", &["w1", "missing baseline, as another reviewer noted"]),
            ),
        ]);
        let r0 = initial_review(&persona("r1"), &g, &novelty(), &AcronymTable::default(), &gateway).unwrap();
        let bundle = RetrievalBundle {
            per_descriptor: BTreeMap::from([(0, Vec::new())]),
        };
        let r1 = refine_round(&r0, &r0, &[0], &bundle, &g, &gateway).unwrap();
        assert_eq!(r1.weaknesses.len(), r0.weaknesses.len() + 1);
    }

    #[test]
    fn bundle_must_cover_block_exactly() {
        let g = graph("p1", 2);
        let r0 = Review {
            reviewer_id: "r1".to_string(),
            round: 0,
            soundness: 3,
            presentation: 3,
            contribution: 3,
            overall: 6,
            confidence: 3,
            summary: "s".to_string(),
            strengths: vec![],
            weaknesses: vec![],
            suggestions: vec![],
            decision: BinaryDecision::Accept,
            rationale: "r".to_string(),
        };
        let gateway = scripted(&[]);
        let empty = RetrievalBundle::default();
        let err = refine_round(&r0, &r0, &[0], &empty, &g, &gateway).unwrap_err();
        assert!(matches!(err, ReviewError::BundleMismatch { ref missing, .. } if missing == &[0]));
        let extra = RetrievalBundle {
            per_descriptor: BTreeMap::from([(0, Vec::new()), (1, Vec::new())]),
        };
        let err = refine_round(&r0, &r0, &[0], &extra, &g, &gateway).unwrap_err();
        assert!(matches!(err, ReviewError::BundleMismatch { ref extra, .. } if extra == &[1]));
    }

    #[test]
    fn bundle_retrieves_sorted_foreign_pairs() {
        let mut g = graph("p1", 1);
        let gateway = scripted(&[]);
        let model = gateway.embedding_model_id().to_string();
        // Descriptor carries its own embedding in the index's space, so no
        // embed fallback happens.
        g.descriptors.get_mut(&0).unwrap().embedding =
            Some(EmbeddingVector::new(vec![1.0, 0.0], &model));
        let index = one_entry_index(&model);
        let bundle = build_bundle(&[0], &g, &index, 3, &gateway).unwrap();
        let pairs = &bundle.per_descriptor[&0];
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].paper_id, "other");
        assert_eq!(pairs[0].review_snippet, "humans liked this part");
    }

    #[test]
    fn reviewer_k1_m1_makes_exactly_two_chat_calls() {
        let g = graph("p1", 3);
        let gateway = scripted(&[
            fixture_line("review_initial", None, review_json("v0", &[])),
            fixture_line("review_refine", None, review_json("v1", &[])),
        ]);
        let index = MemoryIndex::default();
        let transcript = run_reviewer(
            &persona("r1"),
            &g,
            &novelty(),
            &index,
            &AcronymTable::default(),
            1,
            1,
            &gateway,
            None,
        )
        .unwrap();
        assert_eq!(transcript.len(), 2);
        assert_eq!(gateway.chat_calls(), 2);
        assert_eq!(transcript.last().unwrap().round, 1);
    }

    #[test]
    fn k_zero_returns_initial_as_final() {
        let g = graph("p1", 2);
        let gateway = scripted(&[fixture_line("review_initial", None, review_json("v0", &[]))]);
        let transcript = run_reviewer(
            &persona("r1"),
            &g,
            &novelty(),
            &MemoryIndex::default(),
            &AcronymTable::default(),
            0,
            3,
            &gateway,
            None,
        )
        .unwrap();
        assert_eq!(transcript.len(), 1);
        assert_eq!(transcript[0].round, 0);
        assert_eq!(gateway.chat_calls(), 1);
    }

    #[test]
    fn rounds_are_contiguous_for_k_larger_than_descriptors() {
        let g = graph("p1", 2);
        let gateway = scripted(&[
            fixture_line("review_initial", None, review_json("v0", &[])),
            fixture_line("review_refine", None, review_json("v1", &[])),
        ]);
        let transcript = run_reviewer(
            &persona("r1"),
            &g,
            &novelty(),
            &MemoryIndex::default(),
            &AcronymTable::default(),
            5,
            2,
            &gateway,
            None,
        )
        .unwrap();
        // 2 descriptors, K=5 → 2 effective refinement rounds.
        let rounds: Vec<usize> = transcript.iter().map(|r| r.round).collect();
        assert_eq!(rounds, vec![0, 1, 2]);
    }

    #[test]
    fn transcripts_persist_and_resume_without_new_calls() {
        let g = graph("p1", 2);
        let fixtures = [
            fixture_line("review_initial", None, review_json("v0", &[])),
            fixture_line("review_refine", None, review_json("v1", &[])),
        ];
        let dir = tempfile::tempdir().unwrap();
        let first = scripted(&fixtures);
        let transcript = run_reviewer(
            &persona("r1"),
            &g,
            &novelty(),
            &MemoryIndex::default(),
            &AcronymTable::default(),
            2,
            1,
            &first,
            Some(dir.path()),
        )
        .unwrap();
        assert_eq!(transcript.len(), 3);
        for round in 0..3 {
            assert!(dir.path().join("p1/r1").join(format!("round-{round}.json")).exists());
        }
        // Fresh gateway, same transcripts → no chat traffic at all.
        let second = scripted(&fixtures);
        let resumed = run_reviewer(
            &persona("r1"),
            &g,
            &novelty(),
            &MemoryIndex::default(),
            &AcronymTable::default(),
            2,
            1,
            &second,
            Some(dir.path()),
        )
        .unwrap();
        assert_eq!(second.chat_calls(), 0);
        assert_eq!(resumed, transcript);
    }

    #[test]
    fn partial_transcript_resumes_midway() {
        let g = graph("p1", 2);
        let fixtures = [
            fixture_line("review_initial", None, review_json("v0", &[])),
            fixture_line("review_refine", None, review_json("v1", &[])),
        ];
        let dir = tempfile::tempdir().unwrap();
        let first = scripted(&fixtures);
        run_reviewer(
            &persona("r1"),
            &g,
            &novelty(),
            &MemoryIndex::default(),
            &AcronymTable::default(),
            2,
            1,
            &first,
            Some(dir.path()),
        )
        .unwrap();
        // Drop the last round; the rerun should redo only that round.
        std::fs::remove_file(dir.path().join("p1/r1/round-2.json")).unwrap();
        let second = scripted(&fixtures);
        let resumed = run_reviewer(
            &persona("r1"),
            &g,
            &novelty(),
            &MemoryIndex::default(),
            &AcronymTable::default(),
            2,
            1,
            &second,
            Some(dir.path()),
        )
        .unwrap();
        assert_eq!(resumed.len(), 3);
        assert_eq!(second.chat_calls(), 1);
    }

    #[test]
    fn committee_size_bounds() {
        let g = graph("p1", 2);
        let gateway = scripted(&[
            fixture_line("review_initial", None, review_json("v0", &[])),
            fixture_line("review_refine", None, review_json("v1", &[])),
        ]);
        let personas: Vec<ReviewerPersona> = (0..3).map(|i| persona(&format!("r{i}"))).collect();
        let reviews = run_committee(
            &g,
            &personas,
            &novelty(),
            &MemoryIndex::default(),
            &AcronymTable::default(),
            CommitteeConfig { rounds: 1, retrievals_per_descriptor: 1 },
            &gateway,
            None,
        )
        .unwrap();
        assert_eq!(reviews.len(), 3);
        let ids: Vec<&str> = reviews.iter().map(|r| r.reviewer_id.as_str()).collect();
        assert_eq!(ids, vec!["r0", "r1", "r2"]);
        assert!(reviews.iter().all(|r| r.round == 1));

        let seven: Vec<ReviewerPersona> = (0..7).map(|i| persona(&format!("r{i}"))).collect();
        assert!(matches!(
            run_committee(
                &g,
                &seven,
                &novelty(),
                &MemoryIndex::default(),
                &AcronymTable::default(),
                CommitteeConfig::default(),
                &gateway,
                None,
            ),
            Err(ReviewError::CommitteeSizeOutOfRange(7))
        ));
    }

    #[test]
    fn review_roundtrips_as_json() {
        let review = Review {
            reviewer_id: "r1".to_string(),
            round: 2,
            soundness: 4,
            presentation: 1,
            contribution: 2,
            overall: 7,
            confidence: 5,
            summary: "s".to_string(),
            strengths: vec!["a".to_string()],
            weaknesses: vec![],
            suggestions: vec!["b".to_string()],
            decision: BinaryDecision::Reject,
            rationale: "r".to_string(),
        };
        let json = serde_json::to_string(&review).unwrap();
        assert!(json.contains("\"decision\":\"reject\""));
        let back: Review = serde_json::from_str(&json).unwrap();
        assert_eq!(back, review);
    }

    #[test]
    fn sentinel_snippets_are_still_shown() {
        let pair = RetrievedPair {
            paper_id: "other".to_string(),
            community_id: 0,
            descriptor_text: "d".to_string(),
            review_snippet: NO_MENTION_SENTINEL.to_string(),
            similarity: 0.9,
        };
        let bundle = RetrievalBundle {
            per_descriptor: BTreeMap::from([(0, vec![pair])]),
        };
        let rendered = render_bundle(&[0], &bundle);
        assert!(rendered.contains(NO_MENTION_SENTINEL));
    }
}
