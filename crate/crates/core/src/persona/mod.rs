//! Reviewer personas mined from historical reviews.
//!
//! Six behavioural traits are scored by contrastive comparison: the
//! reviewer's review is pitted against reviews of other papers, a judge picks
//! which shows more of the trait, and the score is the fraction of judgments
//! favoring the target. Scores are binned into low/medium/high against the
//! corpus-wide distribution. Expertise comes from the reviewer's confidence
//! scores; focus areas from keyword extraction over their past reviews.

use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Bindings, Gateway, OutputSchema};
use crate::ingest::{PaperRecord, ReviewRecord};
use crate::seed::derive_seed;

/// The six contrastively scored traits, in canonical order.
pub const TRAITS: [&str; 6] = [
    "strictness",
    "evidence_focus",
    "open_mindedness",
    "tone",
    "technical_focus",
    "ethic_focus",
];

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error("reviewer {0} has no reviews in the corpus")]
    UnknownReviewer(String),
    #[error("unknown trait {0}")]
    UnknownTrait(String),
    #[error("corpus has only {available} eligible contrast reviews, need {needed}")]
    InsufficientCorpus { needed: usize, available: usize },
    #[error("empty input list")]
    EmptyList,
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
}

/// Trait intensity bucket. Ordered so binning monotonicity is expressible.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Historical,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerPersona {
    pub reviewer_id: String,
    pub strictness: Level,
    pub evidence_focus: Level,
    pub open_mindedness: Level,
    pub tone: Level,
    pub technical_focus: Level,
    pub ethic_focus: Level,
    /// 1–5, from mean review confidence.
    pub expertise: i64,
    pub focus_areas: Vec<String>,
    /// Raw trait scores in [0,1]; present only for historical personas.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_scores: Option<BTreeMap<String, f64>>,
    pub provenance: Provenance,
}

impl ReviewerPersona {
    pub fn level_of(&self, trait_name: &str) -> Option<Level> {
        match trait_name {
            "strictness" => Some(self.strictness),
            "evidence_focus" => Some(self.evidence_focus),
            "open_mindedness" => Some(self.open_mindedness),
            "tone" => Some(self.tone),
            "technical_focus" => Some(self.technical_focus),
            "ethic_focus" => Some(self.ethic_focus),
            _ => None,
        }
    }

    fn set_level(&mut self, trait_name: &str, level: Level) {
        match trait_name {
            "strictness" => self.strictness = level,
            "evidence_focus" => self.evidence_focus = level,
            "open_mindedness" => self.open_mindedness = level,
            "tone" => self.tone = level,
            "technical_focus" => self.technical_focus = level,
            "ethic_focus" => self.ethic_focus = level,
            _ => unreachable!("trait names come from TRAITS"),
        }
    }
}

/// One contrastive judgment input: the target reviewer's review, the other
/// reviews of the same paper as calibration anchors, and a review of a
/// different paper to contrast against.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSample {
    pub target_review: String,
    pub anchor_reviews: Vec<String>,
    pub other_review: String,
}

/// Decides whether the target review shows more of a trait than the other.
/// Abstracted so tests can script verdicts without a gateway.
pub trait PreferenceJudge {
    fn prefers_target(
        &self,
        trait_name: &str,
        sample: &ComparisonSample,
    ) -> Result<bool, PersonaError>;
}

/// Production judge: renders the trait-comparison prompt and reads the
/// structured winner field.
pub struct GatewayJudge<'a> {
    gateway: &'a Gateway,
}

impl<'a> GatewayJudge<'a> {
    pub fn new(gateway: &'a Gateway) -> Self {
        Self { gateway }
    }
}

impl PreferenceJudge for GatewayJudge<'_> {
    fn prefers_target(
        &self,
        trait_name: &str,
        sample: &ComparisonSample,
    ) -> Result<bool, PersonaError> {
        let anchors = if sample.anchor_reviews.is_empty() {
            "(none)".to_string()
        } else {
            sample
                .anchor_reviews
                .iter()
                .enumerate()
                .map(|(i, text)| format!("Anchor review {}:\n{}", i + 1, text))
                .collect::<Vec<_>>()
                .join("\n\n")
        };
        let mut bindings = Bindings::new();
        bindings.insert("trait".to_string(), trait_name.to_string());
        bindings.insert("target".to_string(), sample.target_review.clone());
        bindings.insert("anchor".to_string(), anchors);
        bindings.insert("other".to_string(), sample.other_review.clone());
        let prompt = self.gateway.render("trait_comparison", &bindings)?;
        let value = self
            .gateway
            .complete_structured(&prompt, &OutputSchema::trait_judgment())?;
        Ok(value["winner"].as_str() == Some("target"))
    }
}

/// The reviewer's most recent review (latest manuscript year; later corpus
/// position breaks ties), with its paper's index.
fn most_recent_review<'a>(
    corpus: &'a [PaperRecord],
    reviewer_id: &str,
) -> Option<(usize, &'a ReviewRecord)> {
    let mut best: Option<(i32, usize, &ReviewRecord)> = None;
    for (pi, paper) in corpus.iter().enumerate() {
        for review in &paper.reviews {
            if review.reviewer_id != reviewer_id {
                continue;
            }
            let candidate = (paper.manuscript.year, pi, review);
            let replace = match &best {
                None => true,
                Some((year, idx, _)) => {
                    (candidate.0, candidate.1) >= (*year, *idx)
                }
            };
            if replace {
                best = Some(candidate);
            }
        }
    }
    best.map(|(_, pi, review)| (pi, review))
}

/// Fraction of `n` contrastive judgments favoring the target reviewer.
///
/// Contrast reviews are drawn uniformly without replacement (under `seed`)
/// from reviews of other papers by other reviewers. The score is a plain
/// count, so it is invariant to judgment order.
pub fn contrastive_trait_score(
    reviewer_id: &str,
    trait_name: &str,
    corpus: &[PaperRecord],
    n: usize,
    seed: u64,
    judge: &dyn PreferenceJudge,
) -> Result<f64, PersonaError> {
    if !TRAITS.contains(&trait_name) {
        return Err(PersonaError::UnknownTrait(trait_name.to_string()));
    }
    let (paper_index, target) = most_recent_review(corpus, reviewer_id)
        .ok_or_else(|| PersonaError::UnknownReviewer(reviewer_id.to_string()))?;
    let anchors: Vec<String> = corpus[paper_index]
        .reviews
        .iter()
        .filter(|r| r.reviewer_id != reviewer_id)
        .map(|r| r.text.clone())
        .collect();
    let pool: Vec<&ReviewRecord> = corpus
        .iter()
        .flat_map(|p| &p.reviews)
        .filter(|r| r.paper_id != target.paper_id && r.reviewer_id != reviewer_id)
        .collect();
    if pool.len() < n || n == 0 {
        return Err(PersonaError::InsufficientCorpus {
            needed: n.max(1),
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, pool.len(), n);
    let mut favored = 0usize;
    for idx in chosen {
        let sample = ComparisonSample {
            target_review: target.text.clone(),
            anchor_reviews: anchors.clone(),
            other_review: pool[idx].text.clone(),
        };
        if judge.prefers_target(trait_name, &sample)? {
            favored += 1;
        }
    }
    Ok(favored as f64 / n as f64)
}

/// Percentile by linear interpolation at rank `p * (len - 1)` over the
/// sorted values.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Bin a trait score against the corpus distribution: low below the 33rd
/// percentile, high at or above the 67th, medium between. When the two cut
/// points coincide (degenerate distribution) everything at the cut is medium,
/// never high — a flat corpus has no "high" reviewers.
pub fn bin_trait(score: f64, corpus_scores: &[f64]) -> Level {
    assert!(!corpus_scores.is_empty(), "corpus scores must be non-empty");
    let mut sorted = corpus_scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    let p33 = percentile(&sorted, 0.33);
    let p67 = percentile(&sorted, 0.67);
    if score < p33 {
        Level::Low
    } else if score >= p67 && p33 < p67 {
        Level::High
    } else {
        Level::Medium
    }
}

/// Mean confidence, rounded half-up and clamped into 1..=5.
pub fn expertise_from_confidence(confidences: &[i64]) -> Result<i64, PersonaError> {
    if confidences.is_empty() {
        return Err(PersonaError::EmptyList);
    }
    let mean = confidences.iter().sum::<i64>() as f64 / confidences.len() as f64;
    Ok((mean.round() as i64).clamp(1, 5))
}

/// Keywords the reviewer habitually attends to, extracted from their past
/// reviews: lowercase, deduplicated in first-seen order, at most `max` items.
pub fn extract_focus_areas(
    reviews: &[String],
    max: usize,
    gateway: &Gateway,
) -> Result<Vec<String>, PersonaError> {
    if reviews.is_empty() {
        return Err(PersonaError::EmptyList);
    }
    let joined = reviews
        .iter()
        .enumerate()
        .map(|(i, text)| format!("Review {}:\n{}", i + 1, text))
        .collect::<Vec<_>>()
        .join("\n\n");
    let mut bindings = Bindings::new();
    bindings.insert("reviews".to_string(), joined);
    let prompt = gateway.render("focus_keywords", &bindings)?;
    let value = gateway.complete_structured(&prompt, &OutputSchema::keyword_list())?;
    let mut seen = Vec::new();
    if let Some(items) = value["keywords"].as_array() {
        for item in items {
            if let Some(raw) = item.as_str() {
                let keyword = raw.trim().to_lowercase();
                if !keyword.is_empty() && !seen.contains(&keyword) {
                    seen.push(keyword);
                }
            }
            if seen.len() == max {
                break;
            }
        }
    }
    Ok(seen)
}

/// All reviewer ids appearing in the corpus, sorted.
pub fn reviewer_ids(corpus: &[PaperRecord]) -> Vec<String> {
    let mut ids: Vec<String> = corpus
        .iter()
        .flat_map(|p| &p.reviews)
        .map(|r| r.reviewer_id.clone())
        .collect();
    ids.sort();
    ids.dedup();
    ids
}

/// Build historical personas for every reviewer in the corpus.
///
/// Raw trait scores are computed for the whole population first so each
/// reviewer is binned against the same distribution. Per-(trait, reviewer)
/// seeds derive from the master seed, keeping scores independent of iteration
/// order and of which other reviewers exist.
pub fn build_personas(
    corpus: &[PaperRecord],
    n: usize,
    seed: u64,
    max_focus_areas: usize,
    judge: &dyn PreferenceJudge,
    gateway: &Gateway,
) -> Result<BTreeMap<String, ReviewerPersona>, PersonaError> {
    let ids = reviewer_ids(corpus);
    let mut scores: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for trait_name in TRAITS {
        for id in &ids {
            let trait_seed = derive_seed(seed, &format!("trait\u{0}{trait_name}\u{0}{id}"));
            let score =
                contrastive_trait_score(id, trait_name, corpus, n, trait_seed, judge)?;
            scores.entry(id.clone()).or_default().insert(trait_name.to_string(), score);
        }
    }
    let mut personas = BTreeMap::new();
    for id in &ids {
        let own: Vec<&ReviewRecord> = corpus
            .iter()
            .flat_map(|p| &p.reviews)
            .filter(|r| r.reviewer_id == *id)
            .collect();
        let confidences: Vec<i64> = own.iter().map(|r| r.confidence).collect();
        let texts: Vec<String> = own.iter().map(|r| r.text.clone()).collect();
        let raw = scores[id].clone();
        let mut persona = ReviewerPersona {
            reviewer_id: id.clone(),
            strictness: Level::Medium,
            evidence_focus: Level::Medium,
            open_mindedness: Level::Medium,
            tone: Level::Medium,
            technical_focus: Level::Medium,
            ethic_focus: Level::Medium,
            expertise: expertise_from_confidence(&confidences)?,
            focus_areas: extract_focus_areas(&texts, max_focus_areas, gateway)?,
            raw_scores: Some(raw.clone()),
            provenance: Provenance::Historical,
        };
        for trait_name in TRAITS {
            let population: Vec<f64> = ids.iter().map(|other| scores[other][trait_name]).collect();
            persona.set_level(trait_name, bin_trait(raw[trait_name], &population));
        }
        personas.insert(id.clone(), persona);
    }
    Ok(personas)
}

/// Historical persona for one reviewer. Computes the full population first —
/// binning is relative, so there is no cheaper honest answer.
pub fn build_persona(
    reviewer_id: &str,
    corpus: &[PaperRecord],
    n: usize,
    seed: u64,
    max_focus_areas: usize,
    judge: &dyn PreferenceJudge,
    gateway: &Gateway,
) -> Result<ReviewerPersona, PersonaError> {
    build_personas(corpus, n, seed, max_focus_areas, judge, gateway)?
        .remove(reviewer_id)
        .ok_or_else(|| PersonaError::UnknownReviewer(reviewer_id.to_string()))
}

/// Persona with every attribute drawn uniformly under the seed; no raw
/// scores, no focus areas.
pub fn random_persona(reviewer_id: &str, seed: u64) -> ReviewerPersona {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, reviewer_id));
    let draw = |rng: &mut ChaCha8Rng| match rng.random_range(0..3u8) {
        0 => Level::Low,
        1 => Level::Medium,
        _ => Level::High,
    };
    ReviewerPersona {
        reviewer_id: reviewer_id.to_string(),
        strictness: draw(&mut rng),
        evidence_focus: draw(&mut rng),
        open_mindedness: draw(&mut rng),
        tone: draw(&mut rng),
        technical_focus: draw(&mut rng),
        ethic_focus: draw(&mut rng),
        expertise: rng.random_range(1..=5),
        focus_areas: Vec::new(),
        raw_scores: None,
        provenance: Provenance::Random,
    }
}

/// Test/measurement judge that replays a fixed verdict sequence.
pub struct SequenceJudge {
    verdicts: Mutex<std::vec::IntoIter<bool>>,
}

impl SequenceJudge {
    pub fn new(verdicts: Vec<bool>) -> Self {
        Self {
            verdicts: Mutex::new(verdicts.into_iter()),
        }
    }
}

impl PreferenceJudge for SequenceJudge {
    fn prefers_target(&self, _: &str, _: &ComparisonSample) -> Result<bool, PersonaError> {
        Ok(self
            .verdicts
            .lock()
            .expect("judge mutex")
            .next()
            .expect("sequence judge ran out of verdicts"))
    }
}

/// Judge that flips a seeded fair coin; used by distribution checks.
pub struct CoinJudge {
    rng: Mutex<ChaCha8Rng>,
}

impl CoinJudge {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl PreferenceJudge for CoinJudge {
    fn prefers_target(&self, _: &str, _: &ComparisonSample) -> Result<bool, PersonaError> {
        Ok(self.rng.lock().expect("judge mutex").random_range(0..2u8) == 1)
    }
}
