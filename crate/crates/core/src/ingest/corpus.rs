//! Historical paper/review corpus loading (JSONL).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_manuscript, IngestError, Manuscript};
use crate::meta::Decision;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub paper_id: String,
    pub reviewer_id: String,
    pub text: String,
    pub soundness: i64,
    pub presentation: i64,
    pub contribution: i64,
    pub overall: i64,
    pub confidence: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub manuscript: Manuscript,
    pub reviews: Vec<ReviewRecord>,
    pub meta_review_text: Option<String>,
    pub decision: Option<Decision>,
}

#[derive(Debug, Deserialize)]
struct RawReview {
    reviewer_id: String,
    text: String,
    soundness: i64,
    presentation: i64,
    contribution: i64,
    overall: i64,
    confidence: i64,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: String,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    year: i32,
    markdown: String,
    #[serde(default)]
    reviews: Vec<RawReview>,
    #[serde(default)]
    meta_review: Option<String>,
    #[serde(default)]
    decision: Option<String>,
}

fn check_range(line: usize, field: &str, value: i64, min: i64, max: i64) -> Result<(), IngestError> {
    if value < min || value > max {
        return Err(IngestError::ScoreOutOfRange {
            line,
            field: field.to_string(),
            value,
        });
    }
    Ok(())
}

fn parse_decision(line: usize, raw: &str) -> Result<Decision, IngestError> {
    match raw {
        "accept_oral" => Ok(Decision::AcceptOral),
        "accept_poster" => Ok(Decision::AcceptPoster),
        "reject" => Ok(Decision::Reject),
        other => Err(IngestError::MalformedLine(
            line,
            format!("unknown decision \"{other}\""),
        )),
    }
}

/// Load and validate a JSONL corpus; any invalid line fails the load with its
/// line number.
pub fn load_corpus(path: &Path, max_chunk_tokens: usize) -> Result<Vec<PaperRecord>, IngestError> {
    let content = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line)
            .map_err(|e| IngestError::MalformedLine(line_no, e.to_string()))?;
        if raw.year <= 1900 {
            return Err(IngestError::MalformedLine(
                line_no,
                format!("implausible year {}", raw.year),
            ));
        }

        let mut manuscript = parse_manuscript(&raw.markdown, &raw.id, raw.year, max_chunk_tokens)
            .map_err(|e| IngestError::MalformedLine(line_no, e.to_string()))?;
        // The record's metadata is authoritative over what parsing inferred.
        manuscript.title = raw.title;
        manuscript.abstract_text = raw.abstract_text;

        let mut reviews = Vec::with_capacity(raw.reviews.len());
        for review in raw.reviews {
            check_range(line_no, "soundness", review.soundness, 1, 4)?;
            check_range(line_no, "presentation", review.presentation, 1, 4)?;
            check_range(line_no, "contribution", review.contribution, 1, 4)?;
            check_range(line_no, "overall", review.overall, 1, 10)?;
            check_range(line_no, "confidence", review.confidence, 1, 5)?;
            reviews.push(ReviewRecord {
                paper_id: manuscript.id.clone(),
                reviewer_id: review.reviewer_id,
                text: review.text,
                soundness: review.soundness,
                presentation: review.presentation,
                contribution: review.contribution,
                overall: review.overall,
                confidence: review.confidence,
            });
        }

        let decision = raw
            .decision
            .as_deref()
            .map(|d| parse_decision(line_no, d))
            .transpose()?;
        records.push(PaperRecord {
            manuscript,
            reviews,
            meta_review_text: raw.meta_review.filter(|s| !s.trim().is_empty()),
            decision,
        });
    }
    Ok(records)
}

/// Ground-truth decisions for evaluation; every paper must carry one.
pub fn ground_truth_decisions(records: &[PaperRecord]) -> Result<Vec<(String, Decision)>, IngestError> {
    records
        .iter()
        .map(|r| {
            r.decision
                .map(|d| (r.manuscript.id.clone(), d))
                .ok_or_else(|| IngestError::MissingDecision(r.manuscript.id.clone()))
        })
        .collect()
}
