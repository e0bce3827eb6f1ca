//! Manuscript novelty assessment against retrieved prior work.
//!
//! Keywords extracted from the introduction drive a semantic search over
//! prior papers (strictly earlier year); the retrieved candidates are then
//! placed next to the manuscript in a scoring prompt that returns a 1–4
//! novelty score with an explanation and verifiable citations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Bindings, EmbeddingVector, Gateway, OutputSchema};
use crate::ingest::{Manuscript, PaperRecord};
use crate::memory::cosine;

pub const DEFAULT_MAX_CANDIDATES: usize = 10;
pub const DEFAULT_MAX_KEYWORDS: usize = 10;

#[derive(Debug, Error)]
pub enum NoveltyError {
    #[error("manuscript {0} has no usable introduction section")]
    NoIntroduction(String),
    #[error("keyword extraction produced no keywords")]
    NoKeywords,
    #[error("search requires at least one keyword")]
    EmptyQuery,
    #[error("search source unavailable: {0}")]
    SourceUnavailable(String),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
    #[error(transparent)]
    Memory(#[from] crate::memory::MemoryError),
}

/// A prior paper a manuscript is compared against. Only title, abstract, and
/// introduction are ever shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorWorkCandidate {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub introduction: Option<String>,
    pub year: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyAssessment {
    /// 1 (not novel) .. 4 (highly novel).
    pub score: i64,
    pub explanation: String,
    /// Candidate ids the explanation cites; always a subset of the retrieved
    /// candidates.
    pub cited_candidate_ids: Vec<String>,
}

/// Keywords from the manuscript introduction (first non-empty section as a
/// fallback), lowercased, deduplicated, truncated to `max_keywords`.
pub fn extract_novelty_keywords(
    manuscript: &Manuscript,
    max_keywords: usize,
    gateway: &Gateway,
) -> Result<Vec<String>, NoveltyError> {
    let introduction = manuscript
        .introduction()
        .ok_or_else(|| NoveltyError::NoIntroduction(manuscript.id.clone()))?;
    let mut bindings = Bindings::new();
    bindings.insert("introduction".to_string(), introduction.body.clone());
    let prompt = gateway.render("novelty_keywords", &bindings)?;
    let value = gateway.complete_structured(&prompt, &OutputSchema::keyword_list())?;
    let mut keywords = Vec::new();
    if let Some(items) = value["keywords"].as_array() {
        for item in items {
            if let Some(raw) = item.as_str() {
                let keyword = raw.trim().to_lowercase();
                if !keyword.is_empty() && !keywords.contains(&keyword) {
                    keywords.push(keyword);
                }
            }
            if keywords.len() == max_keywords {
                break;
            }
        }
    }
    if keywords.is_empty() {
        return Err(NoveltyError::NoKeywords);
    }
    Ok(keywords)
}

struct LocalEntry {
    candidate: PriorWorkCandidate,
    embedding: EmbeddingVector,
}

/// Semantic index over a local corpus: one embedding of "title ++ abstract"
/// per paper.
pub struct LocalSearchIndex {
    entries: Vec<LocalEntry>,
}

impl LocalSearchIndex {
    pub fn build(corpus: &[PaperRecord], gateway: &Gateway) -> Result<Self, NoveltyError> {
        let mut entries = Vec::with_capacity(corpus.len());
        for paper in corpus {
            let m = &paper.manuscript;
            let embedding = gateway.embed(&format!("{}\n\n{}", m.title, m.abstract_text))?;
            entries.push(LocalEntry {
                candidate: PriorWorkCandidate {
                    id: m.id.clone(),
                    title: m.title.clone(),
                    abstract_text: m.abstract_text.clone(),
                    introduction: m.introduction().map(|s| s.body.clone()),
                    year: m.year,
                },
                embedding,
            });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Papers strictly older than `target_year`, ranked by cosine to the
    /// query embedding, at most `limit`. Ties break on paper id.
    fn search(
        &self,
        query: &EmbeddingVector,
        target_year: i32,
        limit: usize,
    ) -> Result<Vec<PriorWorkCandidate>, NoveltyError> {
        let mut scored = Vec::new();
        for entry in &self.entries {
            if entry.candidate.year >= target_year {
                continue;
            }
            scored.push((cosine(query, &entry.embedding)?, &entry.candidate));
        }
        scored.sort_by(|(sa, ca), (sb, cb)| {
            sb.partial_cmp(sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| ca.id.cmp(&cb.id))
        });
        Ok(scored.into_iter().take(limit).map(|(_, c)| c.clone()).collect())
    }
}

/// External scholarly-search endpoint; disabled unless configured.
#[derive(Debug, Clone)]
pub struct ExternalSearch {
    pub url: String,
    pub key: Option<String>,
}

impl ExternalSearch {
    /// Reads GAR_SEARCH_URL / GAR_SEARCH_KEY; absent URL means disabled.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var("GAR_SEARCH_URL").ok()?;
        if url.trim().is_empty() {
            return None;
        }
        Some(Self {
            url,
            key: std::env::var("GAR_SEARCH_KEY").ok(),
        })
    }

    fn search(
        &self,
        query: &str,
        limit: usize,
        year_lt: i32,
    ) -> Result<Vec<PriorWorkCandidate>, NoveltyError> {
        let body = serde_json::json!({
            "query": query,
            "limit": limit,
            "year_lt": year_lt,
        });
        let value = crate::gateway::post_json(&self.url, self.key.as_deref(), &body)
            .map_err(|e| NoveltyError::SourceUnavailable(e.to_string()))?;
        let items = value
            .as_array()
            .or_else(|| value["results"].as_array())
            .ok_or_else(|| {
                NoveltyError::SourceUnavailable("response is not a candidate list".to_string())
            })?;
        let mut candidates = Vec::new();
        for item in items {
            let year = item["year"].as_i64().unwrap_or(0) as i32;
            candidates.push(PriorWorkCandidate {
                id: item["id"].as_str().unwrap_or_default().to_string(),
                title: item["title"].as_str().unwrap_or_default().to_string(),
                abstract_text: item["abstract"].as_str().unwrap_or_default().to_string(),
                introduction: None,
                year,
            });
        }
        Ok(candidates)
    }
}

/// Retrieve prior-work candidates for the keywords.
///
/// When an external endpoint is configured it is tried first; on any failure
/// the local index answers instead (with a warning). The strict year filter
/// is enforced here regardless of what the source returned.
pub fn search_prior_work(
    keywords: &[String],
    target_year: i32,
    external: Option<&ExternalSearch>,
    index: &LocalSearchIndex,
    max_candidates: usize,
    gateway: &Gateway,
) -> Result<Vec<PriorWorkCandidate>, NoveltyError> {
    if keywords.is_empty() {
        return Err(NoveltyError::EmptyQuery);
    }
    let query_text = keywords.join("; ");
    if let Some(client) = external {
        match client.search(&query_text, max_candidates, target_year) {
            Ok(candidates) => {
                let filtered: Vec<PriorWorkCandidate> = candidates
                    .into_iter()
                    .filter(|c| c.year < target_year)
                    .take(max_candidates)
                    .collect();
                return Ok(filtered);
            }
            Err(e) => {
                log::warn!("external search failed ({e}); falling back to local index");
            }
        }
    }
    let query = gateway.embed(&query_text)?;
    index.search(&query, target_year, max_candidates)
}

fn render_candidates(candidates: &[PriorWorkCandidate]) -> String {
    if candidates.is_empty() {
        return "(none)".to_string();
    }
    candidates
        .iter()
        .map(|c| {
            let mut block = format!(
                "[{}] {} ({})\nAbstract: {}",
                c.id, c.title, c.year, c.abstract_text
            );
            if let Some(intro) = &c.introduction {
                block.push_str("\nIntroduction: ");
                block.push_str(intro);
            }
            block
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Score the manuscript's novelty against the candidates. Citations that do
/// not name a retrieved candidate are dropped with a warning, so every kept
/// citation is verifiable.
pub fn assess_novelty(
    manuscript: &Manuscript,
    candidates: &[PriorWorkCandidate],
    acronyms: &crate::ingest::AcronymTable,
    gateway: &Gateway,
) -> Result<NoveltyAssessment, NoveltyError> {
    let introduction = manuscript
        .introduction()
        .map(|s| s.body.clone())
        .unwrap_or_else(|| "(none)".to_string());
    let mut bindings = Bindings::new();
    bindings.insert("acronyms".to_string(), acronyms.render());
    bindings.insert("title".to_string(), manuscript.title.clone());
    bindings.insert("abstract".to_string(), manuscript.abstract_text.clone());
    bindings.insert("introduction".to_string(), introduction);
    bindings.insert("candidates".to_string(), render_candidates(candidates));
    let prompt = gateway.render("novelty_assess", &bindings)?;
    let value = gateway.complete_structured(&prompt, &OutputSchema::novelty())?;
    let score = value["score"].as_i64().expect("schema guarantees integer");
    let explanation = value["explanation"].as_str().unwrap_or_default().to_string();
    let mut cited = Vec::new();
    if let Some(ids) = value["cited_ids"].as_array() {
        for id in ids.iter().filter_map(|v| v.as_str()) {
            if candidates.iter().any(|c| c.id == id) {
                if !cited.contains(&id.to_string()) {
                    cited.push(id.to_string());
                }
            } else {
                log::warn!(
                    "novelty assessment of {} cited unknown candidate {id}; dropped",
                    manuscript.id
                );
            }
        }
    }
    Ok(NoveltyAssessment {
        score,
        explanation,
        cited_candidate_ids: cited,
    })
}

/// Render the novelty context block used inside review prompts.
pub fn novelty_context(assessment: &NoveltyAssessment, gateway: &Gateway) -> Result<String, NoveltyError> {
    let mut bindings = Bindings::new();
    bindings.insert("novelty_score".to_string(), assessment.score.to_string());
    bindings.insert(
        "novelty_explanation".to_string(),
        assessment.explanation.clone(),
    );
    Ok(gateway.render("novelty_context", &bindings)?.rendered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::fixture_line;
    use crate::ingest::{parse_manuscript, AcronymTable};

    fn manuscript() -> Manuscript {
        parse_manuscript(
            "# Title\n\n## Abstract\n\nWe study widgets.\n\n## Introduction\n\nWidgets matter for frobnication.\n",
            "m1",
            2024,
            1200,
        )
        .unwrap()
    }

    fn paper(id: &str, year: i32, title: &str) -> PaperRecord {
        PaperRecord {
            manuscript: parse_manuscript(
                &format!("# {title}\n\n## Abstract\n\nAbout {title}.\n\n## Introduction\n\nIntro of {title}.\n"),
                id,
                year,
                1200,
            )
            .unwrap(),
            reviews: Vec::new(),
            meta_review_text: None,
            decision: None,
        }
    }

    #[test]
    fn keywords_extracted_lowercase_truncated() {
        let fixtures = [fixture_line(
            "novelty_keywords",
            None,
            serde_json::json!({"keywords": ["Graph Neural Networks", "recommender systems", "graph neural networks", "extra"]}),
        )]
        .join("\n");
        let gateway = Gateway::scripted_from_lines(&fixtures).unwrap();
        let got = extract_novelty_keywords(&manuscript(), 2, &gateway).unwrap();
        assert_eq!(got, vec!["graph neural networks", "recommender systems"]);
    }

    #[test]
    fn thirty_phrases_truncate_to_ten() {
        let phrases: Vec<String> = (0..30).map(|i| format!("phrase {i}")).collect();
        let fixtures = [fixture_line(
            "novelty_keywords",
            None,
            serde_json::json!({ "keywords": phrases }),
        )]
        .join("\n");
        let gateway = Gateway::scripted_from_lines(&fixtures).unwrap();
        let got = extract_novelty_keywords(&manuscript(), 10, &gateway).unwrap();
        assert_eq!(got.len(), 10);
        assert_eq!(got[0], "phrase 0");
        assert_eq!(got[9], "phrase 9");
    }

    #[test]
    fn sectionless_manuscript_is_rejected() {
        let mut m = manuscript();
        m.sections.clear();
        let gateway = Gateway::scripted_from_lines("").unwrap();
        assert!(matches!(
            extract_novelty_keywords(&m, 5, &gateway),
            Err(NoveltyError::NoIntroduction(_))
        ));
    }

    #[test]
    fn year_filter_is_strict() {
        let corpus = vec![
            paper("p2021", 2021, "Old widgets"),
            paper("p2023", 2023, "Same-year widgets"),
            paper("p2024", 2024, "Future widgets"),
        ];
        let gateway = Gateway::scripted_from_lines("").unwrap();
        let index = LocalSearchIndex::build(&corpus, &gateway).unwrap();
        let got = search_prior_work(
            &["widgets".to_string()],
            2023,
            None,
            &index,
            10,
            &gateway,
        )
        .unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id, "p2021");
    }

    #[test]
    fn fuzzed_year_filter_never_leaks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let gateway = Gateway::scripted_from_lines("").unwrap();
        for round in 0..25 {
            let corpus: Vec<PaperRecord> = (0..8)
                .map(|i| paper(&format!("p{round}-{i}"), rng.random_range(1990..2030), "T"))
                .collect();
            let index = LocalSearchIndex::build(&corpus, &gateway).unwrap();
            let target = rng.random_range(1990..2030);
            let got = search_prior_work(
                &["t".to_string()],
                target,
                None,
                &index,
                10,
                &gateway,
            )
            .unwrap();
            assert!(got.iter().all(|c| c.year < target));
        }
    }

    #[test]
    fn empty_keywords_rejected() {
        let gateway = Gateway::scripted_from_lines("").unwrap();
        let index = LocalSearchIndex::build(&[], &gateway).unwrap();
        assert!(matches!(
            search_prior_work(&[], 2024, None, &index, 10, &gateway),
            Err(NoveltyError::EmptyQuery)
        ));
    }

    #[test]
    fn two_prior_papers_ranked_by_relevance() {
        // Pin all three embeddings: the query aligned with "near" and
        // orthogonal to "far".
        let embed_fixture = |text: &str, vector: serde_json::Value| {
            let mut bindings = crate::gateway::Bindings::new();
            bindings.insert("text".to_string(), text.to_string());
            fixture_line("embed", Some(&bindings), vector)
        };
        let fixtures = [
            embed_fixture(
                "Near paper\n\nAbout Near paper.",
                serde_json::json!([1.0, 0.0, 0.0, 0.0]),
            ),
            embed_fixture(
                "Far paper\n\nAbout Far paper.",
                serde_json::json!([0.0, 1.0, 0.0, 0.0]),
            ),
            embed_fixture("widgets", serde_json::json!([1.0, 0.0, 0.0, 0.0])),
        ]
        .join("\n");
        let gateway = Gateway::scripted_from_lines(&fixtures).unwrap();
        let corpus = vec![
            paper("far", 2020, "Far paper"),
            paper("near", 2021, "Near paper"),
        ];
        let index = LocalSearchIndex::build(&corpus, &gateway).unwrap();
        let got =
            search_prior_work(&["widgets".to_string()], 2024, None, &index, 10, &gateway).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].id, "near");
        assert_eq!(got[1].id, "far");
    }

    #[test]
    fn unreachable_external_falls_back_to_local() {
        let corpus = vec![paper("p1", 2020, "Widgets")];
        let gateway = Gateway::scripted_from_lines("").unwrap();
        let index = LocalSearchIndex::build(&corpus, &gateway).unwrap();
        let external = ExternalSearch {
            url: "http://127.0.0.1:1/search".to_string(),
            key: None,
        };
        let got = search_prior_work(
            &["widgets".to_string()],
            2024,
            Some(&external),
            &index,
            10,
            &gateway,
        )
        .unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id, "p1");
    }

    fn candidates() -> Vec<PriorWorkCandidate> {
        vec![
            PriorWorkCandidate {
                id: "c1".into(),
                title: "Prior art".into(),
                abstract_text: "Old widgets.".into(),
                introduction: None,
                year: 2020,
            },
            PriorWorkCandidate {
                id: "c2".into(),
                title: "More prior art".into(),
                abstract_text: "Older widgets.".into(),
                introduction: Some("Intro.".into()),
                year: 2019,
            },
        ]
    }

    #[test]
    fn assessment_keeps_valid_citations() {
        let fixtures = [fixture_line(
            "novelty_assess",
            None,
            serde_json::json!({"score": 3, "explanation": "Novel enough.", "cited_ids": ["c1"]}),
        )]
        .join("\n");
        let gateway = Gateway::scripted_from_lines(&fixtures).unwrap();
        let got = assess_novelty(&manuscript(), &candidates(), &AcronymTable::default(), &gateway)
            .unwrap();
        assert_eq!(got.score, 3);
        assert_eq!(got.cited_candidate_ids, vec!["c1"]);
        assert_eq!(got.explanation, "Novel enough.");
    }

    #[test]
    fn out_of_range_score_is_schema_violation() {
        let fixtures = [fixture_line(
            "novelty_assess",
            None,
            serde_json::json!({"score": 5, "explanation": "x", "cited_ids": []}),
        )]
        .join("\n");
        let gateway = Gateway::scripted_from_lines(&fixtures).unwrap();
        let err = assess_novelty(&manuscript(), &candidates(), &AcronymTable::default(), &gateway)
            .unwrap_err();
        assert!(matches!(
            err,
            NoveltyError::Gateway(crate::gateway::GatewayError::SchemaViolation { .. })
        ));
    }

    #[test]
    fn unverifiable_citation_dropped_explanation_kept() {
        let fixtures = [fixture_line(
            "novelty_assess",
            None,
            serde_json::json!({"score": 2, "explanation": "Cites ghost work.", "cited_ids": ["ghost", "c2"]}),
        )]
        .join("\n");
        let gateway = Gateway::scripted_from_lines(&fixtures).unwrap();
        let got = assess_novelty(&manuscript(), &candidates(), &AcronymTable::default(), &gateway)
            .unwrap();
        assert_eq!(got.cited_candidate_ids, vec!["c2"]);
        assert_eq!(got.explanation, "Cites ghost work.");
    }

    #[test]
    fn empty_candidate_list_is_allowed() {
        let fixtures = [fixture_line(
            "novelty_assess",
            None,
            serde_json::json!({"score": 4, "explanation": "Nothing similar found.", "cited_ids": []}),
        )]
        .join("\n");
        let gateway = Gateway::scripted_from_lines(&fixtures).unwrap();
        let got = assess_novelty(&manuscript(), &[], &AcronymTable::default(), &gateway).unwrap();
        assert_eq!(got.score, 4);
        assert!(got.cited_candidate_ids.is_empty());
    }

    #[test]
    fn context_block_renders_score_and_explanation() {
        let gateway = Gateway::scripted_from_lines("").unwrap();
        let assessment = NoveltyAssessment {
            score: 2,
            explanation: "Overlaps with c1.".to_string(),
            cited_candidate_ids: vec!["c1".to_string()],
        };
        let block = novelty_context(&assessment, &gateway).unwrap();
        assert!(block.contains("2 out of 4"));
        assert!(block.contains("Overlaps with c1."));
    }
}
