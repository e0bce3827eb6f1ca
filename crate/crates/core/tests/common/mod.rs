//! Shared oracles and fixtures for the integration suites: an exhaustive
//! modularity maximizer for small graphs, and a fully scripted three-paper
//! corpus that drives the pipeline end to end without a network.

use gar_core::gateway::{fixture_line, Bindings};
use gar_core::graph::{modularity, WeightedGraph};
use gar_core::memory::NO_MENTION_SENTINEL;
use gar_core::meta::MetaMode;
use gar_core::pipeline::Config;
use serde_json::json;

/// Advance a restricted growth string to the next set partition; false once
/// every partition of the index set has been visited.
fn next_partition(labels: &mut [usize]) -> bool {
    for i in (1..labels.len()).rev() {
        let max_prefix = labels[..i].iter().copied().max().unwrap_or(0);
        if labels[i] <= max_prefix {
            labels[i] += 1;
            for label in labels[i + 1..].iter_mut() {
                *label = 0;
            }
            return true;
        }
    }
    false
}

/// Maximum modularity over every partition, by exhaustive enumeration.
/// Practical only for the ≤ 8 node graphs the oracle suite uses.
pub fn brute_force_max_modularity(graph: &WeightedGraph) -> f64 {
    let n = graph.node_count();
    assert!(n >= 1, "empty graph has no partitions");
    assert!(n <= 8, "exhaustive enumeration is for small graphs only");
    let mut labels = vec![0usize; n];
    let mut best = modularity(graph, &labels).expect("whole-graph partition scores");
    while next_partition(&mut labels) {
        let q = modularity(graph, &labels).expect("enumerated partition scores");
        if q > best {
            best = q;
        }
    }
    best
}

/// Two triangles joined by one bridge, unit weights: the classic fixture
/// whose optimal split along the bridge scores Q = 5/14.
pub fn two_triangles() -> WeightedGraph {
    let mut graph = WeightedGraph::new(6);
    for (a, b) in [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)] {
        graph.add_edge(a, b, 1.0);
    }
    graph
}

pub const REVIEWERS: [&str; 3] = ["r1", "r2", "r3"];

/// Sentence present verbatim in every historical review, quotable by the
/// scripted mention fixture for any paper.
pub const SHARED_SENTENCE: &str = "The evaluation lacks an ablation study.";

/// Descriptor text the scripted backend writes for every community.
pub const COMMUNITY_SUMMARY: &str =
    "This community develops the core method and the evidence supporting it.";

/// The paper whose mention fixture answers with the no-mention sentinel.
pub const SENTINEL_PAPER: &str = "p2";

pub fn review_text(reviewer: &str, paper: &str) -> String {
    format!(
        "Review by {reviewer} of {paper}. {SHARED_SENTENCE} \
         The method section is clearly written and the claims are plausible."
    )
}

fn markdown(paper: &str) -> String {
    format!(
        "# Study {paper}\n\n\
         ## Abstract\n\nWe study structured review generation for {paper}.\n\n\
         ## Introduction\n\nManuscript {paper} examines how graph communities \
         summarize a paper's claims and evidence for reviewer agents.\n\n\
         ## Method\n\nEntities are extracted per chunk and merged into a \
         shared concept graph before community detection.\n\n\
         ## Experiments\n\nWe compare decisions against the historical \
         committee outcomes on a held-out corpus.\n"
    )
}

fn corpus_record(paper: &str, year: i32, decision: &str) -> serde_json::Value {
    let reviews: Vec<serde_json::Value> = REVIEWERS
        .iter()
        .map(|reviewer| {
            json!({
                "reviewer_id": reviewer,
                "text": review_text(reviewer, paper),
                "soundness": 3,
                "presentation": 3,
                "contribution": 2,
                "overall": 6,
                "confidence": 4,
            })
        })
        .collect();
    json!({
        "id": paper,
        "title": format!("Study {paper}"),
        "abstract": format!("We study structured review generation for {paper}."),
        "year": year,
        "markdown": markdown(paper),
        "reviews": reviews,
        "meta_review": format!(
            "Meta-review of {paper}: reviewers agree the work is competent; \
             the missing ablations temper enthusiasm."
        ),
        "decision": decision,
    })
}

/// Three-paper JSONL corpus: every reviewer reviews every paper, years are
/// staggered so each reviewer's most recent review sits on p3, and every
/// paper carries a genuine meta-review and decision.
pub fn corpus_jsonl() -> String {
    [
        corpus_record("p1", 2022, "accept_poster"),
        corpus_record("p2", 2023, "reject"),
        corpus_record("p3", 2024, "accept_oral"),
    ]
    .iter()
    .map(|record| record.to_string())
    .collect::<Vec<_>>()
    .join("\n")
}

/// The review block `index_paper` renders for one paper, reviews in corpus
/// order. Needed to pin an exact-bindings mention fixture.
fn review_block(paper: &str) -> String {
    REVIEWERS
        .iter()
        .enumerate()
        .map(|(i, reviewer)| {
            format!("Review {} (reviewer {}):\n{}", i + 1, reviewer, review_text(reviewer, paper))
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn review_response(overall: i64) -> serde_json::Value {
    json!({
        "soundness": 3,
        "presentation": 3,
        "contribution": 2,
        "overall": overall,
        "confidence": 4,
        "summary": "The paper proposes a graph-grounded review pipeline with adequate evidence.",
        "strengths": ["Clear community structure", "Readable method description"],
        "weaknesses": [SHARED_SENTENCE],
        "suggestions": ["Add an ablation over community granularity"],
        "decision": "accept",
        "rationale": "Competent execution with a moderate contribution.",
    })
}

/// Fixture JSONL covering every chat template the pipeline renders. One
/// wildcard per template; p2's mention call is pinned by exact bindings to
/// the sentinel so both memory-guard paths occur.
pub fn fixture_jsonl() -> String {
    let two_triangle_entities = json!([
        {"name": "anchor claim", "kind": "claim", "description": "central claim"},
        {"name": "graph encoder", "kind": "technical_detail", "description": "method detail"},
        {"name": "review synthesis", "kind": "idea", "description": "core idea"},
        {"name": "benchmark table", "kind": "evidence", "description": "empirical support"},
        {"name": "ablation gap", "kind": "claim", "description": "missing study"},
        {"name": "community summary", "kind": "idea", "description": "descriptor idea"},
    ]);
    let two_triangle_relations = json!([
        {"source": "anchor claim", "target": "graph encoder", "kind": "supports", "description": ""},
        {"source": "graph encoder", "target": "review synthesis", "kind": "supports", "description": ""},
        {"source": "review synthesis", "target": "anchor claim", "kind": "supports", "description": ""},
        {"source": "benchmark table", "target": "ablation gap", "kind": "contradicts", "description": ""},
        {"source": "ablation gap", "target": "community summary", "kind": "supports", "description": ""},
        {"source": "community summary", "target": "benchmark table", "kind": "supports", "description": ""},
    ]);

    let mut lines = vec![
        fixture_line("acronym_extract", None, json!({"acronyms": []})),
        fixture_line(
            "element_extract",
            None,
            json!({"entities": two_triangle_entities, "relations": two_triangle_relations}),
        ),
        fixture_line("concept_merge", None, json!({"merges": []})),
        fixture_line("community_summary", None, json!({"summary": COMMUNITY_SUMMARY})),
        fixture_line("trait_comparison", None, json!({"winner": "target"})),
        fixture_line(
            "focus_keywords",
            None,
            json!({"keywords": ["graph methods", "evaluation design"]}),
        ),
        fixture_line(
            "novelty_keywords",
            None,
            json!({"keywords": ["automated peer review", "knowledge graph communities"]}),
        ),
        fixture_line(
            "novelty_assess",
            None,
            json!({
                "score": 3,
                "explanation": "Moderately novel relative to the retrieved prior work.",
                "cited_ids": [],
            }),
        ),
        fixture_line("review_initial", None, review_response(6)),
        fixture_line("review_refine", None, review_response(6)),
        fixture_line("memory_mention", None, json!({"mention": SHARED_SENTENCE})),
        fixture_line(
            "meta_reflect",
            None,
            json!({"summary": "The committee agrees on competence; ablation coverage stays the main concern."}),
        ),
        fixture_line(
            "meta_decide",
            None,
            json!({
                "decision": "accept_poster",
                "summary": "Accepted as a poster: sound method, moderate contribution, missing ablations.",
            }),
        ),
    ];

    let mut sentinel_bindings = Bindings::new();
    sentinel_bindings.insert("descriptor".to_string(), COMMUNITY_SUMMARY.to_string());
    sentinel_bindings.insert("reviews".to_string(), review_block(SENTINEL_PAPER));
    lines.push(fixture_line(
        "memory_mention",
        Some(&sentinel_bindings),
        json!({"mention": NO_MENTION_SENTINEL}),
    ));

    lines.join("\n")
}

/// Run configuration for the scripted end-to-end fixture: committee of 3,
/// K=3 rounds, M=3 retrievals, agentic meta with T=2 reflection turns.
pub fn e2e_config(seed: u64) -> Config {
    let mut config = Config::default();
    config.seed = seed;
    config.persona.comparisons_per_trait = 3;
    config.review.committee_size = 3;
    config.review.rounds = 3;
    config.review.retrievals_per_descriptor = 3;
    config.meta.mode = MetaMode::Agentic;
    config.meta.reflection_turns = 2;
    config
}
