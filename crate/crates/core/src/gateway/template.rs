//! Prompt templates and deterministic slot substitution.
//!
//! Templates are plain text with `{slot_name}` placeholders. Rendering is
//! total (every referenced slot must be bound) and deterministic, so rendered
//! prompts are stable cache keys.

use std::collections::BTreeMap;

use super::{Bindings, GatewayError, PromptInstance};

/// One registered prompt template.
#[derive(Debug, Clone)]
pub struct Template {
    pub id: &'static str,
    pub body: &'static str,
}

#[derive(Debug, Clone)]
enum Segment {
    Literal(String),
    Slot(String),
}

/// Registry of templates keyed by id; construct via [`builtin_templates`].
#[derive(Debug, Default)]
pub struct TemplateRegistry {
    parsed: BTreeMap<String, Vec<Segment>>,
}

impl TemplateRegistry {
    pub fn register(&mut self, template: Template) {
        self.parsed.insert(template.id.to_string(), parse(template.body));
    }

    pub fn contains(&self, template_id: &str) -> bool {
        self.parsed.contains_key(template_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.parsed.keys().map(|s| s.as_str())
    }

    /// Slot names referenced by a template, in first-occurrence order.
    pub fn slots(&self, template_id: &str) -> Result<Vec<String>, GatewayError> {
        let segments = self
            .parsed
            .get(template_id)
            .ok_or_else(|| GatewayError::UnknownTemplate(template_id.to_string()))?;
        let mut seen = Vec::new();
        for seg in segments {
            if let Segment::Slot(name) = seg {
                if !seen.iter().any(|s: &String| s == name) {
                    seen.push(name.clone());
                }
            }
        }
        Ok(seen)
    }

    pub fn render(&self, template_id: &str, bindings: &Bindings) -> Result<PromptInstance, GatewayError> {
        let segments = self
            .parsed
            .get(template_id)
            .ok_or_else(|| GatewayError::UnknownTemplate(template_id.to_string()))?;
        let mut rendered = String::new();
        for seg in segments {
            match seg {
                Segment::Literal(text) => rendered.push_str(text),
                Segment::Slot(name) => {
                    let value = bindings
                        .get(name)
                        .ok_or_else(|| GatewayError::MissingSlot(name.clone()))?;
                    rendered.push_str(value);
                }
            }
        }
        Ok(PromptInstance {
            template_id: template_id.to_string(),
            bindings: bindings.clone(),
            rendered,
        })
    }
}

/// Split a template body into literal and slot segments. A `{...}` run is a
/// slot only when its content is a lowercase identifier; anything else (JSON
/// braces in format instructions, set notation) stays literal.
fn parse(body: &str) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let bytes = body.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = body[i + 1..].find('}') {
                let name = &body[i + 1..i + 1 + end];
                if is_slot_name(name) {
                    if !literal.is_empty() {
                        segments.push(Segment::Literal(std::mem::take(&mut literal)));
                    }
                    segments.push(Segment::Slot(name.to_string()));
                    i += end + 2;
                    continue;
                }
            }
        }
        let ch = body[i..].chars().next().expect("in-bounds char");
        literal.push(ch);
        i += ch.len_utf8();
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    segments
}

fn is_slot_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// All templates the pipeline renders, keyed by role.
pub fn builtin_templates() -> TemplateRegistry {
    let mut registry = TemplateRegistry::default();
    for template in BUILTINS {
        registry.register(template.clone());
    }
    registry
}

const BUILTINS: &[Template] = &[
    Template {
        id: "acronym_extract",
        body: "You are indexing a research manuscript. Read the span below (title, abstract, and introduction) and list every acronym it defines together with the exact expansion text.\n\nSpan:\n{span}\n\nRespond with exactly one JSON object: {\"acronyms\": [{\"acronym\": \"...\", \"expansion\": \"...\"}]}. Only include acronyms whose expansion appears verbatim in the span.",
    },
    Template {
        id: "element_extract",
        body: "You are building a knowledge graph from one chunk of a research manuscript. First identify every entity in the text — ideas, claims, technical details, and supporting evidence — then identify all relationships between clearly related entities, naming the source entity, the target entity, and a short description of the relationship (for example \"proves\" or \"supports\").\n\nAcronym table:\n{acronyms}\n\nChunk:\n{chunk}\n\nRespond with exactly one JSON object: {\"entities\": [{\"name\": \"...\", \"kind\": \"idea|claim|technical_detail|evidence\", \"description\": \"...\"}], \"relations\": [{\"source\": \"...\", \"target\": \"...\", \"kind\": \"...\", \"description\": \"...\"}]}.",
    },
    Template {
        id: "concept_merge",
        body: "The entity list below was extracted from one manuscript. Merge entities that represent the same or similar concept phrased differently. Propose merge groups only; do not invent entities.\n\nAcronym table:\n{acronyms}\n\nEntities:\n{entities}\n\nRespond with exactly one JSON object: {\"merges\": [{\"canonical\": \"<entity name to keep>\", \"members\": [\"<entity name>\", ...]}]}. Leave \"merges\" empty when nothing should be merged.",
    },
    Template {
        id: "community_summary",
        body: "Write a report-like descriptor of one community of a manuscript's knowledge graph. Describe the community, its structure, and cite the original text as much as possible.\n\nAcronym table:\n{acronyms}\n\nCommunity members:\n{members}\n\nRelations inside the community:\n{relations}\n\nRespond with exactly one JSON object: {\"summary\": \"...\"}.",
    },
    Template {
        id: "trait_comparison",
        body: "You compare two peer reviews on exactly one dimension: {trait}. The anchor reviews below discuss the same paper as the target review and calibrate what the paper deserves; the other review discusses a different paper.\n\nTarget review:\n{target}\n\nAnchor reviews of the same paper:\n{anchor}\n\nOther review (different paper):\n{other}\n\nWhich review exhibits more {trait} — the target or the other? Respond with exactly one JSON object: {\"winner\": \"target\"} or {\"winner\": \"other\"}.",
    },
    Template {
        id: "focus_keywords",
        body: "Extract the focus areas of one reviewer from their past reviews: the recurring aspects they attend to, such as clarity, technical depth, or writing quality.\n\nPast reviews:\n{reviews}\n\nRespond with exactly one JSON object: {\"keywords\": [\"...\", ...]} with short lowercase phrases.",
    },
    Template {
        id: "reviewer_style",
        body: "REVIEWER PROFILE\nYou review according to this persona:\n- strictness: {strictness}\n- demand for supporting evidence: {evidence_focus}\n- open-mindedness: {open_mindedness}\n- tone: {tone}\n- technical focus: {technical_focus}\n- attention to ethics: {ethic_focus}\n- expertise level: {expertise} of 5\n- focus areas: {focus_areas}\nStay in character for every judgment below.",
    },
    Template {
        id: "review_guidance",
        body: "REVIEW TASK\nYou are a peer reviewer for a machine-learning conference. Read the community descriptors of the manuscript's knowledge graph and write a full review. Output numerical scores (soundness 1-4, presentation 1-4, contribution 1-4, overall 1-10, confidence 1-5), a summary covering significance and novelty, strengths, weaknesses, suggestions, and a preliminary binary decision (accept or reject) with a rationale. Ground every claim in the descriptors; do not invent content.",
    },
    Template {
        id: "novelty_context",
        body: "NOVELTY ASSESSMENT\nA prior-work comparison assigned this manuscript a novelty score of {novelty_score} out of 4 (1 = not novel, 4 = highly novel) with the explanation:\n{novelty_explanation}\nWeigh this assessment when scoring contribution and overall quality.",
    },
    Template {
        id: "review_initial",
        body: "{guidance}\n\n{novelty}\n\n{style}\n\nAcronym table:\n{acronyms}\n\nCommunity descriptors of the manuscript:\n{descriptors}\n\nRespond with exactly one JSON object: {\"soundness\": 1-4, \"presentation\": 1-4, \"contribution\": 1-4, \"overall\": 1-10, \"confidence\": 1-5, \"summary\": \"...\", \"strengths\": [\"...\"], \"weaknesses\": [\"...\"], \"suggestions\": [\"...\"], \"decision\": \"accept|reject\", \"rationale\": \"...\"}.",
    },
    Template {
        id: "review_refine",
        body: "REFINEMENT ROUND\nRe-examine your review of this manuscript. Draw inspiration from how other reviewers commented on similar communities: you may add strengths or weaknesses, or correct mistakes made earlier. Restate the complete review, not a diff.\n\nYour initial review:\n{initial_review}\n\nYour previous review:\n{previous_review}\n\nCommunity descriptors for this round:\n{block}\n\nSimilar communities from other papers and what their reviewers said:\n{retrieved}\n\nRespond with exactly one JSON object: {\"soundness\": 1-4, \"presentation\": 1-4, \"contribution\": 1-4, \"overall\": 1-10, \"confidence\": 1-5, \"summary\": \"...\", \"strengths\": [\"...\"], \"weaknesses\": [\"...\"], \"suggestions\": [\"...\"], \"decision\": \"accept|reject\", \"rationale\": \"...\"}.",
    },
    Template {
        id: "novelty_keywords",
        body: "Extract search keywords from the introduction of a manuscript so similar prior work can be retrieved.\n\nIntroduction:\n{introduction}\n\nRespond with exactly one JSON object: {\"keywords\": [\"...\", ...]} with short lowercase phrases.",
    },
    Template {
        id: "novelty_assess",
        body: "Assess the novelty of a manuscript against retrieved prior work. Judge the extent of innovation, the clarity of differences from past contributions, and the adequacy of related-work citation. Cite only verifiable information; reference candidates by their id.\n\nAcronym table:\n{acronyms}\n\nManuscript title: {title}\nAbstract: {abstract}\nIntroduction:\n{introduction}\n\nRetrieved prior work:\n{candidates}\n\nRespond with exactly one JSON object: {\"score\": 1-4, \"explanation\": \"...\", \"cited_ids\": [\"...\"]} where 1 means not novel and 4 means highly novel.",
    },
    Template {
        id: "memory_mention",
        body: "Determine whether the human reviews below mention the topic of this community descriptor. If they do, cite the original review: quote the relevant passage verbatim, character for character. If nothing in the reviews addresses it, respond with exactly: No specific mention was found in the review.\n\nCommunity descriptor:\n{descriptor}\n\nReviews:\n{reviews}\n\nRespond with exactly one JSON object: {\"mention\": \"<verbatim quote or the exact sentence above>\"}.",
    },
    Template {
        id: "meta_reflect",
        body: "You are the meta-reviewer of a paper-review committee. Reflect on the committee's reviews: where do the reviewers agree, where do they conflict, and what would experienced meta-reviewers weigh? Retrieved meta-reviews of structurally similar papers are provided as exemplars.\n\nExemplar meta-reviews:\n{exemplars}\n\nCommittee reviews:\n{reviews}\n\nYour previous reflection summaries:\n{summaries}\n\nRespond with exactly one JSON object: {\"summary\": \"...\"} capturing this turn's reflection.",
    },
    Template {
        id: "meta_decide",
        body: "You are the meta-reviewer of a paper-review committee. Based on the committee reviews, your reflection summaries, and the exemplar meta-reviews, write the final meta-review and decide: accept_oral, accept_poster, or reject.\n\nExemplar meta-reviews:\n{exemplars}\n\nCommittee reviews:\n{reviews}\n\nYour reflection summaries:\n{summaries}\n\nRespond with exactly one JSON object: {\"decision\": \"accept_oral|accept_poster|reject\", \"summary\": \"...\"}.",
    },
];
