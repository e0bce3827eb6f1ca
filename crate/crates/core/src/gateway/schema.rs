//! Strict schemas for structured LLM output.
//!
//! Responses are requested as a single JSON object in the prompt; the parser
//! locates the first JSON value in the raw reply (models occasionally wrap it
//! in prose or fences) and validates every required field against its kind.
//! Any violation is reported as text suitable for a repair instruction.

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A validated structured response.
pub type StructuredValue = Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldKind {
    /// Integer within inclusive bounds.
    IntegerRange { min: i64, max: i64 },
    /// One of a fixed set of strings.
    Enum { allowed: Vec<String> },
    /// Free text (may be empty unless `non_empty`).
    Text { non_empty: bool },
    /// JSON array. `element_fields` of None means an array of strings;
    /// otherwise each element is an object with the given required fields.
    List { element_fields: Option<Vec<FieldSpec>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
}

impl FieldSpec {
    pub fn new(name: &str, kind: FieldKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
        }
    }
}

/// Required shape of one structured response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSchema {
    pub schema_id: String,
    pub required_fields: Vec<FieldSpec>,
}

impl OutputSchema {
    pub fn new(schema_id: &str, required_fields: Vec<FieldSpec>) -> Self {
        Self {
            schema_id: schema_id.to_string(),
            required_fields,
        }
    }

    /// One-line restatement of the shape, appended to repair prompts.
    pub fn format_instruction(&self) -> String {
        let fields: Vec<String> = self
            .required_fields
            .iter()
            .map(|f| match &f.kind {
                FieldKind::IntegerRange { min, max } => {
                    format!("\"{}\": integer in [{}, {}]", f.name, min, max)
                }
                FieldKind::Enum { allowed } => format!("\"{}\": one of {}", f.name, allowed.join("|")),
                FieldKind::Text { .. } => format!("\"{}\": string", f.name),
                FieldKind::List { element_fields } => match element_fields {
                    None => format!("\"{}\": array of strings", f.name),
                    Some(specs) => {
                        let names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
                        format!("\"{}\": array of objects with {}", f.name, names.join(", "))
                    }
                },
            })
            .collect();
        format!("Required fields: {{{}}}.", fields.join(", "))
    }

    /// Extract the first JSON value from `raw` and validate it.
    pub fn parse(&self, raw: &str) -> Result<StructuredValue, String> {
        let value = extract_json(raw).ok_or_else(|| "no JSON object found in response".to_string())?;
        self.validate(&value)?;
        Ok(value)
    }

    pub fn validate(&self, value: &Value) -> Result<(), String> {
        let object = value
            .as_object()
            .ok_or_else(|| "response is not a JSON object".to_string())?;
        for spec in &self.required_fields {
            let field = object
                .get(&spec.name)
                .ok_or_else(|| format!("missing field \"{}\"", spec.name))?;
            validate_kind(&spec.name, field, &spec.kind)?;
        }
        Ok(())
    }
}

fn validate_kind(name: &str, value: &Value, kind: &FieldKind) -> Result<(), String> {
    match kind {
        FieldKind::IntegerRange { min, max } => {
            let n = value
                .as_i64()
                .ok_or_else(|| format!("field \"{name}\" must be an integer"))?;
            if n < *min || n > *max {
                return Err(format!("field \"{name}\" = {n} outside [{min}, {max}]"));
            }
        }
        FieldKind::Enum { allowed } => {
            let s = value
                .as_str()
                .ok_or_else(|| format!("field \"{name}\" must be a string"))?;
            if !allowed.iter().any(|a| a == s) {
                return Err(format!(
                    "field \"{name}\" = \"{s}\" not one of {}",
                    allowed.join("|")
                ));
            }
        }
        FieldKind::Text { non_empty } => {
            let s = value
                .as_str()
                .ok_or_else(|| format!("field \"{name}\" must be a string"))?;
            if *non_empty && s.trim().is_empty() {
                return Err(format!("field \"{name}\" must be non-empty"));
            }
        }
        FieldKind::List { element_fields } => {
            let items = value
                .as_array()
                .ok_or_else(|| format!("field \"{name}\" must be an array"))?;
            match element_fields {
                None => {
                    for (i, item) in items.iter().enumerate() {
                        if !item.is_string() {
                            return Err(format!("field \"{name}\"[{i}] must be a string"));
                        }
                    }
                }
                Some(specs) => {
                    for (i, item) in items.iter().enumerate() {
                        let object = item
                            .as_object()
                            .ok_or_else(|| format!("field \"{name}\"[{i}] must be an object"))?;
                        for spec in specs {
                            let field = object.get(&spec.name).ok_or_else(|| {
                                format!("field \"{name}\"[{i}] missing \"{}\"", spec.name)
                            })?;
                            validate_kind(&format!("{name}[{i}].{}", spec.name), field, &spec.kind)?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Locate and parse the first complete JSON value in free text.
fn extract_json(raw: &str) -> Option<Value> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Some(v);
    }
    for (pos, ch) in trimmed.char_indices() {
        if ch == '{' || ch == '[' {
            let mut stream = serde_json::Deserializer::from_str(&trimmed[pos..]).into_iter::<Value>();
            if let Some(Ok(v)) = stream.next() {
                return Some(v);
            }
        }
    }
    None
}

fn text() -> FieldKind {
    FieldKind::Text { non_empty: false }
}

fn text_required() -> FieldKind {
    FieldKind::Text { non_empty: true }
}

fn string_list() -> FieldKind {
    FieldKind::List { element_fields: None }
}

impl OutputSchema {
    /// `{"acronyms": [{"acronym", "expansion"}]}`
    pub fn acronym_table() -> Self {
        Self::new(
            "acronym_table.v1",
            vec![FieldSpec::new(
                "acronyms",
                FieldKind::List {
                    element_fields: Some(vec![
                        FieldSpec::new("acronym", text_required()),
                        FieldSpec::new("expansion", text_required()),
                    ]),
                },
            )],
        )
    }

    /// Entities plus relations extracted from one chunk.
    pub fn graph_fragment() -> Self {
        let kinds = vec![
            "idea".to_string(),
            "claim".to_string(),
            "technical_detail".to_string(),
            "evidence".to_string(),
        ];
        Self::new(
            "graph_fragment.v1",
            vec![
                FieldSpec::new(
                    "entities",
                    FieldKind::List {
                        element_fields: Some(vec![
                            FieldSpec::new("name", text_required()),
                            FieldSpec::new("kind", FieldKind::Enum { allowed: kinds }),
                            FieldSpec::new("description", text()),
                        ]),
                    },
                ),
                FieldSpec::new(
                    "relations",
                    FieldKind::List {
                        element_fields: Some(vec![
                            FieldSpec::new("source", text_required()),
                            FieldSpec::new("target", text_required()),
                            FieldSpec::new("kind", text_required()),
                            FieldSpec::new("description", text()),
                        ]),
                    },
                ),
            ],
        )
    }

    /// `{"merges": [{"canonical", "members"}]}`
    pub fn merge_proposal() -> Self {
        Self::new(
            "merge_proposal.v1",
            vec![FieldSpec::new(
                "merges",
                FieldKind::List {
                    element_fields: Some(vec![
                        FieldSpec::new("canonical", text_required()),
                        FieldSpec::new("members", string_list()),
                    ]),
                },
            )],
        )
    }

    /// `{"summary": "..."}`
    pub fn community_summary() -> Self {
        Self::new(
            "community_summary.v1",
            vec![FieldSpec::new("summary", text_required())],
        )
    }

    /// `{"winner": "target"|"other"}`
    pub fn trait_judgment() -> Self {
        Self::new(
            "trait_judgment.v1",
            vec![FieldSpec::new(
                "winner",
                FieldKind::Enum {
                    allowed: vec!["target".to_string(), "other".to_string()],
                },
            )],
        )
    }

    /// `{"keywords": ["..."]}`
    pub fn keyword_list() -> Self {
        Self::new("keyword_list.v1", vec![FieldSpec::new("keywords", string_list())])
    }

    /// `{"score" 1..4, "explanation", "cited_ids"}`
    pub fn novelty() -> Self {
        Self::new(
            "novelty.v1",
            vec![
                FieldSpec::new("score", FieldKind::IntegerRange { min: 1, max: 4 }),
                FieldSpec::new("explanation", text_required()),
                FieldSpec::new("cited_ids", string_list()),
            ],
        )
    }

    /// `{"mention": "..."}` — verbatim quote or the no-mention sentinel.
    pub fn memory_mention() -> Self {
        Self::new("memory_mention.v1", vec![FieldSpec::new("mention", text_required())])
    }

    /// Full structured review with all score bounds.
    pub fn review() -> Self {
        Self::new(
            "review.v1",
            vec![
                FieldSpec::new("soundness", FieldKind::IntegerRange { min: 1, max: 4 }),
                FieldSpec::new("presentation", FieldKind::IntegerRange { min: 1, max: 4 }),
                FieldSpec::new("contribution", FieldKind::IntegerRange { min: 1, max: 4 }),
                FieldSpec::new("overall", FieldKind::IntegerRange { min: 1, max: 10 }),
                FieldSpec::new("confidence", FieldKind::IntegerRange { min: 1, max: 5 }),
                FieldSpec::new("summary", text_required()),
                FieldSpec::new("strengths", string_list()),
                FieldSpec::new("weaknesses", string_list()),
                FieldSpec::new("suggestions", string_list()),
                FieldSpec::new(
                    "decision",
                    FieldKind::Enum {
                        allowed: vec!["accept".to_string(), "reject".to_string()],
                    },
                ),
                FieldSpec::new("rationale", text()),
            ],
        )
    }

    /// `{"summary": "..."}` for one reflection turn.
    pub fn meta_reflection() -> Self {
        Self::new("meta_reflection.v1", vec![FieldSpec::new("summary", text_required())])
    }

    /// `{"decision": accept_oral|accept_poster|reject, "summary"}`
    pub fn meta_decision() -> Self {
        Self::new(
            "meta_decision.v1",
            vec![
                FieldSpec::new(
                    "decision",
                    FieldKind::Enum {
                        allowed: vec![
                            "accept_oral".to_string(),
                            "accept_poster".to_string(),
                            "reject".to_string(),
                        ],
                    },
                ),
                FieldSpec::new("summary", text_required()),
            ],
        )
    }
}
