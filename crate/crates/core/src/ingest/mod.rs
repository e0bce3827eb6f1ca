//! Manuscript parsing and corpus loading.
//!
//! Markdown manuscripts are split into sections on heading markers, then into
//! chunks that respect a token budget. Chunk texts concatenate back to the
//! section body byte-for-byte (separators stay attached to the preceding
//! chunk), which keeps the coverage invariant checkable and hashing stable.

mod acronym;
mod corpus;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use acronym::{extract_acronyms, AcronymTable};
pub use corpus::{ground_truth_decisions, load_corpus, PaperRecord, ReviewRecord};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("empty document")]
    EmptyDocument,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed corpus line {0}: {1}")]
    MalformedLine(usize, String),
    #[error("corpus line {line}: field {field} out of range (value {value})")]
    ScoreOutOfRange { line: usize, field: String, value: i64 },
    #[error("paper {0} has no ground-truth decision")]
    MissingDecision(String),
    #[error("unknown figure id: {0}")]
    UnknownFigureId(String),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub section_heading: String,
    pub text: String,
    pub token_estimate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureCaption {
    pub figure_id: String,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manuscript {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub year: i32,
    pub sections: Vec<Section>,
    pub chunks: Vec<Chunk>,
    pub figure_captions: Vec<FigureCaption>,
}

impl Manuscript {
    /// First section whose heading names the introduction, else the first
    /// section with a non-empty body.
    pub fn introduction(&self) -> Option<&Section> {
        self.sections
            .iter()
            .find(|s| s.heading.to_lowercase().contains("introduction"))
            .or_else(|| self.sections.iter().find(|s| !s.body.is_empty()))
    }

    /// Chunk texts per section concatenate back to the section body.
    pub fn coverage_holds(&self) -> bool {
        self.sections.iter().all(|section| {
            let joined: String = self
                .chunks
                .iter()
                .filter(|c| c.section_heading == section.heading)
                .map(|c| c.text.as_str())
                .collect();
            joined == section.body
        })
    }
}

/// Rough token count at 4 characters per token, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

pub const DEFAULT_MAX_CHUNK_TOKENS: usize = 1200;

/// Parse markdown into a sectioned, chunked manuscript.
pub fn parse_manuscript(
    markdown: &str,
    id: &str,
    year: i32,
    max_chunk_tokens: usize,
) -> Result<Manuscript, IngestError> {
    if markdown.trim().is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    let normalized = normalize(markdown);
    let sections = split_sections(&normalized);
    if sections.len() == 1 && sections[0].heading.is_empty() {
        log::warn!("manuscript {id}: no headings found, treating document as a single section");
    }

    let title = sections
        .iter()
        .find(|s| !s.heading.is_empty())
        .map(|s| s.heading.clone())
        .unwrap_or_else(|| first_line(&normalized));
    let abstract_text = sections
        .iter()
        .find(|s| s.heading.to_lowercase().contains("abstract"))
        .map(|s| s.body.clone())
        .unwrap_or_default();

    let chunks = chunk_sections(id, &sections, max_chunk_tokens);
    Ok(Manuscript {
        id: id.to_string(),
        title,
        abstract_text,
        year,
        sections,
        chunks,
        figure_captions: Vec::new(),
    })
}

/// Insert generated figure captions immediately after their figure markers.
///
/// A marker for id `fig-1` is the first chunk line containing the id itself
/// or its `figure N` spelling (case-insensitive). The owning section is
/// re-chunked so the coverage invariant keeps holding.
pub fn attach_figure_captions(
    mut m: Manuscript,
    captions: &[FigureCaption],
    max_chunk_tokens: usize,
) -> Result<Manuscript, IngestError> {
    if captions.is_empty() {
        return Ok(m);
    }
    for caption in captions {
        let needles = marker_needles(&caption.figure_id);
        let mut placed = false;
        for section in &mut m.sections {
            if let Some(line_end) = find_marker_line(&section.body, &needles) {
                let mut body = section.body.clone();
                let insertion = format!("\n\n{}", caption.caption.trim());
                body.insert_str(line_end, &insertion);
                section.body = body;
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(IngestError::UnknownFigureId(caption.figure_id.clone()));
        }
        m.figure_captions.push(caption.clone());
    }
    m.chunks = chunk_sections(&m.id, &m.sections, max_chunk_tokens);
    Ok(m)
}

fn marker_needles(figure_id: &str) -> Vec<String> {
    let lower = figure_id.to_lowercase();
    let mut needles = vec![lower.clone()];
    let spaced = lower.replace(['-', '_'], " ");
    if spaced != lower {
        needles.push(spaced.clone());
    }
    if let Some(num) = spaced.strip_prefix("fig ").or_else(|| spaced.strip_prefix("figure ")) {
        needles.push(format!("figure {num}"));
        needles.push(format!("fig. {num}"));
    }
    needles
}

/// Byte offset of the end of the first line containing any needle.
fn find_marker_line(body: &str, needles: &[String]) -> Option<usize> {
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        let lower = line.to_lowercase();
        if needles.iter().any(|n| lower.contains(n)) {
            let trailing = line.len() - line.trim_end_matches('\n').len();
            return Some(offset + line.len() - trailing);
        }
        offset += line.len();
    }
    None
}

fn first_line(text: &str) -> String {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or("")
        .trim()
        .to_string()
}

/// Normalize line endings and collapse runs of blank lines to one.
fn normalize(markdown: &str) -> String {
    let unified = markdown.replace("\r\n", "\n");
    let mut out = String::with_capacity(unified.len());
    let mut blank_run = 0;
    for line in unified.lines() {
        if line.trim().is_empty() {
            blank_run += 1;
            if blank_run > 1 {
                continue;
            }
            out.push('\n');
        } else {
            blank_run = 0;
            out.push_str(line.trim_end());
            out.push('\n');
        }
    }
    out
}

fn heading_level(line: &str) -> Option<(usize, &str)> {
    let hashes = line.bytes().take_while(|b| *b == b'#').count();
    if hashes == 0 || hashes > 6 {
        return None;
    }
    let rest = &line[hashes..];
    rest.strip_prefix(' ').map(|text| (hashes, text.trim()))
}

fn split_sections(normalized: &str) -> Vec<Section> {
    let mut sections: Vec<Section> = Vec::new();
    let mut heading = String::new();
    let mut body = String::new();
    let mut push = |heading: &mut String, body: &mut String, force: bool| {
        let trimmed = body.trim_matches('\n').to_string();
        if !trimmed.is_empty() || !heading.is_empty() || force {
            sections.push(Section {
                heading: std::mem::take(heading),
                body: trimmed,
            });
        }
        body.clear();
    };
    let mut saw_heading = false;
    for line in normalized.lines() {
        if let Some((_, text)) = heading_level(line) {
            push(&mut heading, &mut body, false);
            heading = text.to_string();
            saw_heading = true;
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    push(&mut heading, &mut body, !saw_heading);
    sections
}

/// Split one section body into chunks of at most `max_tokens`, breaking at
/// paragraph boundaries greedily. Separators stay attached to the preceding
/// piece so the pieces concatenate back to the body exactly.
fn chunk_body(body: &str, max_tokens: usize) -> Vec<String> {
    if body.is_empty() {
        return Vec::new();
    }
    if estimate_tokens(body) <= max_tokens {
        return vec![body.to_string()];
    }
    let paragraphs = split_paragraphs_inclusive(body);
    let mut chunks = Vec::new();
    let mut current = String::new();
    for paragraph in paragraphs {
        if estimate_tokens(&paragraph) > max_tokens {
            if !current.is_empty() {
                chunks.push(std::mem::take(&mut current));
            }
            chunks.extend(hard_split(&paragraph, max_tokens));
            continue;
        }
        if !current.is_empty() && estimate_tokens(&current) + estimate_tokens(&paragraph) > max_tokens {
            chunks.push(std::mem::take(&mut current));
        }
        current.push_str(&paragraph);
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    chunks
}

/// Paragraphs with their trailing blank-line separators kept attached.
fn split_paragraphs_inclusive(body: &str) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut current = String::new();
    for line in body.split_inclusive('\n') {
        current.push_str(line);
        if line.trim().is_empty() && !current.trim().is_empty() {
            pieces.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        pieces.push(current);
    }
    pieces
}

/// Last-resort split of one oversized paragraph, preferring whitespace.
fn hard_split(paragraph: &str, max_tokens: usize) -> Vec<String> {
    let budget = max_tokens * 4;
    let mut pieces = Vec::new();
    let mut rest = paragraph;
    while estimate_tokens(rest) > max_tokens {
        let mut cut = budget.min(rest.len());
        while !rest.is_char_boundary(cut) {
            cut -= 1;
        }
        if let Some(ws) = rest[..cut].rfind(char::is_whitespace) {
            if ws > cut / 2 {
                cut = ws + 1;
            }
        }
        pieces.push(rest[..cut].to_string());
        rest = &rest[cut..];
    }
    if !rest.is_empty() {
        pieces.push(rest.to_string());
    }
    pieces
}

fn chunk_sections(id: &str, sections: &[Section], max_tokens: usize) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    for (si, section) in sections.iter().enumerate() {
        for (ci, text) in chunk_body(&section.body, max_tokens).into_iter().enumerate() {
            let token_estimate = estimate_tokens(&text);
            chunks.push(Chunk {
                chunk_id: format!("{id}-s{si}-c{ci}"),
                section_heading: section.heading.clone(),
                text,
                token_estimate,
            });
        }
    }
    chunks
}
