//! Simulated conference peer review with LLM-backed reviewer agents.
//!
//! The crate turns manuscripts into community-structured knowledge graphs,
//! derives reviewer personas from historical reviews, runs memory-augmented
//! multi-round reviews plus a meta-review decision, and ships the measurement
//! machinery (win matrices, Bradley-Terry ranking, classification metrics)
//! used to evaluate review outcomes.
//!
//! Modules map onto the pipeline phases:
//!
//! - [`gateway`] — uniform chat/embedding access with templates, structured
//!   output parsing, disk caching, and a deterministic scripted backend.
//! - [`ingest`] — markdown manuscripts, acronym tables, review corpora.
//! - [`graph`] — entity/relation extraction, concept merging, community
//!   detection, community descriptors.
//! - [`persona`] — contrastive reviewer traits, expertise, focus areas.
//! - [`memory`] — embedding-indexed descriptor/review store with
//!   community-level and paper-level retrieval.
//! - [`novelty`] — prior-work search and scored novelty judgments.
//! - [`review`] — single-reviewer multi-round engine and committee runs.
//! - [`meta`] — meta-review synthesis (agentic and fixed-threshold).
//! - [`eval`] — win matrices, Bradley-Terry fits, balanced accuracy / F1,
//!   Pearson correlation, feedback-aspect log ratios.
//! - [`pipeline`] — configuration, seeding, and the end-to-end run driver.

pub mod eval;
pub mod gateway;
pub mod graph;
pub mod ingest;
pub mod memory;
pub mod meta;
pub mod novelty;
pub mod persona;
pub mod pipeline;
pub mod review;
pub mod seed;

pub use gateway::{Bindings, EmbeddingVector, Gateway, OutputSchema, PromptInstance};
pub use graph::PaperGraph;
pub use ingest::{Manuscript, PaperRecord, ReviewRecord};
pub use memory::{MemoryIndex, MetaMemory};
pub use meta::{Decision, MetaReview};
pub use persona::ReviewerPersona;
pub use review::Review;
