//! Run configuration, per-module seed derivation, and the end-to-end driver
//! wiring ingest → graph → personas/memory → review → meta → eval, with a
//! manifest that makes runs replayable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::{classification_metrics, ClassificationReport, EvalError};
use crate::gateway::{EmbeddingVector, Gateway, GatewayConfig, GatewayError};
use crate::graph::{build_graph, GraphError, LeidenConfig, PaperGraph};
use crate::ingest::{extract_acronyms, load_corpus, AcronymTable, IngestError, PaperRecord};
use crate::memory::{
    index_paper, load_index, save_index, MemoryError, MemoryIndex, MetaMemory, MetaMemoryEntry,
};
use crate::meta::{agentic_meta, threshold_meta, to_binary, Decision, MetaError, MetaMode, MetaReview};
use crate::novelty::{
    assess_novelty, extract_novelty_keywords, search_prior_work, ExternalSearch, LocalSearchIndex,
    NoveltyAssessment, NoveltyError,
};
use crate::persona::{build_personas, GatewayJudge, PersonaError, ReviewerPersona};
use crate::review::{run_committee, BinaryDecision, CommitteeConfig, Review, ReviewError};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("committee needs {needed} reviewers but only {available} personas exist")]
    InsufficientReviewers { needed: usize, available: usize },
    #[error("paper {0} not found in the corpus")]
    UnknownPaper(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Persona(#[from] PersonaError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Novelty(#[from] NoveltyError),
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    /// Repair retries after a malformed structured response.
    pub retries: u32,
    /// Temperature for extraction and scoring calls.
    pub extract_temperature: f64,
    /// Temperature for free-text review prose.
    pub prose_temperature: f64,
    /// Requests per minute per backend; 0 disables rate limiting.
    pub requests_per_minute: u32,
    /// Dimension of hash-derived embeddings on the scripted backend.
    pub embedding_dim: usize,
}

impl Default for GatewaySection {
    fn default() -> Self {
        Self {
            retries: 2,
            extract_temperature: 0.0,
            prose_temperature: 0.7,
            requests_per_minute: 0,
            embedding_dim: crate::gateway::DEFAULT_EMBEDDING_DIM,
        }
    }
}

impl GatewaySection {
    pub fn gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            retries: self.retries,
            extract_temperature: self.extract_temperature,
            prose_temperature: self.prose_temperature,
            requests_per_minute: self.requests_per_minute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    /// Chunk budget per section, estimated at 4 characters per token.
    pub max_chunk_tokens: usize,
    /// Community-detection restarts; the best-modularity run wins.
    pub leiden_restarts: u32,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            max_chunk_tokens: 1200,
            leiden_restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonaSection {
    /// Pairwise judgments per trait (N).
    pub comparisons_per_trait: usize,
    /// Cap on extracted focus areas per reviewer.
    pub max_focus_areas: usize,
}

impl Default for PersonaSection {
    fn default() -> Self {
        Self {
            comparisons_per_trait: 20,
            max_focus_areas: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemorySection {
    /// Cosine threshold for structural similarity.
    pub tau: f64,
}

impl Default for MemorySection {
    fn default() -> Self {
        Self { tau: 0.80 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoveltySection {
    /// Prior-work candidates placed in the assessment prompt.
    pub max_candidates: usize,
    /// Search keywords extracted from the introduction.
    pub max_keywords: usize,
    /// Query the external scholarly search service (env-configured) first.
    pub external_search: bool,
}

impl Default for NoveltySection {
    fn default() -> Self {
        Self {
            max_candidates: 10,
            max_keywords: 10,
            external_search: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReviewSection {
    /// Reviewers per paper; must stay within 3..=6.
    pub committee_size: usize,
    /// Refinement rounds after the initial review (K).
    pub rounds: usize,
    /// Retrieved similar communities per descriptor (M).
    pub retrievals_per_descriptor: usize,
}

impl Default for ReviewSection {
    fn default() -> Self {
        Self {
            committee_size: 3,
            rounds: 3,
            retrievals_per_descriptor: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaSection {
    /// Decision procedure: agentic reflection or a fixed score threshold.
    pub mode: MetaMode,
    /// Mean-overall cutoff for threshold mode; 6 is "Weak Accept".
    pub threshold: f64,
    /// Retrieved meta-review exemplars (K2).
    pub exemplars: usize,
    /// Reflection turns before deciding (T).
    pub reflection_turns: usize,
}

impl Default for MetaSection {
    fn default() -> Self {
        Self {
            mode: MetaMode::Agentic,
            threshold: 6.0,
            exemplars: 5,
            reflection_turns: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Gradient-norm tolerance for the Bradley-Terry fit.
    pub bt_tol: f64,
    /// Iteration cap for the Bradley-Terry fit.
    pub bt_max_iter: usize,
    /// Smoothing epsilon for aspect log-ratios.
    pub smoothing: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            bt_tol: 1e-8,
            bt_max_iter: 10_000,
            smoothing: crate::eval::DEFAULT_SMOOTHING,
        }
    }
}

/// Full run configuration; every field has the shipped default, so a partial
/// TOML file overrides only what it names.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Master seed; per-module seeds are derived from it by stable hashing.
    pub seed: u64,
    pub gateway: GatewaySection,
    pub graph: GraphSection,
    pub persona: PersonaSection,
    pub memory: MemorySection,
    pub novelty: NoveltySection,
    pub review: ReviewSection,
    pub meta: MetaSection,
    pub eval: EvalSection,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        let config: Config = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reject invalid settings before any work happens.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(3..=6).contains(&self.review.committee_size) {
            return Err(PipelineError::Config(format!(
                "review.committee_size must be within 3..=6, got {}",
                self.review.committee_size
            )));
        }
        if !(0.0..1.0).contains(&self.memory.tau) {
            return Err(PipelineError::Config(format!(
                "memory.tau must be in [0, 1), got {}",
                self.memory.tau
            )));
        }
        if self.persona.comparisons_per_trait == 0 {
            return Err(PipelineError::Config(
                "persona.comparisons_per_trait must be at least 1".to_string(),
            ));
        }
        if self.graph.max_chunk_tokens == 0 {
            return Err(PipelineError::Config(
                "graph.max_chunk_tokens must be at least 1".to_string(),
            ));
        }
        if self.gateway.embedding_dim == 0 {
            return Err(PipelineError::Config(
                "gateway.embedding_dim must be at least 1".to_string(),
            ));
        }
        if !self.meta.threshold.is_finite() {
            return Err(PipelineError::Config(
                "meta.threshold must be finite".to_string(),
            ));
        }
        if self.eval.bt_max_iter == 0 {
            return Err(PipelineError::Config(
                "eval.bt_max_iter must be at least 1".to_string(),
            ));
        }
        if self.eval.bt_tol <= 0.0 || !self.eval.bt_tol.is_finite() {
            return Err(PipelineError::Config(
                "eval.bt_tol must be a positive finite number".to_string(),
            ));
        }
        Ok(())
    }

    /// Seed for a named module, derived from the master seed.
    pub fn module_seed(&self, module: &str) -> u64 {
        derive_seed(self.seed, module)
    }
}

/// Everything needed to replay a run bit-identically against a warm cache.
/// Timings are informational and excluded from determinism comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: Config,
    pub seed: u64,
    pub chat_backend: String,
    pub chat_model: String,
    pub embedding_model: String,
    pub corpus_sha256: String,
    /// Artifact kind → path relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
    /// Final decision per paper.
    pub decisions: BTreeMap<String, Decision>,
    /// Committee membership per paper.
    pub committees: BTreeMap<String, Vec<String>>,
    /// Milliseconds per phase; varies run to run by nature.
    pub timings_ms: BTreeMap<String, u64>,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Copy with timings cleared, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        let mut manifest = self.clone();
        manifest.timings_ms.clear();
        manifest
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Locate one paper in a loaded corpus by id.
pub fn find_paper<'a>(
    corpus: &'a [PaperRecord],
    paper_id: &str,
) -> Result<&'a PaperRecord, PipelineError> {
    corpus
        .iter()
        .find(|p| p.manuscript.id == paper_id)
        .ok_or_else(|| PipelineError::UnknownPaper(paper_id.to_string()))
}

/// Deterministically pick `size` committee members for a paper from the
/// persona pool, seeded by (master seed, paper id). The picked ids are
/// returned sorted.
pub fn sample_committee(
    pool: &BTreeMap<String, ReviewerPersona>,
    paper_id: &str,
    size: usize,
    master_seed: u64,
) -> Result<Vec<String>, PipelineError> {
    use rand::SeedableRng;
    if pool.len() < size {
        return Err(PipelineError::InsufficientReviewers {
            needed: size,
            available: pool.len(),
        });
    }
    let ids: Vec<&String> = pool.keys().collect();
    let seed = derive_seed(master_seed, &format!("committee\0{paper_id}"));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<String> = rand::seq::index::sample(&mut rng, ids.len(), size)
        .into_iter()
        .map(|i| ids[i].clone())
        .collect();
    picked.sort();
    Ok(picked)
}

/// Descriptor embeddings of a graph, the paper's structural signature.
pub fn graph_signature(
    graph: &PaperGraph,
    gateway: &Gateway,
) -> Result<Vec<EmbeddingVector>, PipelineError> {
    let mut signature = Vec::with_capacity(graph.descriptors.len());
    for descriptor in graph.descriptors.values() {
        let embedding = match &descriptor.embedding {
            Some(e) => e.clone(),
            None => gateway.embed(&descriptor.text)?,
        };
        signature.push(embedding);
    }
    Ok(signature)
}

/// Artifact layout under a run directory, shared by the pipeline and the
/// per-module subcommands so their outputs compose.
pub struct RunDirs {
    pub acronyms: PathBuf,
    pub graphs: PathBuf,
    pub novelty: PathBuf,
    pub reviews: PathBuf,
    pub meta: PathBuf,
    pub memory: PathBuf,
    pub personas_file: PathBuf,
    pub eval_file: PathBuf,
    pub manifest_file: PathBuf,
}

impl RunDirs {
    pub fn prepare(out_dir: &Path) -> Result<Self, PipelineError> {
        let dirs = Self {
            acronyms: out_dir.join("acronyms"),
            graphs: out_dir.join("graphs"),
            novelty: out_dir.join("novelty"),
            reviews: out_dir.join("reviews"),
            meta: out_dir.join("meta"),
            memory: out_dir.join("memory"),
            personas_file: out_dir.join("personas.json"),
            eval_file: out_dir.join("eval.json"),
            manifest_file: out_dir.join("manifest.json"),
        };
        for dir in [
            &dirs.acronyms,
            &dirs.graphs,
            &dirs.novelty,
            &dirs.reviews,
            &dirs.meta,
            &dirs.memory,
        ] {
            std::fs::create_dir_all(dir)?;
        }
        Ok(dirs)
    }
}

/// Acronym table for one paper, reusing the persisted artifact when present.
pub fn ensure_acronyms(
    paper: &PaperRecord,
    dirs: &RunDirs,
    gateway: &Gateway,
) -> Result<AcronymTable, PipelineError> {
    let path = dirs.acronyms.join(format!("{}.json", paper.manuscript.id));
    if path.exists() {
        return read_json(&path);
    }
    let table = extract_acronyms(&paper.manuscript, gateway)?;
    write_json(&path, &table)?;
    Ok(table)
}

/// Knowledge graph for one paper, reusing the persisted artifact when present.
pub fn ensure_graph(
    paper: &PaperRecord,
    acronyms: &AcronymTable,
    dirs: &RunDirs,
    leiden: &LeidenConfig,
    gateway: &Gateway,
) -> Result<PaperGraph, PipelineError> {
    let id = &paper.manuscript.id;
    let path = dirs.graphs.join(format!("{id}.json"));
    if path.exists() {
        return Ok(PaperGraph::load(&path)?);
    }
    let (graph, report) = build_graph(&paper.manuscript, acronyms, gateway, leiden)?;
    log::info!(
        "graph {id}: {} entities, {} relations, {} communities",
        graph.entities.len(),
        graph.relations.len(),
        report.community_count
    );
    graph.save(&path)?;
    Ok(graph)
}

/// Novelty assessment for one paper, reusing the persisted artifact when
/// present.
pub fn ensure_novelty(
    paper: &PaperRecord,
    acronyms: &AcronymTable,
    dirs: &RunDirs,
    section: &NoveltySection,
    external: Option<&ExternalSearch>,
    search_index: &LocalSearchIndex,
    gateway: &Gateway,
) -> Result<NoveltyAssessment, PipelineError> {
    let path = dirs.novelty.join(format!("{}.json", paper.manuscript.id));
    if path.exists() {
        return read_json(&path);
    }
    let keywords = extract_novelty_keywords(&paper.manuscript, section.max_keywords, gateway)?;
    let candidates = search_prior_work(
        &keywords,
        paper.manuscript.year,
        external,
        search_index,
        section.max_candidates,
        gateway,
    )?;
    let assessment = assess_novelty(&paper.manuscript, &candidates, acronyms, gateway)?;
    write_json(&path, &assessment)?;
    Ok(assessment)
}

/// Phase 1: acronyms and knowledge graph per paper. Existing artifacts are
/// reused, so an aborted run resumes where it stopped.
fn phase_graphs(
    corpus: &[PaperRecord],
    dirs: &RunDirs,
    config: &Config,
    gateway: &Gateway,
) -> Result<Vec<(AcronymTable, PaperGraph)>, PipelineError> {
    let leiden = LeidenConfig {
        seed: config.module_seed("leiden"),
        restarts: config.graph.leiden_restarts,
    };
    corpus
        .par_iter()
        .map(|paper| {
            let acronyms = ensure_acronyms(paper, dirs, gateway)?;
            let graph = ensure_graph(paper, &acronyms, dirs, &leiden, gateway)?;
            Ok((acronyms, graph))
        })
        .collect()
}

/// Phase 2: reviewer personas from the historical reviews, plus the
/// descriptor/review memory index over all papers.
fn phase_selection(
    corpus: &[PaperRecord],
    graphs: &[(AcronymTable, PaperGraph)],
    dirs: &RunDirs,
    config: &Config,
    gateway: &Gateway,
) -> Result<(BTreeMap<String, ReviewerPersona>, MemoryIndex), PipelineError> {
    let personas: BTreeMap<String, ReviewerPersona> = if dirs.personas_file.exists() {
        read_json(&dirs.personas_file)?
    } else {
        let judge = GatewayJudge::new(gateway);
        let personas = build_personas(
            corpus,
            config.persona.comparisons_per_trait,
            config.module_seed("persona"),
            config.persona.max_focus_areas,
            &judge,
            gateway,
        )?;
        write_json(&dirs.personas_file, &personas)?;
        personas
    };

    let index = if dirs.memory.join("entries.jsonl").exists() {
        load_index(&dirs.memory)?
    } else {
        let mut entries = Vec::new();
        for (paper, (_, graph)) in corpus.iter().zip(graphs) {
            entries.extend(index_paper(graph, &paper.reviews, gateway)?);
        }
        let index = MemoryIndex::build(entries)?;
        save_index(&index, &dirs.memory)?;
        index
    };
    Ok((personas, index))
}

/// Phase 3: novelty assessment and the committee review rounds per paper.
fn phase_reviews(
    corpus: &[PaperRecord],
    graphs: &[(AcronymTable, PaperGraph)],
    personas: &BTreeMap<String, ReviewerPersona>,
    index: &MemoryIndex,
    dirs: &RunDirs,
    config: &Config,
    gateway: &Gateway,
) -> Result<(BTreeMap<String, Vec<Review>>, BTreeMap<String, Vec<String>>), PipelineError> {
    let search_index = LocalSearchIndex::build(corpus, gateway)?;
    let external = if config.novelty.external_search {
        ExternalSearch::from_env()
    } else {
        None
    };

    let results: Vec<Result<(String, Vec<Review>, Vec<String>), PipelineError>> = corpus
        .par_iter()
        .zip(graphs)
        .map(|(paper, (acronyms, graph))| {
            let id = paper.manuscript.id.clone();
            let assessment = ensure_novelty(
                paper,
                acronyms,
                dirs,
                &config.novelty,
                external.as_ref(),
                &search_index,
                gateway,
            )?;

            let committee_ids = sample_committee(
                personas,
                &id,
                config.review.committee_size,
                config.seed,
            )?;
            let committee: Vec<ReviewerPersona> = committee_ids
                .iter()
                .map(|reviewer| personas[reviewer].clone())
                .collect();
            let finals = run_committee(
                graph,
                &committee,
                &assessment,
                index,
                acronyms,
                CommitteeConfig {
                    rounds: config.review.rounds,
                    retrievals_per_descriptor: config.review.retrievals_per_descriptor,
                },
                gateway,
                Some(&dirs.reviews),
            )?;
            Ok((id, finals, committee_ids))
        })
        .collect();

    let mut reviews = BTreeMap::new();
    let mut committees = BTreeMap::new();
    for result in results {
        let (id, finals, committee_ids) = result?;
        reviews.insert(id.clone(), finals);
        committees.insert(id, committee_ids);
    }
    Ok((reviews, committees))
}

/// Phase 4: one meta-review per paper. Agentic mode retrieves genuine
/// meta-reviews of structurally similar *other* papers as exemplars.
fn phase_meta(
    corpus: &[PaperRecord],
    graphs: &[(AcronymTable, PaperGraph)],
    reviews: &BTreeMap<String, Vec<Review>>,
    dirs: &RunDirs,
    config: &Config,
    gateway: &Gateway,
) -> Result<BTreeMap<String, MetaReview>, PipelineError> {
    let meta_memory_entries: Vec<MetaMemoryEntry> = corpus
        .iter()
        .zip(graphs)
        .filter_map(|(paper, (_, graph))| {
            paper.meta_review_text.as_ref().map(|text| {
                graph_signature(graph, gateway).map(|signature| MetaMemoryEntry {
                    paper_id: paper.manuscript.id.clone(),
                    graph_signature: signature,
                    meta_review_text: text.clone(),
                })
            })
        })
        .collect::<Result<_, _>>()?;

    let results: Vec<Result<(String, MetaReview), PipelineError>> = corpus
        .par_iter()
        .zip(graphs)
        .map(|(paper, (_, graph))| {
            let id = paper.manuscript.id.clone();
            let meta_path = dirs.meta.join(format!("{id}.json"));
            if meta_path.exists() {
                return Ok((id, read_json(&meta_path)?));
            }
            let finals = &reviews[&id];
            let meta = match config.meta.mode {
                MetaMode::Threshold => threshold_meta(finals, config.meta.threshold)?,
                MetaMode::Agentic => {
                    let foreign = MetaMemory {
                        entries: meta_memory_entries
                            .iter()
                            .filter(|e| e.paper_id != id)
                            .cloned()
                            .collect(),
                    };
                    let signature = graph_signature(graph, gateway)?;
                    agentic_meta(
                        finals,
                        &foreign,
                        &signature,
                        config.meta.exemplars,
                        config.meta.reflection_turns,
                        config.memory.tau,
                        gateway,
                    )?
                }
            };
            write_json(&meta_path, &meta)?;
            Ok((id, meta))
        })
        .collect();
    results.into_iter().collect()
}

/// Classification metrics of the run's binary decisions against the corpus
/// ground truth, over the papers that carry one. None when no paper does.
fn phase_eval(
    corpus: &[PaperRecord],
    metas: &BTreeMap<String, MetaReview>,
    dirs: &RunDirs,
) -> Result<Option<ClassificationReport>, PipelineError> {
    let mut predictions = Vec::new();
    let mut truths = Vec::new();
    for paper in corpus {
        if let Some(truth) = paper.decision {
            let predicted = metas[&paper.manuscript.id].decision;
            predictions.push(to_binary(predicted) == BinaryDecision::Accept);
            truths.push(to_binary(truth) == BinaryDecision::Accept);
        }
    }
    if predictions.is_empty() {
        log::warn!("no ground-truth decisions in the corpus; skipping evaluation");
        return Ok(None);
    }
    let report = classification_metrics(&predictions, &truths)?;
    write_json(&dirs.eval_file, &report)?;
    Ok(Some(report))
}

/// Execute the four pipeline phases over a corpus, persisting every
/// intermediate artifact under `out_dir` and writing a run manifest.
/// Already-persisted artifacts are trusted and reused, which makes an
/// aborted run resumable by rerunning the same command.
pub fn run_pipeline(
    config: &Config,
    corpus_path: &Path,
    out_dir: &Path,
    gateway: &Gateway,
) -> Result<RunManifest, PipelineError> {
    config.validate()?;
    let corpus_bytes = std::fs::read(corpus_path)?;
    let corpus = load_corpus(corpus_path, config.graph.max_chunk_tokens)?;
    if corpus.is_empty() {
        return Err(PipelineError::Config(format!(
            "corpus {} contains no papers",
            corpus_path.display()
        )));
    }
    let dirs = RunDirs::prepare(out_dir)?;
    let mut timings_ms = BTreeMap::new();

    let started = Instant::now();
    let graphs = phase_graphs(&corpus, &dirs, config, gateway)?;
    timings_ms.insert("graph_construction".to_string(), started.elapsed().as_millis() as u64);

    let started = Instant::now();
    let (personas, index) = phase_selection(&corpus, &graphs, &dirs, config, gateway)?;
    timings_ms.insert("reviewer_selection".to_string(), started.elapsed().as_millis() as u64);

    let started = Instant::now();
    let (reviews, committees) =
        phase_reviews(&corpus, &graphs, &personas, &index, &dirs, config, gateway)?;
    timings_ms.insert("reviewer_evaluation".to_string(), started.elapsed().as_millis() as u64);

    let started = Instant::now();
    let metas = phase_meta(&corpus, &graphs, &reviews, &dirs, config, gateway)?;
    timings_ms.insert("meta_review".to_string(), started.elapsed().as_millis() as u64);

    let started = Instant::now();
    let eval_report = phase_eval(&corpus, &metas, &dirs)?;
    timings_ms.insert("evaluation".to_string(), started.elapsed().as_millis() as u64);

    let mut artifacts: BTreeMap<String, String> = [
        ("acronyms", "acronyms"),
        ("graphs", "graphs"),
        ("personas", "personas.json"),
        ("memory", "memory"),
        ("novelty", "novelty"),
        ("reviews", "reviews"),
        ("meta", "meta"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    if eval_report.is_some() {
        artifacts.insert("eval".to_string(), "eval.json".to_string());
    }

    let manifest = RunManifest {
        config: config.clone(),
        seed: config.seed,
        chat_backend: gateway.chat_backend_id().to_string(),
        chat_model: gateway.chat_model_id().to_string(),
        embedding_model: gateway.embedding_model_id().to_string(),
        corpus_sha256: sha256_hex(&corpus_bytes),
        artifacts,
        decisions: metas.iter().map(|(id, m)| (id.clone(), m.decision)).collect(),
        committees,
        timings_ms,
    };
    manifest.save(&dirs.manifest_file)?;
    Ok(manifest)
}
