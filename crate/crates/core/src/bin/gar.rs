//! Command-line entry point: one subcommand per module plus `run` for the
//! full four-phase pipeline. Every failure exits nonzero with a
//! machine-readable error JSON on stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use gar_core::eval::{
    aspect_log_ratio, classification_metrics, fit_bradley_terry, rank, MatchLog,
};
use gar_core::gateway::{
    DiskCache, Gateway, HttpChatBackend, HttpEmbedBackend, ScriptedBackend,
};
use gar_core::graph::LeidenConfig;
use gar_core::ingest::load_corpus;
use gar_core::memory::{
    index_paper, load_index, retrieve_communities, save_index, MemoryIndex, MetaMemory,
    MetaMemoryEntry,
};
use gar_core::meta::{agentic_meta, threshold_meta, MetaMode};
use gar_core::novelty::{
    assess_novelty, extract_novelty_keywords, search_prior_work, ExternalSearch, LocalSearchIndex,
};
use gar_core::persona::{build_personas, GatewayJudge, ReviewerPersona};
use gar_core::pipeline::{
    ensure_acronyms, ensure_graph, ensure_novelty, find_paper, graph_signature, run_pipeline,
    sample_committee, Config, PipelineError, RunDirs,
};
use gar_core::review::{load_transcript, run_committee, CommitteeConfig, Review};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    /// Deterministic fixture-driven backend; no network.
    Scripted,
    /// OpenAI-compatible HTTP backend configured through GAR_* env vars.
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetaModeArg {
    Agentic,
    Threshold,
}

impl From<MetaModeArg> for MetaMode {
    fn from(mode: MetaModeArg) -> Self {
        match mode {
            MetaModeArg::Agentic => MetaMode::Agentic,
            MetaModeArg::Threshold => MetaMode::Threshold,
        }
    }
}

#[derive(Parser)]
#[command(name = "gar", version, about = "Graph-augmented reviewer agents over a manuscript corpus")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configured one.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Model backend.
    #[arg(long, global = true, value_enum, default_value_t = BackendKind::Scripted)]
    backend: BackendKind,
    /// Fixture JSONL file for the scripted backend.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Directory for the on-disk response cache.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker threads for paper-level parallelism; 0 keeps the default.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and materialize the parsed manuscripts.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the knowledge graph for one paper.
    Graph {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        paper: String,
        /// Run directory receiving the graph and acronym artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Print graph statistics to stdout.
        #[arg(long)]
        report: bool,
    },
    /// Mine reviewer personas from the historical reviews.
    Personas {
        #[arg(long)]
        corpus: PathBuf,
        /// Pairwise judgments per trait.
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build or query the community/review memory index.
    Memory {
        #[command(subcommand)]
        command: MemoryCommand,
    },
    /// Assess a paper's novelty against retrieved prior work.
    Novelty {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        paper: String,
        /// Query the env-configured external search service first.
        #[arg(long)]
        external: bool,
        /// Run directory for artifact reuse; assessment is printed either way.
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Run a reviewer committee over one paper.
    Review {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        paper: String,
        /// Committee size, sampled from the persona pool.
        #[arg(long, default_value_t = 3)]
        committee: usize,
        /// Refinement rounds after the initial review.
        #[arg(long, default_value_t = 3)]
        rounds: usize,
        /// Retrieved similar communities per descriptor.
        #[arg(short = 'M', long = "retrievals", default_value_t = 3)]
        retrievals: usize,
        /// Persona file produced by `gar personas`.
        #[arg(long)]
        personas: PathBuf,
        /// Run directory for artifacts and transcripts.
        #[arg(long, default_value = "out")]
        artifacts: PathBuf,
    },
    /// Produce the meta-review and decision for one paper.
    Meta {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        paper: String,
        #[arg(long, value_enum, default_value_t = MetaModeArg::Agentic)]
        mode: MetaModeArg,
        /// Mean-overall cutoff for threshold mode.
        #[arg(long, default_value_t = 6.0)]
        threshold: f64,
        /// Retrieved meta-review exemplars.
        #[arg(long, default_value_t = 5)]
        k2: usize,
        /// Reflection turns before deciding.
        #[arg(long, default_value_t = 2)]
        turns: usize,
        /// Run directory holding the review transcripts.
        #[arg(long, default_value = "out")]
        artifacts: PathBuf,
    },
    /// Measurement utilities over logged outcomes.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Execute the full four-phase pipeline over a corpus.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum MemoryCommand {
    /// Index every paper's community descriptors and review snippets.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve the closest foreign communities for a descriptor.
    Query {
        /// Query text: JSON with a `text` field (a graph descriptor works
        /// as-is) or a plain-text file.
        #[arg(long)]
        descriptor: PathBuf,
        /// Number of entries to retrieve.
        #[arg(short = 'M', long, default_value_t = 3)]
        m: usize,
        /// Index directory produced by `gar memory build`.
        #[arg(long)]
        index: PathBuf,
        /// Paper id to exclude from results.
        #[arg(long, default_value = "")]
        paper: String,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Fit Bradley-Terry strengths from a match log CSV (a,b,winner).
    Bt {
        #[arg(long)]
        log: PathBuf,
    },
    /// Balanced accuracy and F1 of predicted vs true decisions (id,decision CSVs).
    Classify {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Aspect log-ratios from agent and human mention-count JSON maps.
    Aspects {
        #[arg(long)]
        agent: PathBuf,
        #[arg(long)]
        human: PathBuf,
    },
}

fn error_kind(err: &PipelineError) -> &'static str {
    match err {
        PipelineError::Config(_) => "config",
        PipelineError::InsufficientReviewers { .. } => "insufficient_reviewers",
        PipelineError::UnknownPaper(_) => "unknown_paper",
        PipelineError::Io(_) => "io",
        PipelineError::Serde(_) => "serialization",
        PipelineError::Toml(_) => "config_parse",
        PipelineError::Ingest(_) => "ingest",
        PipelineError::Graph(_) => "graph",
        PipelineError::Persona(_) => "persona",
        PipelineError::Memory(_) => "memory",
        PipelineError::Novelty(_) => "novelty",
        PipelineError::Review(_) => "review",
        PipelineError::Meta(_) => "meta",
        PipelineError::Eval(_) => "eval",
        PipelineError::Gateway(_) => "gateway",
    }
}

fn main() {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if err.use_stderr() {
                eprintln!(
                    "{}",
                    json!({"error": {"kind": "usage", "message": err.to_string()}})
                );
                std::process::exit(2);
            }
            // Help and version requests belong on stdout with exit 0.
            print!("{err}");
            std::process::exit(0);
        }
    };
    if cli.workers > 0 {
        // In this single-shot process the global pool cannot be set yet.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global();
    }
    if let Err(err) = run(&cli) {
        eprintln!(
            "{}",
            json!({"error": {"kind": error_kind(&err), "message": err.to_string()}})
        );
        std::process::exit(1);
    }
}

fn load_config(cli: &Cli) -> Result<Config, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn build_gateway(cli: &Cli, config: &Config) -> Result<Gateway, PipelineError> {
    let cache = match &cli.cache {
        Some(dir) => Some(DiskCache::open(dir)?),
        None => None,
    };
    let gateway_config = config.gateway.gateway_config();
    match cli.backend {
        BackendKind::Scripted => {
            let backend = match &cli.fixtures {
                Some(path) => ScriptedBackend::from_fixture_file(path, config.gateway.embedding_dim)?,
                None => ScriptedBackend::empty(config.gateway.embedding_dim),
            };
            Ok(Gateway::scripted(backend, cache, gateway_config))
        }
        BackendKind::Http => {
            let chat = HttpChatBackend::from_env()?;
            let embed = HttpEmbedBackend::from_env()?;
            Ok(Gateway::new(Arc::new(chat), Arc::new(embed), cache, gateway_config))
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), PipelineError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Final review per committee member, read back from the transcript tree.
fn final_reviews(reviews_dir: &Path, paper_id: &str) -> Result<Vec<Review>, PipelineError> {
    let paper_dir = reviews_dir.join(paper_id);
    if !paper_dir.is_dir() {
        return Err(PipelineError::Config(format!(
            "no review transcripts for paper {paper_id} under {}; run `gar review` first",
            reviews_dir.display()
        )));
    }
    let mut reviewer_ids: Vec<String> = std::fs::read_dir(&paper_dir)?
        .filter_map(|entry| {
            let entry = entry.ok()?;
            entry
                .file_type()
                .ok()?
                .is_dir()
                .then(|| entry.file_name().to_string_lossy().into_owned())
        })
        .collect();
    reviewer_ids.sort();
    let mut finals = Vec::new();
    for reviewer_id in &reviewer_ids {
        let mut transcript = load_transcript(reviews_dir, paper_id, reviewer_id)?;
        if let Some(review) = transcript.pop() {
            finals.push(review);
        }
    }
    if finals.is_empty() {
        return Err(PipelineError::Config(format!(
            "no review transcripts for paper {paper_id} under {}; run `gar review` first",
            reviews_dir.display()
        )));
    }
    Ok(finals)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let config = load_config(cli)?;
    config.validate()?;
    let gateway = build_gateway(cli, &config)?;

    match &cli.command {
        Command::Ingest { corpus, out } => {
            let records = load_corpus(corpus, config.graph.max_chunk_tokens)?;
            std::fs::create_dir_all(out)?;
            let mut chunks = 0usize;
            for record in &records {
                chunks += record.manuscript.chunks.len();
                write_json(
                    &out.join(format!("{}.json", record.manuscript.id)),
                    &record.manuscript,
                )?;
            }
            print_json(&json!({
                "papers": records.len(),
                "chunks": chunks,
                "out": out,
            }))
        }
        Command::Graph { corpus, paper, out, report } => {
            let records = load_corpus(corpus, config.graph.max_chunk_tokens)?;
            let record = find_paper(&records, paper)?;
            let dirs = RunDirs::prepare(out)?;
            let leiden = LeidenConfig {
                seed: config.module_seed("leiden"),
                restarts: config.graph.leiden_restarts,
            };
            let acronyms = ensure_acronyms(record, &dirs, &gateway)?;
            let graph = ensure_graph(record, &acronyms, &dirs, &leiden, &gateway)?;
            if *report {
                print_json(&json!({
                    "paper": paper,
                    "entities": graph.entities.len(),
                    "relations": graph.relations.len(),
                    "communities": graph.descriptors.len(),
                }))?;
            }
            Ok(())
        }
        Command::Personas { corpus, n, out } => {
            let records = load_corpus(corpus, config.graph.max_chunk_tokens)?;
            let judge = GatewayJudge::new(&gateway);
            let personas = build_personas(
                &records,
                *n,
                config.module_seed("persona"),
                config.persona.max_focus_areas,
                &judge,
                &gateway,
            )?;
            write_json(out, &personas)?;
            print_json(&json!({"reviewers": personas.len(), "out": out}))
        }
        Command::Memory { command } => match command {
            MemoryCommand::Build { corpus, out } => {
                let records = load_corpus(corpus, config.graph.max_chunk_tokens)?;
                let leiden = LeidenConfig {
                    seed: config.module_seed("leiden"),
                    restarts: config.graph.leiden_restarts,
                };
                let mut entries = Vec::new();
                for record in &records {
                    let acronyms = gar_core::ingest::extract_acronyms(&record.manuscript, &gateway)?;
                    let (graph, _) = gar_core::graph::build_graph(
                        &record.manuscript,
                        &acronyms,
                        &gateway,
                        &leiden,
                    )?;
                    entries.extend(index_paper(&graph, &record.reviews, &gateway)?);
                }
                let index = MemoryIndex::build(entries)?;
                save_index(&index, out)?;
                print_json(&json!({"entries": index.entries().len(), "out": out}))
            }
            MemoryCommand::Query { descriptor, m, index, paper } => {
                #[derive(Deserialize)]
                struct DescriptorQuery {
                    text: String,
                }
                let raw = std::fs::read_to_string(descriptor)?;
                // JSON with a `text` field, else the file body is the query.
                let text = match serde_json::from_str::<DescriptorQuery>(&raw) {
                    Ok(query) => query.text,
                    Err(_) => raw.trim().to_string(),
                };
                if text.is_empty() {
                    return Err(PipelineError::Config(format!(
                        "descriptor file {} is empty",
                        descriptor.display()
                    )));
                }
                let index = load_index(index)?;
                let embedding = gateway.embed(&text)?;
                let hits = retrieve_communities(&index, &embedding, paper, *m)?;
                let rows: Vec<_> = hits
                    .iter()
                    .map(|(entry, score)| {
                        json!({
                            "paper_id": entry.paper_id,
                            "community_id": entry.community_id,
                            "descriptor": entry.descriptor_text,
                            "snippet": entry.review_snippet,
                            "score": score,
                        })
                    })
                    .collect();
                print_json(&rows)
            }
        },
        Command::Novelty { corpus, paper, external, artifacts } => {
            let records = load_corpus(corpus, config.graph.max_chunk_tokens)?;
            let record = find_paper(&records, paper)?;
            let search_index = LocalSearchIndex::build(&records, &gateway)?;
            let client = if *external { ExternalSearch::from_env() } else { None };
            let assessment = match artifacts {
                Some(out) => {
                    let dirs = RunDirs::prepare(out)?;
                    let acronyms = ensure_acronyms(record, &dirs, &gateway)?;
                    ensure_novelty(
                        record,
                        &acronyms,
                        &dirs,
                        &config.novelty,
                        client.as_ref(),
                        &search_index,
                        &gateway,
                    )?
                }
                None => {
                    let acronyms =
                        gar_core::ingest::extract_acronyms(&record.manuscript, &gateway)?;
                    let keywords = extract_novelty_keywords(
                        &record.manuscript,
                        config.novelty.max_keywords,
                        &gateway,
                    )?;
                    let candidates = search_prior_work(
                        &keywords,
                        record.manuscript.year,
                        client.as_ref(),
                        &search_index,
                        config.novelty.max_candidates,
                        &gateway,
                    )?;
                    assess_novelty(&record.manuscript, &candidates, &acronyms, &gateway)?
                }
            };
            print_json(&assessment)
        }
        Command::Review { corpus, paper, committee, rounds, retrievals, personas, artifacts } => {
            let records = load_corpus(corpus, config.graph.max_chunk_tokens)?;
            let record = find_paper(&records, paper)?;
            let pool: BTreeMap<String, ReviewerPersona> =
                serde_json::from_str(&std::fs::read_to_string(personas)?)?;
            let dirs = RunDirs::prepare(artifacts)?;
            let leiden = LeidenConfig {
                seed: config.module_seed("leiden"),
                restarts: config.graph.leiden_restarts,
            };
            let acronyms = ensure_acronyms(record, &dirs, &gateway)?;
            let graph = ensure_graph(record, &acronyms, &dirs, &leiden, &gateway)?;
            let search_index = LocalSearchIndex::build(&records, &gateway)?;
            let assessment = ensure_novelty(
                record,
                &acronyms,
                &dirs,
                &config.novelty,
                None,
                &search_index,
                &gateway,
            )?;
            let index = if dirs.memory.join("entries.jsonl").exists() {
                load_index(&dirs.memory)?
            } else {
                let mut entries = Vec::new();
                for other in &records {
                    let other_acronyms = ensure_acronyms(other, &dirs, &gateway)?;
                    let other_graph =
                        ensure_graph(other, &other_acronyms, &dirs, &leiden, &gateway)?;
                    entries.extend(index_paper(&other_graph, &other.reviews, &gateway)?);
                }
                let index = MemoryIndex::build(entries)?;
                save_index(&index, &dirs.memory)?;
                index
            };
            let committee_ids = sample_committee(&pool, paper, *committee, config.seed)?;
            let members: Vec<ReviewerPersona> = committee_ids
                .iter()
                .map(|id| pool[id].clone())
                .collect();
            let finals = run_committee(
                &graph,
                &members,
                &assessment,
                &index,
                &acronyms,
                CommitteeConfig {
                    rounds: *rounds,
                    retrievals_per_descriptor: *retrievals,
                },
                &gateway,
                Some(&dirs.reviews),
            )?;
            print_json(&finals)
        }
        Command::Meta { corpus, paper, mode, threshold, k2, turns, artifacts } => {
            let records = load_corpus(corpus, config.graph.max_chunk_tokens)?;
            let record = find_paper(&records, paper)?;
            let dirs = RunDirs::prepare(artifacts)?;
            let finals = final_reviews(&dirs.reviews, paper)?;
            let meta = match MetaMode::from(*mode) {
                MetaMode::Threshold => threshold_meta(&finals, *threshold)?,
                MetaMode::Agentic => {
                    let leiden = LeidenConfig {
                        seed: config.module_seed("leiden"),
                        restarts: config.graph.leiden_restarts,
                    };
                    let mut entries = Vec::new();
                    for other in &records {
                        let Some(text) = &other.meta_review_text else { continue };
                        if other.manuscript.id == *paper {
                            continue;
                        }
                        let other_acronyms = ensure_acronyms(other, &dirs, &gateway)?;
                        let other_graph =
                            ensure_graph(other, &other_acronyms, &dirs, &leiden, &gateway)?;
                        entries.push(MetaMemoryEntry {
                            paper_id: other.manuscript.id.clone(),
                            graph_signature: graph_signature(&other_graph, &gateway)?,
                            meta_review_text: text.clone(),
                        });
                    }
                    let acronyms = ensure_acronyms(record, &dirs, &gateway)?;
                    let graph = ensure_graph(record, &acronyms, &dirs, &leiden, &gateway)?;
                    let signature = graph_signature(&graph, &gateway)?;
                    agentic_meta(
                        &finals,
                        &MetaMemory { entries },
                        &signature,
                        *k2,
                        *turns,
                        config.memory.tau,
                        &gateway,
                    )?
                }
            };
            write_json(&dirs.meta.join(format!("{paper}.json")), &meta)?;
            print_json(&meta)
        }
        Command::Eval { command } => match command {
            EvalCommand::Bt { log } => {
                let log = MatchLog::from_csv_path(log)?;
                let fit = fit_bradley_terry(&log, config.eval.bt_tol, config.eval.bt_max_iter)?;
                let ranking = rank(&fit);
                print_json(&json!({
                    "competitors": fit.competitors,
                    "xi": fit.xi,
                    "converged": fit.converged,
                    "iterations": fit.iterations,
                    "components": fit.components,
                    "ranking": ranking,
                }))
            }
            EvalCommand::Classify { pred, truth } => {
                let predictions = read_decisions(pred)?;
                let truths = read_decisions(truth)?;
                let (paired_predictions, paired_truths) = align_decisions(&predictions, &truths)?;
                let report = classification_metrics(&paired_predictions, &paired_truths)?;
                print_json(&report)
            }
            EvalCommand::Aspects { agent, human } => {
                let agent_counts: BTreeMap<String, u64> =
                    serde_json::from_str(&std::fs::read_to_string(agent)?)?;
                let human_counts: BTreeMap<String, u64> =
                    serde_json::from_str(&std::fs::read_to_string(human)?)?;
                let ratios =
                    aspect_log_ratio(&agent_counts, &human_counts, config.eval.smoothing)?;
                print_json(&ratios)
            }
        },
        Command::Run { corpus, out } => {
            let manifest = run_pipeline(&config, corpus, out, &gateway)?;
            print_json(&json!({
                "manifest": out.join("manifest.json"),
                "papers": manifest.decisions.len(),
                "decisions": manifest.decisions,
            }))
        }
    }
}

/// Read an `id,decision` CSV into per-id binary accept flags.
fn read_decisions(path: &Path) -> Result<BTreeMap<String, bool>, PipelineError> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        decision: String,
    }
    let mut reader = csv::Reader::from_path(path).map_err(gar_core::eval::EvalError::from)?;
    let mut decisions = BTreeMap::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(gar_core::eval::EvalError::from)?;
        let accept = match row.decision.as_str() {
            "accept" | "accept_oral" | "accept_poster" => true,
            "reject" => false,
            other => {
                return Err(PipelineError::Config(format!(
                    "unknown decision {other:?} for id {}",
                    row.id
                )))
            }
        };
        if decisions.insert(row.id.clone(), accept).is_some() {
            return Err(PipelineError::Config(format!("duplicate id {} in {}", row.id, path.display())));
        }
    }
    Ok(decisions)
}

/// Pair prediction and truth by id, requiring identical id sets.
fn align_decisions(
    predictions: &BTreeMap<String, bool>,
    truths: &BTreeMap<String, bool>,
) -> Result<(Vec<bool>, Vec<bool>), PipelineError> {
    let only_pred: Vec<&String> = predictions.keys().filter(|k| !truths.contains_key(*k)).collect();
    let only_truth: Vec<&String> = truths.keys().filter(|k| !predictions.contains_key(*k)).collect();
    if !only_pred.is_empty() || !only_truth.is_empty() {
        return Err(PipelineError::Config(format!(
            "prediction/truth id sets differ (only in predictions: {only_pred:?}; only in truth: {only_truth:?})"
        )));
    }
    Ok(predictions
        .iter()
        .map(|(id, &p)| (p, truths[id]))
        .unzip())
}
