//! Python bindings for the deterministic computational core: weighted graphs
//! with modularity optimization, descriptor-set similarity, Bradley–Terry
//! fitting, classification/correlation/aspect metrics, manuscript parsing,
//! round planning, and the threshold decision rule. Gateway-backed agent
//! loops (extraction, reviewing, meta-review) stay behind the Rust CLI,
//! which owns backend configuration and caching.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use gar_core::eval;
use gar_core::graph::{self, LeidenConfig, WeightedGraph};
use gar_core::ingest;
use gar_core::memory;
use gar_core::EmbeddingVector;
use gar_core::meta;
use gar_core::review::{self, BinaryDecision, Review};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Embedding vectors built from Python lists share one synthetic model id so
/// the core's model-mismatch guard never trips between them.
const PY_MODEL_ID: &str = "python";

fn embedding(values: Vec<f32>) -> EmbeddingVector {
    EmbeddingVector::new(values, PY_MODEL_ID)
}

/// Undirected weighted graph with community detection.
#[pyclass(name = "Graph")]
struct Graph {
    inner: WeightedGraph,
}

#[pymethods]
impl Graph {
    #[new]
    fn new(nodes: usize) -> Self {
        Self { inner: WeightedGraph::new(nodes) }
    }

    /// Add an undirected edge (a == b adds a self-loop); weights accumulate.
    fn add_edge(&mut self, a: usize, b: usize, weight: f64) -> PyResult<()> {
        let n = self.inner.node_count();
        if a >= n || b >= n {
            return Err(PyValueError::new_err(format!(
                "edge ({a}, {b}) out of range for a graph of {n} node(s)"
            )));
        }
        if !(weight > 0.0) {
            return Err(PyValueError::new_err(format!(
                "edge weight must be positive, got {weight}"
            )));
        }
        self.inner.add_edge(a, b, weight);
        Ok(())
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn total_weight(&self) -> f64 {
        self.inner.total_weight()
    }

    /// Modularity Q of the given labeling (one community label per node).
    fn modularity(&self, labels: Vec<usize>) -> PyResult<f64> {
        self.inner.modularity(&labels).map_err(value_err)
    }

    /// Community labels by modularity optimization, numbered by first
    /// appearance in node order. Exact on small graphs, seeded heuristic
    /// restarts beyond.
    #[pyo3(signature = (seed = 0, restarts = 10))]
    fn detect_communities(&self, seed: u64, restarts: u32) -> PyResult<Vec<usize>> {
        graph::detect_communities(&self.inner, &LeidenConfig { seed, restarts }).map_err(value_err)
    }
}

/// A validated list of pairwise matches.
#[pyclass(name = "MatchLog")]
#[derive(Default)]
struct MatchLog {
    inner: eval::MatchLog,
}

#[pymethods]
impl MatchLog {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    /// `wins` matches won by `a` plus `losses` won by `b`.
    #[staticmethod]
    fn from_series(a: &str, b: &str, wins: usize, losses: usize) -> Self {
        Self { inner: eval::MatchLog::from_series(a, b, wins, losses) }
    }

    /// Append one match; the winner must be one of the two sides.
    fn add(&mut self, a: &str, b: &str, winner: &str) -> PyResult<()> {
        let record = eval::MatchRecord {
            a: a.to_string(),
            b: b.to_string(),
            winner: winner.to_string(),
        };
        let validated = eval::MatchLog::new(vec![record]).map_err(value_err)?;
        self.inner.extend(validated);
        Ok(())
    }

    fn extend(&mut self, other: &MatchLog) {
        self.inner.extend(other.inner.clone());
    }

    fn competitors(&self) -> Vec<String> {
        self.inner.competitors()
    }

    fn __len__(&self) -> usize {
        self.inner.matches().len()
    }
}

/// Fitted Bradley–Terry strengths, aligned with `competitors`.
#[pyclass(name = "BTFit")]
struct BTFit {
    inner: eval::BTFit,
}

#[pymethods]
impl BTFit {
    #[getter]
    fn competitors(&self) -> Vec<String> {
        self.inner.competitors.clone()
    }

    #[getter]
    fn xi(&self) -> Vec<f64> {
        self.inner.xi.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn components(&self) -> usize {
        self.inner.components
    }

    fn strength_of(&self, name: &str) -> Option<f64> {
        self.inner.strength_of(name)
    }

    /// Competitors ordered by fitted strength, strongest first.
    fn rank(&self) -> Vec<String> {
        eval::rank(&self.inner)
    }
}

/// Fit Bradley–Terry strengths by BCE minimization; the lexicographically
/// first competitor of each connected component is pinned to exactly 0.
#[pyfunction]
#[pyo3(signature = (log, tol = 1e-8, max_iter = 10000))]
fn fit_bradley_terry(log: &MatchLog, tol: f64, max_iter: usize) -> PyResult<BTFit> {
    eval::fit_bradley_terry(&log.inner, tol, max_iter)
        .map(|inner| BTFit { inner })
        .map_err(value_err)
}

/// Cosine similarity of two equal-length vectors.
#[pyfunction]
fn cosine(a: Vec<f32>, b: Vec<f32>) -> PyResult<f64> {
    memory::cosine(&embedding(a), &embedding(b)).map_err(value_err)
}

/// Fraction of the query set's vectors with a τ-close partner in the
/// candidate set, normalized by the larger set size (strict `> tau` match).
#[pyfunction]
#[pyo3(signature = (query, candidate, tau = 0.80))]
fn structural_similarity(query: Vec<Vec<f32>>, candidate: Vec<Vec<f32>>, tau: f64) -> PyResult<f64> {
    let query: Vec<EmbeddingVector> = query.into_iter().map(embedding).collect();
    let candidate: Vec<EmbeddingVector> = candidate.into_iter().map(embedding).collect();
    memory::structural_similarity(&query, &candidate, tau).map_err(value_err)
}

/// Confusion counts plus balanced accuracy and F1 as a dict.
#[pyfunction]
fn classification_metrics<'py>(
    py: Python<'py>,
    predictions: Vec<bool>,
    truths: Vec<bool>,
) -> PyResult<Bound<'py, PyDict>> {
    let report = eval::classification_metrics(&predictions, &truths).map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("tp", report.tp)?;
    dict.set_item("fp", report.fp)?;
    dict.set_item("tn", report.tn)?;
    dict.set_item("fn", report.fn_)?;
    dict.set_item("balanced_accuracy", report.balanced_accuracy)?;
    dict.set_item("f1", report.f1)?;
    Ok(dict)
}

/// Sample Pearson correlation.
#[pyfunction]
fn pearson(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    eval::pearson(&xs, &ys).map_err(value_err)
}

/// Per-aspect log-ratio of relative frequencies, ln((agent + ε)/(human + ε)).
#[pyfunction]
#[pyo3(signature = (agent_counts, human_counts, smoothing = eval::DEFAULT_SMOOTHING))]
fn aspect_log_ratio(
    agent_counts: BTreeMap<String, u64>,
    human_counts: BTreeMap<String, u64>,
    smoothing: f64,
) -> PyResult<BTreeMap<String, f64>> {
    eval::aspect_log_ratio(&agent_counts, &human_counts, smoothing).map_err(value_err)
}

/// Partition descriptor ids into at most `k` order-preserving blocks whose
/// sizes differ by at most one (the per-round reading plan).
#[pyfunction]
fn plan_rounds(descriptor_ids: Vec<u32>, k: usize) -> PyResult<Vec<Vec<u32>>> {
    review::plan_rounds(&descriptor_ids, k)
        .map(|plan| plan.blocks)
        .map_err(value_err)
}

/// Threshold decision rule over a committee's overall scores: mean ≥
/// threshold accepts (as poster), anything below rejects. Returns
/// (decision, mean).
#[pyfunction]
#[pyo3(signature = (overall_scores, threshold = 6.0))]
fn threshold_decision(overall_scores: Vec<i64>, threshold: f64) -> PyResult<(String, f64)> {
    let reviews: Vec<Review> = overall_scores
        .iter()
        .enumerate()
        .map(|(i, &overall)| Review {
            reviewer_id: format!("r{i}"),
            round: 1,
            soundness: 0,
            presentation: 0,
            contribution: 0,
            overall,
            confidence: 0,
            summary: String::new(),
            strengths: Vec::new(),
            weaknesses: Vec::new(),
            suggestions: Vec::new(),
            decision: BinaryDecision::Reject,
            rationale: String::new(),
        })
        .collect();
    let mean = meta::mean_score(&reviews).map_err(value_err)?;
    let verdict = meta::threshold_meta(&reviews, threshold).map_err(value_err)?;
    let decision = match verdict.decision {
        meta::Decision::AcceptOral => "accept_oral",
        meta::Decision::AcceptPoster => "accept_poster",
        meta::Decision::Reject => "reject",
    };
    Ok((decision.to_string(), mean))
}

/// Parse markdown into a sectioned, chunked manuscript dict.
#[pyfunction]
#[pyo3(signature = (markdown, id, year, max_chunk_tokens = ingest::DEFAULT_MAX_CHUNK_TOKENS))]
fn parse_manuscript<'py>(
    py: Python<'py>,
    markdown: &str,
    id: &str,
    year: i32,
    max_chunk_tokens: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let manuscript =
        ingest::parse_manuscript(markdown, id, year, max_chunk_tokens).map_err(value_err)?;
    let dict = PyDict::new(py);
    dict.set_item("id", &manuscript.id)?;
    dict.set_item("title", &manuscript.title)?;
    dict.set_item("abstract", &manuscript.abstract_text)?;
    dict.set_item("year", manuscript.year)?;
    let sections = PyList::empty(py);
    for section in &manuscript.sections {
        let s = PyDict::new(py);
        s.set_item("heading", &section.heading)?;
        s.set_item("body", &section.body)?;
        sections.append(s)?;
    }
    dict.set_item("sections", sections)?;
    let chunks = PyList::empty(py);
    for chunk in &manuscript.chunks {
        let c = PyDict::new(py);
        c.set_item("chunk_id", &chunk.chunk_id)?;
        c.set_item("section_heading", &chunk.section_heading)?;
        c.set_item("text", &chunk.text)?;
        c.set_item("token_estimate", chunk.token_estimate)?;
        chunks.append(c)?;
    }
    dict.set_item("chunks", chunks)?;
    let captions = PyList::empty(py);
    for caption in &manuscript.figure_captions {
        let f = PyDict::new(py);
        f.set_item("figure_id", &caption.figure_id)?;
        f.set_item("caption", &caption.caption)?;
        captions.append(f)?;
    }
    dict.set_item("figure_captions", captions)?;
    Ok(dict)
}

#[pymodule]
fn gar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<MatchLog>()?;
    m.add_class::<BTFit>()?;
    m.add_function(wrap_pyfunction!(fit_bradley_terry, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(structural_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(classification_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(aspect_log_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(plan_rounds, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_decision, m)?)?;
    m.add_function(wrap_pyfunction!(parse_manuscript, m)?)?;
    Ok(())
}
