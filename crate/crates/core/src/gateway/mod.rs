//! Uniform access to chat-completion and embedding backends.
//!
//! All LLM traffic in the pipeline goes through [`Gateway`]: prompts are
//! rendered from registered templates, completions are requested as JSON and
//! parsed strictly against an [`OutputSchema`] (with bounded repair retries),
//! and every accepted value is cached on disk so reruns replay without any
//! backend requests. The scripted backend is a pure function of
//! `(template_id, bindings, schema)` and is what the test suites run against.

mod cache;
mod http;
mod limit;
mod schema;
mod scripted;
mod template;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::DiskCache;
pub use http::{post_json, HttpChatBackend, HttpEmbedBackend};
pub use limit::RateLimiter;
pub use schema::{FieldKind, FieldSpec, OutputSchema, StructuredValue};
pub use scripted::{fixture_line, ScriptedBackend, DEFAULT_EMBEDDING_DIM, WILDCARD_HASH};
pub use template::{builtin_templates, Template, TemplateRegistry};

/// Slot-name to text bindings for one template rendering.
pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown template: {0}")]
    UnknownTemplate(String),
    #[error("missing slot binding: {0}")]
    MissingSlot(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("schema violation after {retries} retries: {detail}")]
    SchemaViolation { retries: u32, detail: String },
    #[error("rate limited, retry after {0:.1}s")]
    RateLimited(f64),
    #[error("no fixture for template '{template_id}' with bindings hash {bindings_hash}")]
    UnmatchedFixture {
        template_id: String,
        bindings_hash: String,
    },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A rendered prompt plus the template and bindings it came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptInstance {
    pub template_id: String,
    pub bindings: Bindings,
    pub rendered: String,
}

/// Fixed-length embedding tied to the model that produced it. Vectors from
/// different model ids are never compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
    pub model_id: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>, model_id: impl Into<String>) -> Self {
        Self {
            values,
            model_id: model_id.into(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt()
    }
}

/// Chat-completion backend. Implementations must be pure enough that an
/// identical prompt yields an identical response (temperature 0 remotes, or
/// the scripted backend), because the cache treats responses as canonical.
pub trait ChatBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn model_id(&self) -> &str;
    fn complete(&self, prompt: &PromptInstance, temperature: f64) -> Result<String, GatewayError>;
    /// Number of completions served so far (cache misses only reach here).
    fn calls(&self) -> u64;
}

/// Embedding backend; deterministic per (text, model_id).
pub trait EmbedBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn model_id(&self) -> &str;
    fn embed(&self, text: &str) -> Result<Vec<f32>, GatewayError>;
    fn calls(&self) -> u64;
}

/// Stable hash of a bindings map, used to key scripted fixtures.
///
/// Keys are visited in sorted order with length prefixes so the digest is
/// insensitive to map construction order and unambiguous under concatenation.
pub fn bindings_hash(bindings: &Bindings) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in bindings {
        hasher.update((k.len() as u64).to_le_bytes());
        hasher.update(k.as_bytes());
        hasher.update((v.len() as u64).to_le_bytes());
        hasher.update(v.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Configuration for a [`Gateway`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatewayConfig {
    /// Repair retries after a malformed structured response.
    pub retries: u32,
    /// Temperature for extraction and scoring calls.
    pub extract_temperature: f64,
    /// Temperature for free-text review prose.
    pub prose_temperature: f64,
    /// Requests per minute per backend; 0 disables rate limiting.
    pub requests_per_minute: u32,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            retries: 2,
            extract_temperature: 0.0,
            prose_temperature: 0.7,
            requests_per_minute: 0,
        }
    }
}

/// The single entry point for chat completions and embeddings.
pub struct Gateway {
    chat: Arc<dyn ChatBackend>,
    embed: Arc<dyn EmbedBackend>,
    templates: TemplateRegistry,
    cache: Option<DiskCache>,
    limiter: RateLimiter,
    config: GatewayConfig,
}

impl Gateway {
    pub fn new(
        chat: Arc<dyn ChatBackend>,
        embed: Arc<dyn EmbedBackend>,
        cache: Option<DiskCache>,
        config: GatewayConfig,
    ) -> Self {
        Self {
            chat,
            embed,
            templates: builtin_templates(),
            cache,
            limiter: RateLimiter::per_minute(config.requests_per_minute),
            config,
        }
    }

    /// Gateway wired to a scripted backend, with both roles served by the
    /// same fixture set. Used by tests and by `--backend scripted` runs.
    pub fn scripted(backend: ScriptedBackend, cache: Option<DiskCache>, config: GatewayConfig) -> Self {
        let shared = Arc::new(backend);
        Self::new(shared.clone(), shared, cache, config)
    }

    /// Cacheless scripted gateway built straight from fixture JSONL text,
    /// with the default embedding dimension.
    pub fn scripted_from_lines(fixtures: &str) -> Result<Self, GatewayError> {
        let backend = ScriptedBackend::from_fixture_lines(fixtures.lines(), DEFAULT_EMBEDDING_DIM)?;
        Ok(Self::scripted(backend, None, GatewayConfig::default()))
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn templates(&self) -> &TemplateRegistry {
        &self.templates
    }

    /// Total backend invocations (chat + embed). Cache hits do not count.
    pub fn backend_calls(&self) -> u64 {
        self.chat.calls() + self.embed.calls()
    }

    /// Chat completions served by the backend (cache misses only).
    pub fn chat_calls(&self) -> u64 {
        self.chat.calls()
    }

    /// Embeddings served by the backend (cache misses only).
    pub fn embed_calls(&self) -> u64 {
        self.embed.calls()
    }

    pub fn chat_backend_id(&self) -> &str {
        self.chat.backend_id()
    }

    pub fn chat_model_id(&self) -> &str {
        self.chat.model_id()
    }

    pub fn embedding_model_id(&self) -> &str {
        self.embed.model_id()
    }

    /// Render a registered template over the given bindings.
    ///
    /// Rendering is total and deterministic: every slot the template
    /// references must be bound, and identical inputs produce byte-identical
    /// output.
    pub fn render(&self, template_id: &str, bindings: &Bindings) -> Result<PromptInstance, GatewayError> {
        self.templates.render(template_id, bindings)
    }

    /// Request a completion and parse it strictly against `schema`.
    ///
    /// The prompt carries its own format instructions; on a malformed
    /// response a repair instruction is appended and the call retried, up to
    /// the configured retry budget. Accepted values are cached under
    /// (backend id, model id, rendered prompt, schema id).
    pub fn complete_structured(
        &self,
        prompt: &PromptInstance,
        schema: &OutputSchema,
    ) -> Result<StructuredValue, GatewayError> {
        self.complete_structured_at(prompt, schema, self.config.extract_temperature)
    }

    /// As [`Gateway::complete_structured`] with an explicit temperature.
    pub fn complete_structured_at(
        &self,
        prompt: &PromptInstance,
        schema: &OutputSchema,
        temperature: f64,
    ) -> Result<StructuredValue, GatewayError> {
        let key = self.completion_cache_key(prompt, schema);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                let value: StructuredValue = serde_json::from_str(&hit)
                    .map_err(|e| GatewayError::BackendUnavailable(format!("corrupt cache entry: {e}")))?;
                return Ok(value);
            }
        }

        let mut attempt_prompt = prompt.clone();
        let mut last_error = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                attempt_prompt.rendered = format!(
                    "{}\n\nYour previous reply was not valid ({}). Respond again with exactly one JSON object. {}",
                    prompt.rendered,
                    last_error,
                    schema.format_instruction()
                );
            }
            self.limiter.acquire();
            let raw = self.chat.complete(&attempt_prompt, temperature)?;
            match schema.parse(&raw) {
                Ok(value) => {
                    if let Some(cache) = &self.cache {
                        cache.put(&key, &serde_json::to_string(&value).expect("json value serializes"));
                    }
                    return Ok(value);
                }
                Err(detail) => last_error = detail,
            }
        }
        Err(GatewayError::SchemaViolation {
            retries: self.config.retries,
            detail: last_error,
        })
    }

    /// Embed non-empty text; deterministic per (text, model id).
    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if text.is_empty() {
            return Err(GatewayError::EmptyText);
        }
        let key = self.embedding_cache_key(text);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                let values: Vec<f32> = serde_json::from_str(&hit)
                    .map_err(|e| GatewayError::BackendUnavailable(format!("corrupt cache entry: {e}")))?;
                return Ok(EmbeddingVector::new(values, self.embed.model_id()));
            }
        }
        self.limiter.acquire();
        let values = self.embed.embed(text)?;
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(GatewayError::BackendUnavailable(
                "embedding backend returned an empty or non-finite vector".into(),
            ));
        }
        if let Some(cache) = &self.cache {
            cache.put(&key, &serde_json::to_string(&values).expect("floats serialize"));
        }
        Ok(EmbeddingVector::new(values, self.embed.model_id()))
    }

    fn completion_cache_key(&self, prompt: &PromptInstance, schema: &OutputSchema) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.chat.backend_id().as_bytes());
        hasher.update([0]);
        hasher.update(self.chat.model_id().as_bytes());
        hasher.update([0]);
        hasher.update(prompt.rendered.as_bytes());
        hasher.update([0]);
        hasher.update(schema.schema_id.as_bytes());
        hex::encode(hasher.finalize())
    }

    fn embedding_cache_key(&self, text: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"embed");
        hasher.update([0]);
        hasher.update(self.embed.backend_id().as_bytes());
        hasher.update([0]);
        hasher.update(self.embed.model_id().as_bytes());
        hasher.update([0]);
        hasher.update(text.as_bytes());
        hex::encode(hasher.finalize())
    }
}
