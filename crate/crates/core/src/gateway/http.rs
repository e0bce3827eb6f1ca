//! JSON-over-HTTP chat and embedding backends.
//!
//! Request/response shapes:
//!   chat:  POST url  {model, messages:[{role, content}], temperature} → {content}
//!   embed: POST url  {model, input} → {embedding: [f32]}
//! Endpoint, model id, and key come from config or the environment
//! (GAR_LLM_URL / GAR_LLM_MODEL / GAR_LLM_KEY and GAR_EMB_URL / GAR_EMB_MODEL).

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde_json::{json, Value};

use super::{ChatBackend, EmbedBackend, GatewayError, PromptInstance};

const REQUEST_TIMEOUT: Duration = Duration::from_secs(120);

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(REQUEST_TIMEOUT))
        .build()
        .into()
}

/// POST a JSON body (optionally bearer-authorized) and parse the JSON reply.
pub fn post_json(url: &str, key: Option<&str>, body: &Value) -> Result<Value, GatewayError> {
    let agent = agent();
    let mut request = agent.post(url);
    if let Some(key) = key {
        request = request.header("authorization", format!("Bearer {key}"));
    }
    let mut response = request
        .send_json(body)
        .map_err(|e| GatewayError::BackendUnavailable(format!("{url}: {e}")))?;
    response
        .body_mut()
        .read_json::<Value>()
        .map_err(|e| GatewayError::BackendUnavailable(format!("{url}: invalid JSON body: {e}")))
}

pub struct HttpChatBackend {
    url: String,
    model: String,
    key: Option<String>,
    calls: AtomicU64,
}

impl HttpChatBackend {
    pub fn new(url: String, model: String, key: Option<String>) -> Self {
        Self {
            url,
            model,
            key,
            calls: AtomicU64::new(0),
        }
    }

    pub fn from_env() -> Result<Self, GatewayError> {
        let url = std::env::var("GAR_LLM_URL")
            .map_err(|_| GatewayError::BackendUnavailable("GAR_LLM_URL not set".into()))?;
        let model = std::env::var("GAR_LLM_MODEL")
            .map_err(|_| GatewayError::BackendUnavailable("GAR_LLM_MODEL not set".into()))?;
        let key = std::env::var("GAR_LLM_KEY").ok();
        Ok(Self::new(url, model, key))
    }
}

impl ChatBackend for HttpChatBackend {
    fn backend_id(&self) -> &str {
        "http-chat"
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &PromptInstance, temperature: f64) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt.rendered}],
            "temperature": temperature,
        });
        let response = post_json(&self.url, self.key.as_deref(), &body)?;
        response["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| GatewayError::BackendUnavailable("chat response missing \"content\"".into()))
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

pub struct HttpEmbedBackend {
    url: String,
    model: String,
    key: Option<String>,
    calls: AtomicU64,
}

impl HttpEmbedBackend {
    pub fn new(url: String, model: String, key: Option<String>) -> Self {
        Self {
            url,
            model,
            key,
            calls: AtomicU64::new(0),
        }
    }

    pub fn from_env() -> Result<Self, GatewayError> {
        let url = std::env::var("GAR_EMB_URL")
            .map_err(|_| GatewayError::BackendUnavailable("GAR_EMB_URL not set".into()))?;
        let model = std::env::var("GAR_EMB_MODEL")
            .map_err(|_| GatewayError::BackendUnavailable("GAR_EMB_MODEL not set".into()))?;
        let key = std::env::var("GAR_LLM_KEY").ok();
        Ok(Self::new(url, model, key))
    }
}

impl EmbedBackend for HttpEmbedBackend {
    fn backend_id(&self) -> &str {
        "http-embed"
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, GatewayError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let body = json!({"model": self.model, "input": text});
        let response = post_json(&self.url, self.key.as_deref(), &body)?;
        let values = response["embedding"]
            .as_array()
            .ok_or_else(|| GatewayError::BackendUnavailable("embed response missing \"embedding\"".into()))?;
        values
            .iter()
            .map(|v| {
                v.as_f64()
                    .map(|f| f as f32)
                    .ok_or_else(|| GatewayError::BackendUnavailable("non-numeric embedding value".into()))
            })
            .collect()
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}
