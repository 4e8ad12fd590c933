//! LLM completions with schema-validated structured replies, bounded
//! retries, and record/replay fixtures for offline runs.

mod config;
pub mod prompts;
mod schema;
mod store;
mod transport;

use serde_json::Value;
use thiserror::Error;

pub use config::{LlmConfig, Mode};
pub use store::{canonical_json, fingerprint, FixtureEntry, ReplayStore};
pub use transport::{ChatMessage, ChatRequest, HttpTransport, Transport};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("reply violated the response schema after {attempts} attempt(s): {reason}")]
    SchemaViolation { attempts: u32, reason: String },
    #[error("reply rejected after {attempts} attempt(s): {reason}")]
    Rejected { attempts: u32, reason: String },
    #[error("no recorded reply for request {fingerprint}")]
    ReplayMiss { fingerprint: String },
    #[error("token budget exceeded: {used} > {budget}")]
    BudgetExceeded { used: u64, budget: u64 },
    #[error("llm configuration: {0}")]
    Config(String),
    #[error("fixture store: {0}")]
    Store(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub response_schema: Value,
    pub temperature: f64,
    pub max_retries: u32,
    pub budget_tokens: u64,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, response_schema: Value) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            response_schema,
            temperature: 0.0,
            max_retries: 2,
            budget_tokens: 32_000,
        }
    }
}

const SYSTEM_PREAMBLE: &str =
    "You are a planning assistant. Reply with exactly one JSON value and nothing else. The value must match this JSON schema:";

/// Rough token count used for budget accounting.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

fn retry_prompt(base: &str, reason: &str) -> String {
    format!("{base}\n\nYour previous reply was rejected: {reason}\nReply again with a single JSON value that fixes this.")
}

fn parse_reply(raw: &str) -> Result<Value, String> {
    let mut text = raw.trim();
    if let Some(rest) = text.strip_prefix("```") {
        text = rest.trim_start_matches("json");
        text = text.strip_suffix("```").unwrap_or(text).trim();
    }
    serde_json::from_str(text).map_err(|e| format!("reply is not valid JSON: {e}"))
}

enum Failure {
    Schema(String),
    Check(String),
}

pub struct LlmGateway {
    mode: Mode,
    model: String,
    store: ReplayStore,
    transport: Option<Box<dyn Transport>>,
}

impl LlmGateway {
    pub fn new(mode: Mode, model: impl Into<String>, store: ReplayStore, transport: Option<Box<dyn Transport>>) -> Self {
        LlmGateway {
            mode,
            model: model.into(),
            store,
            transport,
        }
    }

    pub fn from_config(cfg: &LlmConfig) -> Result<Self, LlmError> {
        let transport: Option<Box<dyn Transport>> = match (cfg.mode, &cfg.base_url) {
            (Mode::Replay, _) => None,
            (_, Some(url)) => Some(Box::new(HttpTransport::new(url, cfg.api_key.clone())?)),
            (mode, None) => {
                return Err(LlmError::Config(format!("{mode} mode needs LLM_BASE_URL")));
            }
        };
        Ok(LlmGateway::new(
            cfg.mode,
            cfg.model.clone(),
            ReplayStore::open(&cfg.fixtures_path),
            transport,
        ))
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn store(&self) -> &ReplayStore {
        &self.store
    }

    fn fetch(&self, prompt: &str, schema: &Value, temperature: f64) -> Result<String, LlmError> {
        let fp = fingerprint(prompt, schema);
        if self.mode != Mode::Live {
            if let Some(reply) = self.store.lookup(&fp)? {
                return Ok(reply);
            }
            if self.mode == Mode::Replay {
                return Err(LlmError::ReplayMiss { fingerprint: fp });
            }
        }
        let transport = self
            .transport
            .as_ref()
            .ok_or_else(|| LlmError::Config(format!("{} mode has no transport", self.mode)))?;
        let request = ChatRequest {
            model: self.model.clone(),
            temperature,
            max_tokens: 4096,
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: format!("{SYSTEM_PREAMBLE}\n{}", canonical_json(schema)),
                },
                ChatMessage {
                    role: "user".into(),
                    content: prompt.to_string(),
                },
            ],
        };
        let reply = transport.send(&request)?;
        if self.mode == Mode::Record {
            self.store.record(prompt, schema, &reply)?;
        }
        Ok(reply)
    }

    /// A reply that parses and matches `req.response_schema`.
    pub fn complete_structured(&self, req: &CompletionRequest) -> Result<Value, LlmError> {
        self.complete_validated(req, |v| Ok(v.clone()))
    }

    /// Like `complete_structured`, with an extra semantic check. Failures of
    /// either kind are explained to the model in a retry, up to
    /// `req.max_retries` times.
    pub fn complete_validated<T>(
        &self,
        req: &CompletionRequest,
        check: impl Fn(&Value) -> Result<T, String>,
    ) -> Result<T, LlmError> {
        let mut used = 0u64;
        let mut prompt = req.prompt.clone();
        let mut last = Failure::Schema(String::new());
        for attempt in 0..=req.max_retries {
            if attempt > 0 {
                let reason = match &last {
                    Failure::Schema(r) | Failure::Check(r) => r.as_str(),
                };
                prompt = retry_prompt(&req.prompt, reason);
            }
            used += estimate_tokens(&prompt);
            if used > req.budget_tokens {
                return Err(LlmError::BudgetExceeded {
                    used,
                    budget: req.budget_tokens,
                });
            }
            let raw = self.fetch(&prompt, &req.response_schema, req.temperature)?;
            used += estimate_tokens(&raw);
            let value = match parse_reply(&raw) {
                Ok(v) => v,
                Err(e) => {
                    last = Failure::Schema(e);
                    continue;
                }
            };
            if let Err(e) = schema::check(&value, &req.response_schema) {
                last = Failure::Schema(e);
                continue;
            }
            match check(&value) {
                Ok(t) => return Ok(t),
                Err(e) => last = Failure::Check(e),
            }
        }
        let attempts = req.max_retries + 1;
        Err(match last {
            Failure::Schema(reason) => LlmError::SchemaViolation { attempts, reason },
            Failure::Check(reason) => LlmError::Rejected { attempts, reason },
        })
    }
}
