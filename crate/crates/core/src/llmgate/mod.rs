//! Provider-agnostic chat completion with bounded retry.
//!
//! Hosted providers (OpenAI, Groq) share the OpenAI-compatible wire codec and
//! differ only in base URL and key. [`ScriptedProvider`] replays canned
//! answers for offline, deterministic runs.

mod hosted;
mod scripted;
mod wire;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use hosted::{ApiKey, HostedKind, HostedProvider};
pub use scripted::{FailKind, RecordedCall, Script, ScriptRule, ScriptStep, ScriptedProvider};
pub use wire::{wire_decode, wire_encode, ChatMessage, ChatRequest};

/// Outcome of a single provider call.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("transient provider failure: {0}")]
    Retryable(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider refused the request: {0}")]
    Refusal(String),
    #[error("no scripted answer for prompt starting {0:?}")]
    ScriptExhausted(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("provider authentication failed: {0}")]
    ProviderAuth(String),
    #[error("gave up after {attempts} provider calls: {last_error}")]
    ExhaustedRetries { attempts: u32, last_error: String },
    #[error("provider refused the request: {0}")]
    ProviderRefusal(String),
    #[error("no scripted answer for prompt starting {0:?}")]
    ScriptExhausted(String),
    #[error("invalid LLM settings: {0}")]
    InvalidSettings(String),
    #[error("prompt has {len} characters, limit is {max}")]
    PromptTooLong { len: usize, max: usize },
}

/// A chat-completion backend. `send` performs exactly one call; retry
/// policy belongs to [`complete`].
pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;
    fn send(&self, request: &ChatRequest) -> Result<String, ProviderError>;
    /// Called before retry number `attempt` (1-based).
    fn pause_before_retry(&self, _attempt: u32) {}
}

/// Static facts about the models used in the original study. Display only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelInfo {
    pub model: &'static str,
    pub label: &'static str,
    pub provider: HostedKind,
    pub parameters: Option<&'static str>,
    pub context_tokens: Option<u32>,
}

pub const KNOWN_MODELS: [ModelInfo; 3] = [
    ModelInfo {
        model: "gpt-3.5-turbo",
        label: "GPT-3.5",
        provider: HostedKind::OpenAi,
        parameters: None,
        context_tokens: None,
    },
    ModelInfo {
        model: "gpt-4o",
        label: "GPT-4",
        provider: HostedKind::OpenAi,
        parameters: None,
        context_tokens: None,
    },
    ModelInfo {
        model: "llama-3-70b-8192",
        label: "Llama-3",
        provider: HostedKind::Groq,
        parameters: Some("70B"),
        context_tokens: Some(8192),
    },
];

pub fn model_info(model: &str) -> Option<&'static ModelInfo> {
    KNOWN_MODELS.iter().find(|m| m.model == model)
}

fn default_temperature() -> f64 {
    0.7
}
fn default_max_retries() -> u32 {
    2
}
fn default_n() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    pub model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_n")]
    pub n: u32,
    /// Guard on system + user prompt length, in characters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_prompt_chars: Option<usize>,
}

impl LlmSettings {
    pub fn new(model: &str) -> Self {
        Self {
            model: model.to_string(),
            temperature: default_temperature(),
            max_retries: default_max_retries(),
            n: default_n(),
            max_prompt_chars: None,
        }
    }

    pub fn gpt_35_turbo() -> Self {
        Self::new("gpt-3.5-turbo")
    }

    pub fn gpt_4o() -> Self {
        Self::new("gpt-4o")
    }

    pub fn llama_3_70b() -> Self {
        Self::new("llama-3-70b-8192")
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.model.trim().is_empty() {
            return Err(LlmError::InvalidSettings("model name is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidSettings(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.n < 1 {
            return Err(LlmError::InvalidSettings("n must be at least 1".into()));
        }
        Ok(())
    }
}

/// One request/answer pair as seen by the chains.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatExchange {
    pub system_prompt: String,
    pub user_prompt: String,
    /// Exactly as returned; not trimmed.
    pub response_text: String,
    #[serde(rename = "latency_ms", serialize_with = "as_millis")]
    pub latency: Duration,
    pub provider: String,
    pub attempts: u32,
}

fn as_millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u64(d.as_millis() as u64)
}

/// Provider calls left for one logical request, shared across transport
/// retries and any higher-level re-asks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallBudget {
    remaining: u32,
    used: u32,
}

impl CallBudget {
    pub fn new(calls: u32) -> Self {
        Self {
            remaining: calls,
            used: 0,
        }
    }

    pub fn for_settings(settings: &LlmSettings) -> Self {
        Self::new(1 + settings.max_retries)
    }

    pub fn remaining(&self) -> u32 {
        self.remaining
    }

    pub fn used(&self) -> u32 {
        self.used
    }

    fn take(&mut self) -> bool {
        if self.remaining == 0 {
            return false;
        }
        self.remaining -= 1;
        self.used += 1;
        true
    }
}

/// Send one chat request, retrying transport and malformed-response failures
/// up to `settings.max_retries` times.
pub fn complete(
    provider: &dyn ChatProvider,
    settings: &LlmSettings,
    system: &str,
    user: &str,
) -> Result<ChatExchange, LlmError> {
    let mut budget = CallBudget::for_settings(settings);
    complete_within(provider, settings, system, user, &mut budget)
}

/// Like [`complete`], drawing calls from a caller-owned budget.
pub fn complete_within(
    provider: &dyn ChatProvider,
    settings: &LlmSettings,
    system: &str,
    user: &str,
    budget: &mut CallBudget,
) -> Result<ChatExchange, LlmError> {
    settings.validate()?;
    if let Some(max) = settings.max_prompt_chars {
        let len = system.chars().count() + user.chars().count();
        if len > max {
            return Err(LlmError::PromptTooLong { len, max });
        }
    }

    let request = ChatRequest::new(settings, system, user);
    let started = Instant::now();
    let mut attempts = 0u32;
    let mut last_error = String::from("no call budget left");
    while budget.take() {
        attempts += 1;
        if attempts > 1 {
            provider.pause_before_retry(attempts - 1);
        }
        match provider.send(&request) {
            Ok(text) => {
                return Ok(ChatExchange {
                    system_prompt: system.to_string(),
                    user_prompt: user.to_string(),
                    response_text: text,
                    latency: started.elapsed(),
                    provider: provider.name().to_string(),
                    attempts,
                });
            }
            Err(ProviderError::Retryable(m)) | Err(ProviderError::Malformed(m)) => {
                log::debug!("{}: attempt {attempts} failed: {m}", provider.name());
                last_error = m;
            }
            Err(ProviderError::Auth(m)) => return Err(LlmError::ProviderAuth(m)),
            Err(ProviderError::Refusal(m)) => return Err(LlmError::ProviderRefusal(m)),
            Err(ProviderError::ScriptExhausted(m)) => return Err(LlmError::ScriptExhausted(m)),
        }
    }
    Err(LlmError::ExhaustedRetries {
        attempts,
        last_error,
    })
}
