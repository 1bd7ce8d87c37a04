use std::fmt;
use std::time::Duration;

use super::{wire_decode, ChatProvider, ChatRequest, LlmError, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HostedKind {
    OpenAi,
    Groq,
}

impl HostedKind {
    pub fn env_var(self) -> &'static str {
        match self {
            HostedKind::OpenAi => "OPENAI_API_KEY",
            HostedKind::Groq => "GROQ_API_KEY",
        }
    }

    pub fn default_base_url(self) -> &'static str {
        match self {
            HostedKind::OpenAi => "https://api.openai.com/v1",
            HostedKind::Groq => "https://api.groq.com/openai/v1",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HostedKind::OpenAi => "openai",
            HostedKind::Groq => "groq",
        }
    }
}

/// Secret key. Never printed.
#[derive(Clone)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

/// Chat-completions client for an OpenAI-compatible HTTP endpoint.
#[derive(Debug)]
pub struct HostedProvider {
    kind: HostedKind,
    base_url: String,
    key: ApiKey,
    client: reqwest::blocking::Client,
    timeout: Duration,
    retry_pause: Duration,
}

impl HostedProvider {
    pub fn new(kind: HostedKind, key: ApiKey, base_url: Option<&str>) -> Result<Self, LlmError> {
        if key.expose().trim().is_empty() {
            return Err(LlmError::ProviderAuth(format!("{} is empty", kind.env_var())));
        }
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::InvalidSettings(e.to_string()))?;
        Ok(Self {
            kind,
            base_url: base_url
                .unwrap_or(kind.default_base_url())
                .trim_end_matches('/')
                .to_string(),
            key,
            client,
            timeout: Duration::from_secs(120),
            retry_pause: Duration::from_secs(1),
        })
    }

    /// Read the key from the provider's environment variable.
    pub fn from_env(kind: HostedKind, base_url: Option<&str>) -> Result<Self, LlmError> {
        match std::env::var(kind.env_var()) {
            Ok(key) if !key.trim().is_empty() => Self::new(kind, ApiKey::new(key), base_url),
            _ => Err(LlmError::ProviderAuth(format!("{} is not set", kind.env_var()))),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Base pause before a retry; doubles per attempt.
    pub fn with_retry_pause(mut self, pause: Duration) -> Self {
        self.retry_pause = pause;
        self
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

impl ChatProvider for HostedProvider {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn send(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let body = serde_json::to_vec(request).expect("plain data serializes");
        let response = self
            .client
            .post(self.endpoint())
            .bearer_auth(self.key.expose())
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .timeout(self.timeout)
            .body(body)
            .send()
            .map_err(|e| ProviderError::Retryable(e.without_url().to_string()))?;
        let status = response.status().as_u16();
        let bytes = response
            .bytes()
            .map_err(|e| ProviderError::Retryable(e.without_url().to_string()))?;
        wire_decode(status, &bytes)
    }

    fn pause_before_retry(&self, attempt: u32) {
        let factor = 1u32 << attempt.saturating_sub(1).min(5);
        std::thread::sleep(self.retry_pause * factor);
    }
}
