//! OpenAI-compatible chat-completions codec, shared by every hosted provider.

use serde::Serialize;
use serde_json::Value;

use super::{LlmSettings, ProviderError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Field order here is the wire order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub n: u32,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn new(settings: &LlmSettings, system: &str, user: &str) -> Self {
        Self {
            model: settings.model.clone(),
            temperature: settings.temperature,
            n: settings.n,
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: system.into(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: user.into(),
                },
            ],
        }
    }

    pub fn system(&self) -> &str {
        self.message("system")
    }

    pub fn user(&self) -> &str {
        self.message("user")
    }

    fn message(&self, role: &str) -> &str {
        self.messages
            .iter()
            .find(|m| m.role == role)
            .map_or("", |m| m.content.as_str())
    }
}

/// Request body bytes. Deterministic for fixed inputs.
pub fn wire_encode(settings: &LlmSettings, system: &str, user: &str) -> Vec<u8> {
    serde_json::to_vec(&ChatRequest::new(settings, system, user)).expect("plain data serializes")
}

/// Pull `choices[0].message.content` out of a response body.
///
/// Error objects are classified by status: 401/403 are auth failures, 408,
/// 409, 429 and 5xx are retryable, anything else is a refusal.
pub fn wire_decode(status: u16, body: &[u8]) -> Result<String, ProviderError> {
    let parsed: Result<Value, _> = serde_json::from_slice(body);

    let error_message = match &parsed {
        Ok(v) => v.get("error").map(|e| {
            e.get("message")
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| e.to_string())
        }),
        Err(_) => None,
    };

    if error_message.is_some() || !(200..300).contains(&status) {
        let message = error_message.unwrap_or_else(|| {
            let text = String::from_utf8_lossy(body);
            format!("HTTP {status}: {}", text.chars().take(200).collect::<String>())
        });
        return Err(match status {
            401 | 403 => ProviderError::Auth(message),
            408 | 409 | 429 | 500..=599 => ProviderError::Retryable(message),
            _ => ProviderError::Refusal(message),
        });
    }

    let value = parsed.map_err(|e| ProviderError::Malformed(e.to_string()))?;
    value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_gpt4o_settings() {
        let body = String::from_utf8(wire_encode(&LlmSettings::gpt_4o(), "S", "U")).unwrap();
        assert_eq!(
            body,
            r#"{"model":"gpt-4o","temperature":0.7,"n":1,"messages":[{"role":"system","content":"S"},{"role":"user","content":"U"}]}"#
        );
    }

    #[test]
    fn encodes_llama_and_temperature_override() {
        let body = String::from_utf8(wire_encode(&LlmSettings::llama_3_70b(), "S", "U")).unwrap();
        assert!(body.contains(r#""model":"llama-3-70b-8192""#));
        let mut cold = LlmSettings::gpt_35_turbo();
        cold.temperature = 0.0;
        let body = String::from_utf8(wire_encode(&cold, "S", "U")).unwrap();
        assert!(body.contains(r#""temperature":0.0"#));
        assert!(body.contains(r#""model":"gpt-3.5-turbo""#));
    }

    #[test]
    fn encoding_is_byte_stable() {
        let a = wire_encode(&LlmSettings::gpt_4o(), "sys \"q\"", "বাস দুর্ঘটনা\n");
        let b = wire_encode(&LlmSettings::gpt_4o(), "sys \"q\"", "বাস দুর্ঘটনা\n");
        assert_eq!(a, b);
    }

    #[test]
    fn decodes_first_choice_verbatim() {
        let body = br#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"  Specific\n"}},{"index":1,"message":{"content":"General"}}]}"#;
        assert_eq!(wire_decode(200, body).unwrap(), "  Specific\n");
    }

    #[test]
    fn classifies_errors() {
        let rate = br#"{"error":{"message":"rate limit"}}"#;
        assert_eq!(wire_decode(429, rate), Err(ProviderError::Retryable("rate limit".into())));
        let auth = br#"{"error":{"message":"Incorrect API key provided"}}"#;
        assert!(matches!(wire_decode(401, auth), Err(ProviderError::Auth(_))));
        let bad = br#"{"error":{"message":"model not found"}}"#;
        assert!(matches!(wire_decode(404, bad), Err(ProviderError::Refusal(_))));
        assert!(matches!(wire_decode(502, b"<html>bad gateway</html>"), Err(ProviderError::Retryable(_))));
    }

    #[test]
    fn malformed_bodies() {
        assert!(matches!(wire_decode(200, br#"{"choices":[{"message":{"content":"#), Err(ProviderError::Malformed(_))));
        assert!(matches!(wire_decode(200, br#"{"choices":[]}"#), Err(ProviderError::Malformed(_))));
        assert!(matches!(wire_decode(200, br#"{"choices":[{"message":{"content":5}}]}"#), Err(ProviderError::Malformed(_))));
    }
}
