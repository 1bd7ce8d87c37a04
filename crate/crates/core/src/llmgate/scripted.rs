//! Deterministic stand-in provider that replays canned answers.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailKind {
    Transient,
    Auth,
    Refusal,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptStep {
    Reply(String),
    Fail(FailKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Every string must occur in the user prompt. Empty matches anything.
    #[serde(default)]
    pub when: Vec<String>,
    pub steps: Vec<ScriptStep>,
    /// Keep answering with the last step once the others are used up.
    #[serde(default)]
    pub repeat: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub rules: Vec<ScriptRule>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedCall {
    pub system: String,
    pub user: String,
}

/// Rules are tried in order; the first one that matches the user prompt and
/// still has a step left answers. A rule with used-up steps is skipped, so
/// later rules can act as fallbacks. No applicable rule is
/// [`ProviderError::ScriptExhausted`].
///
/// Each rule advances its own cursor, so scripts meant for concurrent runs
/// should key rules on text unique to one prompt.
pub struct ScriptedProvider {
    name: String,
    rules: Vec<ScriptRule>,
    cursors: Mutex<Vec<usize>>,
    calls: Mutex<Vec<RecordedCall>>,
}

impl ScriptedProvider {
    pub fn new(script: Script) -> Self {
        let n = script.rules.len();
        Self {
            name: "scripted".into(),
            rules: script.rules,
            cursors: Mutex::new(vec![0; n]),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes).map(Self::new)
    }

    pub fn calls(&self) -> Vec<RecordedCall> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl Script {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reply(mut self, when: &str, text: &str) -> Self {
        self.rules.push(ScriptRule {
            when: vec![when.to_string()],
            steps: vec![ScriptStep::Reply(text.to_string())],
            repeat: false,
        });
        self
    }

    pub fn steps(mut self, when: &[&str], steps: Vec<ScriptStep>, repeat: bool) -> Self {
        self.rules.push(ScriptRule {
            when: when.iter().map(|s| s.to_string()).collect(),
            steps,
            repeat,
        });
        self
    }
}

impl ChatProvider for ScriptedProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn send(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let user = request.user();
        self.calls.lock().unwrap().push(RecordedCall {
            system: request.system().to_string(),
            user: user.to_string(),
        });

        let mut cursors = self.cursors.lock().unwrap();
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.steps.is_empty() || !rule.when.iter().all(|w| user.contains(w.as_str())) {
                continue;
            }
            let cursor = cursors[i];
            let step = if cursor < rule.steps.len() {
                &rule.steps[cursor]
            } else if rule.repeat {
                rule.steps.last().unwrap()
            } else {
                continue;
            };
            cursors[i] += 1;
            return match step {
                ScriptStep::Reply(text) => Ok(text.clone()),
                ScriptStep::Fail(FailKind::Transient) => {
                    Err(ProviderError::Retryable("scripted transient failure".into()))
                }
                ScriptStep::Fail(FailKind::Auth) => {
                    Err(ProviderError::Auth("scripted auth failure".into()))
                }
                ScriptStep::Fail(FailKind::Refusal) => {
                    Err(ProviderError::Refusal("scripted refusal".into()))
                }
                ScriptStep::Fail(FailKind::Malformed) => {
                    Err(ProviderError::Malformed("scripted malformed response".into()))
                }
            };
        }
        let excerpt: String = user.chars().take(80).collect();
        Err(ProviderError::ScriptExhausted(excerpt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmgate::LlmSettings;

    fn ask(p: &ScriptedProvider, user: &str) -> Result<String, ProviderError> {
        p.send(&ChatRequest::new(&LlmSettings::gpt_4o(), "sys", user))
    }

    #[test]
    fn first_matching_rule_answers() {
        let p = ScriptedProvider::new(
            Script::new()
                .reply("April only", "General")
                .reply("", "Specific"),
        );
        assert_eq!(ask(&p, "total number of accidents in April only").unwrap(), "General");
        assert_eq!(ask(&p, "bus hits van").unwrap(), "Specific");
        assert_eq!(p.call_count(), 2);
        assert_eq!(p.calls()[0].system, "sys");
    }

    #[test]
    fn unmatched_prompt_is_exhausted() {
        let p = ScriptedProvider::new(Script::new().reply("April only", "General"));
        assert!(matches!(ask(&p, "something else"), Err(ProviderError::ScriptExhausted(_))));
    }

    #[test]
    fn steps_are_consumed_and_fall_through() {
        let p = ScriptedProvider::new(
            Script::new()
                .steps(&["x"], vec![ScriptStep::Fail(FailKind::Transient), ScriptStep::Reply("a".into())], false)
                .reply("x", "fallback"),
        );
        assert!(matches!(ask(&p, "x"), Err(ProviderError::Retryable(_))));
        assert_eq!(ask(&p, "x").unwrap(), "a");
        assert_eq!(ask(&p, "x").unwrap(), "fallback");
        assert!(ask(&p, "x").is_err());
    }

    #[test]
    fn repeat_keeps_last_step() {
        let p = ScriptedProvider::new(Script::new().steps(&[], vec![ScriptStep::Fail(FailKind::Transient)], true));
        for _ in 0..5 {
            assert!(matches!(ask(&p, "q"), Err(ProviderError::Retryable(_))));
        }
    }

    #[test]
    fn script_json_shape() {
        let json = r#"{"rules":[
            {"when":["Classify","Bus"],"steps":[{"reply":"Specific"}]},
            {"steps":[{"fail":"transient"},{"reply":"General"}],"repeat":true}
        ]}"#;
        let p = ScriptedProvider::from_json(json.as_bytes()).unwrap();
        assert_eq!(ask(&p, "Classify: Bus crash").unwrap(), "Specific");
        assert!(ask(&p, "Classify: Bus crash").is_err());
        assert_eq!(ask(&p, "anything").unwrap(), "General");
        assert_eq!(ask(&p, "anything").unwrap(), "General");
    }
}
