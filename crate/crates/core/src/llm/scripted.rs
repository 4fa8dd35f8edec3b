//! Scripted replay backend.

use std::collections::BTreeMap;
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{ChatBackend, ChatRequest, LlmError};

/// Hex SHA-256 of a prompt, the key of keyed scripts.
pub fn prompt_key(prompt: &str) -> String {
    Sha256::digest(prompt.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug)]
enum Script {
    Sequential { answers: Vec<String>, next: Mutex<usize> },
    Keyed(BTreeMap<String, String>),
}

/// Replays a fixed script: either answers in order, or answers keyed by the
/// hash of the final user message.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: Script,
}

impl ScriptedBackend {
    pub fn sequential(answers: Vec<String>) -> Self {
        Self { script: Script::Sequential { answers, next: Mutex::new(0) } }
    }

    pub fn keyed(answers: BTreeMap<String, String>) -> Self {
        Self { script: Script::Keyed(answers) }
    }

    /// Loads a script file: a JSON array (sequential) or object (keyed).
    pub fn from_json(text: &str) -> Result<Self, String> {
        match serde_json::from_str::<serde_json::Value>(text).map_err(|e| e.to_string())? {
            serde_json::Value::Array(_) => Ok(Self::sequential(serde_json::from_str(text).map_err(|e| e.to_string())?)),
            serde_json::Value::Object(_) => Ok(Self::keyed(serde_json::from_str(text).map_err(|e| e.to_string())?)),
            _ => Err("script must be a JSON array or object of strings".to_string()),
        }
    }

    /// Number of sequential answers already served.
    pub fn consumed(&self) -> usize {
        match &self.script {
            Script::Sequential { next, .. } => *next.lock().unwrap_or_else(|e| e.into_inner()),
            Script::Keyed(_) => 0,
        }
    }
}

impl ChatBackend for ScriptedBackend {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.validate()?;
        match &self.script {
            Script::Sequential { answers, next } => {
                let mut next = next.lock().unwrap_or_else(|e| e.into_inner());
                let answer = answers.get(*next).cloned().ok_or(LlmError::ScriptExhausted)?;
                *next += 1;
                Ok(answer)
            }
            Script::Keyed(map) => map.get(&prompt_key(request.last_user_message())).cloned().ok_or(LlmError::ScriptExhausted),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ChatMessage, Role};

    fn req(text: &str) -> ChatRequest {
        ChatRequest {
            messages: vec![ChatMessage::new(Role::User, text)],
            temperature: 0.0,
            max_answer_tokens: 10,
            model_name: "m".into(),
        }
    }

    #[test]
    fn sequential_then_exhausted() {
        let b = ScriptedBackend::from_json(r#"["Operation: \"Click\". Widget: \"Add\"."]"#).unwrap();
        assert_eq!(b.chat(&req("x")).unwrap(), "Operation: \"Click\". Widget: \"Add\".");
        assert_eq!(b.chat(&req("x")), Err(LlmError::ScriptExhausted));
    }

    #[test]
    fn keyed_by_prompt_hash() {
        // sha256("abc") from FIPS 180-2 appendix B.1
        assert_eq!(prompt_key("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let b = ScriptedBackend::from_json(&format!(r#"{{"{}": "hi"}}"#, prompt_key("abc"))).unwrap();
        assert_eq!(b.chat(&req("abc")).unwrap(), "hi");
        assert_eq!(b.chat(&req("abd")), Err(LlmError::ScriptExhausted));
        assert!(ScriptedBackend::from_json("3").is_err());
    }

    #[test]
    fn replay_is_reproducible() {
        let script: Vec<String> = (0..5).map(|i| format!("a{i}")).collect();
        let run = || {
            let b = ScriptedBackend::sequential(script.clone());
            (0..6).map(|i| b.chat(&req(&i.to_string()))).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
