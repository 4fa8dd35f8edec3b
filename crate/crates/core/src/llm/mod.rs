//! Chat backends: a remote OpenAI-compatible endpoint, scripted replay, a
//! deterministic heuristic oracle and a uniform-random baseline.

mod http;
mod monkey;
mod oracle;
mod scripted;

pub use http::{HttpBackend, HttpConfig, DEFAULT_API_KEY_ENV};
pub use monkey::RandomBackend;
pub use oracle::{generate_content, HeuristicOracle};
pub use scripted::{prompt_key, ScriptedBackend};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptDocument;

/// Fixed system message sent with every query.
pub const SYSTEM_PROMPT: &str = "You are an expert mobile app tester.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("scripted answers exhausted")]
    ScriptExhausted,
    #[error("rate limited by backend")]
    RateLimited,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self { role, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_answer_tokens: u32,
    pub model_name: String,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        match self.messages.last() {
            None => Err(LlmError::InvalidRequest("no messages".into())),
            Some(m) if m.role != Role::User => Err(LlmError::InvalidRequest("last message must be from the user".into())),
            Some(_) if !(0.0..=2.0).contains(&self.temperature) => {
                Err(LlmError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)))
            }
            Some(_) => Ok(()),
        }
    }

    /// Content of the final user message.
    pub fn last_user_message(&self) -> &str {
        self.messages.last().map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSettings {
    pub temperature: f64,
    pub max_answer_tokens: u32,
    pub model_name: String,
}

impl Default for RequestSettings {
    fn default() -> Self {
        Self { temperature: 0.2, max_answer_tokens: 256, model_name: "gpt-3.5-turbo".to_string() }
    }
}

/// Frames one query: the system message, optionally the earlier
/// (prompt, answer) turns, then the prompt document as the user message.
pub fn frame_request(doc: &PromptDocument, history: &[(String, String)], settings: &RequestSettings) -> ChatRequest {
    let mut messages = vec![ChatMessage::new(Role::System, SYSTEM_PROMPT)];
    for (prompt, answer) in history {
        messages.push(ChatMessage::new(Role::User, prompt.clone()));
        messages.push(ChatMessage::new(Role::Assistant, answer.clone()));
    }
    messages.push(ChatMessage::new(Role::User, doc.rendered.clone()));
    ChatRequest {
        messages,
        temperature: settings.temperature,
        max_answer_tokens: settings.max_answer_tokens,
        model_name: settings.model_name.clone(),
    }
}

/// A chat model. Backends may be shared between sessions.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).chat(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn chat(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).chat(request)
    }
}
