use serde::{Deserialize, Serialize};

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
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// One generated token with the probability the model assigned it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProb {
    pub text: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    /// Per-token probabilities covering `text` in order; `None` when the
    /// backend was not asked for them or cannot supply them.
    pub token_probs: Option<Vec<TokenProb>>,
}

impl Completion {
    pub fn text_only(text: impl Into<String>) -> Self {
        Completion { text: text.into(), token_probs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
    /// Request per-token probabilities with the completion.
    pub logprobs: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { max_tokens: 1024, temperature: 0.0, stop: Vec::new(), logprobs: false }
    }
}

impl GenParams {
    pub fn with_logprobs(mut self) -> Self {
        self.logprobs = true;
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("request timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("script exhausted: no remaining entry matches the request")]
    ScriptExhausted,
}

/// A synchronous chat-completion backend. `messages` is the full conversation
/// so far; implementations must not retain state between calls beyond their
/// own bookkeeping.
pub trait ChatBackend: Send + Sync {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenParams,
    ) -> Result<Completion, GatewayError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenParams,
    ) -> Result<Completion, GatewayError> {
        (**self).complete(messages, params)
    }
}

/// Splits text into pseudo-token pieces that concatenate back to the input:
/// each maximal whitespace run is glued onto the following piece, mirroring
/// how common tokenizers attach leading spaces. Used to pair bare per-token
/// probability lists with completion text.
pub fn segment_text(text: &str) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut current = String::new();
    let mut in_word = false;
    for c in text.chars() {
        if c.is_whitespace() {
            if in_word && !current.is_empty() {
                pieces.push(std::mem::take(&mut current));
            }
            in_word = false;
        } else {
            in_word = true;
        }
        current.push(c);
    }
    if !current.is_empty() {
        match pieces.last_mut() {
            // Trailing whitespace extends the final piece rather than
            // forming a text-free token.
            Some(last) if current.chars().all(char::is_whitespace) => last.push_str(&current),
            _ => pieces.push(current),
        }
    }
    pieces
}
