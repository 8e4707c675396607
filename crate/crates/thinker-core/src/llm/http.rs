use super::types::{ChatBackend, ChatMessage, Completion, GatewayError, GenParams, TokenProb};
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Environment variable holding the bearer token sent with every request.
pub const TOKEN_ENV: &str = "THINKER_LLM_TOKEN";

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
const TRANSPORT_RETRIES: usize = 2;

/// Client for a chat-completion service speaking the engine's wire format:
/// POST of `{model, messages, max_tokens, temperature, stop, logprobs}`
/// answered by `{text, tokens?}`.
#[derive(Debug)]
pub struct HttpBackend {
    endpoint: String,
    model: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    max_tokens: u32,
    temperature: f64,
    stop: &'a [String],
    logprobs: bool,
}

#[derive(Deserialize)]
struct WireReply {
    text: String,
    #[serde(default)]
    tokens: Option<Vec<WireToken>>,
}

#[derive(Deserialize)]
struct WireToken {
    text: String,
    prob: f64,
}

impl HttpBackend {
    /// Builds a client for `endpoint`, reading the bearer token from the
    /// `THINKER_LLM_TOKEN` environment variable if present.
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Result<Self, GatewayError> {
        Self::with_timeout(endpoint, model, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Unavailable(e.to_string()))?;
        Ok(HttpBackend {
            endpoint: endpoint.into(),
            model: model.into(),
            token: std::env::var(TOKEN_ENV).ok(),
            client,
        })
    }

    fn send(&self, body: &WireRequest<'_>) -> Result<reqwest::blocking::Response, GatewayError> {
        let mut last_err = None;
        for _ in 0..=TRANSPORT_RETRIES {
            let mut request = self.client.post(&self.endpoint).json(body);
            if let Some(token) = &self.token {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Ok(response) => return Ok(response),
                Err(e) if e.is_timeout() => {
                    return Err(GatewayError::Timeout(DEFAULT_TIMEOUT));
                }
                // Transport-level failures may be transient; retry.
                Err(e) => last_err = Some(e),
            }
        }
        Err(GatewayError::Unavailable(
            last_err.expect("loop ran at least once").to_string(),
        ))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &GenParams,
    ) -> Result<Completion, GatewayError> {
        let body = WireRequest {
            model: &self.model,
            messages,
            max_tokens: params.max_tokens,
            temperature: params.temperature,
            stop: &params.stop,
            logprobs: params.logprobs,
        };
        let response = self.send(&body)?;
        let status = response.status();
        if !status.is_success() {
            let detail = response.text().unwrap_or_default();
            return Err(GatewayError::Protocol(format!(
                "service returned {status}: {}",
                detail.chars().take(200).collect::<String>()
            )));
        }
        let reply: WireReply = response
            .json()
            .map_err(|e| GatewayError::Protocol(format!("undecodable reply: {e}")))?;
        let token_probs = match reply.tokens {
            Some(tokens) => {
                if let Some(bad) = tokens.iter().find(|t| !(0.0..=1.0).contains(&t.prob)) {
                    return Err(GatewayError::Protocol(format!(
                        "token probability {} outside [0, 1]",
                        bad.prob
                    )));
                }
                Some(
                    tokens
                        .into_iter()
                        .map(|t| TokenProb { text: t.text, prob: t.prob })
                        .collect(),
                )
            }
            None => None,
        };
        Ok(Completion { text: reply.text, token_probs })
    }
}
