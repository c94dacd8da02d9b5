//! HTTP chat-completion client speaking the common chat wire format:
//! JSON body with a model name and [system, user] messages, bearer-token
//! auth, response text taken from the first choice's message content.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::prompts::RenderedPrompt;
use crate::runner::{ChatClient, ChatError, RunnerError};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Remote chat backend. Temperature is fixed at 0 so classifications are as
/// reproducible as the hosted model allows. The API key comes from the
/// environment only — never from config files or flags.
#[derive(Debug, Clone)]
pub struct RemoteChatClient {
    endpoint: String,
    model: String,
    api_key: String,
    temperature: f64,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl RemoteChatClient {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
    ) -> Result<RemoteChatClient, RunnerError> {
        Self::with_timeout(endpoint, model, api_key, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
        timeout: Duration,
    ) -> Result<RemoteChatClient, RunnerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| RunnerError::Config(format!("HTTP client construction failed: {e}")))?;
        Ok(RemoteChatClient {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            temperature: 0.0,
            client,
        })
    }

    /// Builds a client whose key is read from `env_var`; fails fast (before
    /// any network activity) when the variable is unset or empty.
    pub fn from_env(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        env_var: &str,
    ) -> Result<RemoteChatClient, RunnerError> {
        match std::env::var(env_var) {
            Ok(key) if !key.is_empty() => RemoteChatClient::new(endpoint, model, key),
            _ => Err(RunnerError::MissingApiKey(env_var.to_string())),
        }
    }
}

impl ChatClient for RemoteChatClient {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String, ChatError> {
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": self.temperature,
        });
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| ChatError::transient(format!("chat request failed: {e}")))?;

        let status = response.status();
        if !status.is_success() {
            let snippet: String = response
                .text()
                .unwrap_or_default()
                .chars()
                .take(200)
                .collect();
            let retryable = status.as_u16() == 429 || status.is_server_error();
            let error = ChatError {
                message: format!("chat endpoint returned {status}: {snippet}"),
                retryable,
            };
            return Err(error);
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| ChatError::permanent(format!("malformed chat response: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| ChatError::permanent("chat response contained no choices"))?;
        Ok(choice.message.content)
    }
}
