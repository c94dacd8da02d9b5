//! HTTP embedding provider speaking the common embeddings wire format.

use serde::Deserialize;

use crate::retry::RetryPolicy;

use super::{EmbeddingError, EmbeddingProvider, EmbeddingVector};

/// Remote embedding endpoint. Requests are
/// `POST {"input": [texts...], "model": name}` with a bearer token; the
/// response carries one vector per input under `data[i].embedding`.
/// Transport failures and 429/5xx statuses are retried with exponential
/// backoff before giving up.
pub struct RemoteEmbeddingProvider {
    id: String,
    endpoint: String,
    model: String,
    api_key: String,
    dimension: usize,
    retry: RetryPolicy,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingData>,
}

#[derive(Deserialize)]
struct EmbeddingData {
    embedding: Vec<f64>,
}

impl RemoteEmbeddingProvider {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
        dimension: usize,
    ) -> RemoteEmbeddingProvider {
        let endpoint = endpoint.into();
        let model = model.into();
        RemoteEmbeddingProvider {
            id: format!("remote-{model}"),
            endpoint,
            model,
            api_key: api_key.into(),
            dimension,
            retry: RetryPolicy::default(),
            client: reqwest::blocking::Client::new(),
        }
    }

    /// Reads the API key from `env_var`; fails fast when it is unset so no
    /// request ever leaves without credentials.
    pub fn from_env(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        env_var: &str,
        dimension: usize,
    ) -> Result<RemoteEmbeddingProvider, EmbeddingError> {
        let api_key = std::env::var(env_var)
            .ok()
            .filter(|key| !key.is_empty())
            .ok_or_else(|| EmbeddingError::MissingApiKey(env_var.to_string()))?;
        Ok(Self::new(endpoint, model, api_key, dimension))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> RemoteEmbeddingProvider {
        self.retry = retry;
        self
    }

    /// One request. `Err((message, retryable))`: transport failures and
    /// 429/5xx responses are retryable, other statuses are not.
    fn request_once(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, (String, bool)> {
        let body = serde_json::json!({ "input": texts, "model": self.model });
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| (e.to_string(), true))?;
        let status = response.status();
        if !status.is_success() {
            let retryable = status.as_u16() == 429 || status.is_server_error();
            return Err((format!("endpoint returned status {status}"), retryable));
        }
        let parsed: EmbeddingResponse = response.json().map_err(|e| (e.to_string(), true))?;
        parsed
            .data
            .into_iter()
            .map(|d| EmbeddingVector::new(d.embedding).map_err(|e| (e.to_string(), false)))
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbeddingProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.request_once(texts) {
                Ok(vectors) => {
                    if vectors.len() != texts.len() {
                        return Err(EmbeddingError::CountMismatch {
                            expected: texts.len(),
                            got: vectors.len(),
                        });
                    }
                    for vector in &vectors {
                        if vector.dimension() != self.dimension {
                            return Err(EmbeddingError::DimensionMismatch {
                                expected: self.dimension,
                                actual: vector.dimension(),
                            });
                        }
                    }
                    return Ok(vectors);
                }
                Err((message, retryable)) => {
                    if !retryable || attempts >= self.retry.max_attempts {
                        return Err(EmbeddingError::Transport { attempts, message });
                    }
                    self.retry.wait_after(attempts);
                }
            }
        }
    }
}
