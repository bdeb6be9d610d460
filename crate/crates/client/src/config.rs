use serde::{Deserialize, Serialize};

use crate::{ClientError, Result};

/// Connection and sampling settings for one recording run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub top_p: f64,
    pub n_samples: usize,
    pub logprobs_top_k: usize,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Name of the environment variable holding the bearer token; secrets
    /// never live in config files.
    pub auth_env: Option<String>,
    /// Bounded concurrent request pool.
    pub concurrency: usize,
    pub max_generation_tokens: usize,
    /// Base backoff in milliseconds (doubles per attempt, with jitter).
    pub backoff_base_ms: u64,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model_name: model_name.into(),
            temperature: 1.0,
            top_p: 0.95,
            n_samples: 200,
            logprobs_top_k: 20,
            timeout_secs: 60,
            max_retries: 5,
            auth_env: None,
            concurrency: 4,
            max_generation_tokens: 1024,
            backoff_base_ms: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ClientError::Unsupported(format!(
                "top_p = {} outside (0, 1]",
                self.top_p
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(ClientError::Unsupported(format!(
                "temperature = {} must be positive",
                self.temperature
            )));
        }
        if self.n_samples == 0 {
            return Err(ClientError::Unsupported("n_samples must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(ClientError::Unsupported("concurrency must be at least 1".into()));
        }
        Ok(())
    }

    pub fn auth_token(&self) -> Option<String> {
        self.auth_env
            .as_ref()
            .and_then(|name| std::env::var(name).ok())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/v1/completions", self.base_url.trim_end_matches('/'))
    }
}
