//! Completions wire format: the subset of the OpenAI-style completions
//! schema this toolkit uses (model, prompt, temperature, top_p, n, logprobs,
//! echo, max_tokens, seed).
//!
//! Traces carry integer token ids and no tokenizer logic, so the endpoint
//! must report tokens in id form. Both the vLLM-style `"token_id:123"`
//! spelling and a bare `"123"` are accepted.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{ClientError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PromptPayload {
    Text(String),
    TokenIds(Vec<i64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: PromptPayload,
    pub temperature: f64,
    pub top_p: f64,
    pub n: usize,
    pub logprobs: usize,
    pub echo: bool,
    pub max_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub choices: Vec<Choice>,
    #[serde(default)]
    pub model: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Choice {
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub index: usize,
    #[serde(default)]
    pub logprobs: Option<LogProbs>,
    #[serde(default)]
    pub finish_reason: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct LogProbs {
    pub tokens: Vec<String>,
    pub token_logprobs: Vec<Option<f64>>,
    pub top_logprobs: Vec<Option<HashMap<String, f64>>>,
    #[serde(default)]
    pub text_offset: Vec<usize>,
}

/// Parse a reported token into its id.
pub fn parse_token_id(token: &str) -> Result<i64> {
    let digits = token.strip_prefix("token_id:").unwrap_or(token);
    digits.parse().map_err(|_| {
        ClientError::Unsupported(format!(
            "endpoint reports tokens as text ('{token}'); id-form logprobs are required"
        ))
    })
}

pub fn format_token_id(id: i64) -> String {
    format!("token_id:{id}")
}

/// Sorted (token_id, logprob) list from one position's top-logprobs map,
/// descending by logprob with ids breaking ties.
pub fn topk_from_map(map: &HashMap<String, f64>) -> Result<Vec<(i64, f64)>> {
    let mut topk = map
        .iter()
        .map(|(tok, &lp)| Ok((parse_token_id(tok)?, lp)))
        .collect::<Result<Vec<(i64, f64)>>>()?;
    topk.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(topk)
}
