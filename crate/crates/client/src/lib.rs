//! Recording client for OpenAI-compatible completions endpoints.
//!
//! Produces the trace JSONL and pass-rate CSV consumed by the analysis
//! pipeline. Two modes: free sampling with per-step top-k logprobs, and
//! teacher-forced scoring of a fixed token sequence (prompt echo). Runs are
//! resumable through a manifest file, and persisted record order depends only
//! on (prompt id, sample index), never on completion order.
//!
//! No analysis depends on a live external model; the bundled [`stub`] server
//! speaks the same wire format for tests and offline pipelines.

pub mod client;
pub mod config;
pub mod manifest;
pub mod stub;
pub mod wire;

pub use client::{record_samples, score_sequence, RecordOutcome};
pub use config::EndpointConfig;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("network: {0}")]
    Network(String),

    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("unsupported endpoint: {0}")]
    Unsupported(String),

    #[error("malformed response: {0}")]
    Response(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] screenlab_core::Error),
}

pub type Result<T> = std::result::Result<T, ClientError>;
