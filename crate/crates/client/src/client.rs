//! HTTP client: retries with exponential backoff, bounded worker pool,
//! resumable sampling runs, and teacher-forced scoring.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use screenlab_core::trace::{write_trace_jsonl, TraceStep, Variant};
use serde::Serialize;

use crate::config::EndpointConfig;
use crate::manifest::{sanitize, Manifest};
use crate::wire::{
    topk_from_map, CompletionRequest, CompletionResponse, LogProbs, PromptPayload,
};
use crate::{ClientError, Result};

fn build_http(cfg: &EndpointConfig) -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(cfg.timeout_secs))
        .build()
        .map_err(|e| ClientError::Network(e.to_string()))
}

/// Deterministic jitter factor in [0.75, 1.25) for a retry attempt.
fn jitter(attempt: u32) -> f64 {
    let mut z = (attempt as u64).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    0.75 + 0.5 * ((z >> 11) as f64 / (1u64 << 53) as f64)
}

/// POST one completions request, retrying transient failures with
/// exponential backoff; HTTP 429 honors Retry-After.
pub fn post_completion(
    cfg: &EndpointConfig,
    http: &reqwest::blocking::Client,
    request: &CompletionRequest,
) -> Result<CompletionResponse> {
    let url = cfg.completions_url();
    let mut last_error = ClientError::Network("no attempt made".into());
    for attempt in 0..=cfg.max_retries {
        if attempt > 0 {
            let backoff =
                cfg.backoff_base_ms as f64 * 2f64.powi(attempt as i32 - 1) * jitter(attempt);
            std::thread::sleep(Duration::from_millis(backoff as u64));
        }
        let mut builder = http.post(&url).json(request);
        if let Some(token) = cfg.auth_token() {
            builder = builder.bearer_auth(token);
        }
        match builder.send() {
            Err(e) => {
                last_error = ClientError::Network(e.to_string());
            }
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    return resp
                        .json::<CompletionResponse>()
                        .map_err(|e| ClientError::Response(e.to_string()));
                }
                if status.as_u16() == 429 {
                    let retry_after = resp
                        .headers()
                        .get("retry-after")
                        .and_then(|v| v.to_str().ok())
                        .and_then(|v| v.parse::<u64>().ok())
                        .unwrap_or(0);
                    std::thread::sleep(Duration::from_secs(retry_after));
                    last_error = ClientError::Http {
                        status: 429,
                        body: "rate limited".into(),
                    };
                    continue;
                }
                let body = resp.text().unwrap_or_default();
                let err = ClientError::Http {
                    status: status.as_u16(),
                    body,
                };
                if status.is_server_error() {
                    last_error = err;
                    continue;
                }
                return Err(err);
            }
        }
    }
    Err(last_error)
}

fn logprobs_of(response: &CompletionResponse) -> Result<&LogProbs> {
    response
        .choices
        .first()
        .and_then(|c| c.logprobs.as_ref())
        .ok_or_else(|| {
            ClientError::Unsupported("endpoint did not return logprobs; enable them or use a capable server".into())
        })
}

/// Teacher-forced scoring: echo the prompt plus the forced tokens at
/// max_tokens = 0 and read back per-step top-k logprobs for the forced span.
///
/// The chosen token of each step is the arg-max of its top-k, so a forced
/// sequence equal to the greedy continuation has chosen == correct
/// everywhere.
pub fn score_sequence(
    cfg: &EndpointConfig,
    http: &reqwest::blocking::Client,
    pair_id: &str,
    variant: Variant,
    prompt_ids: &[i64],
    forced_ids: &[i64],
) -> Result<Vec<TraceStep>> {
    cfg.validate()?;
    if forced_ids.is_empty() {
        return Err(ClientError::Unsupported("empty forced sequence".into()));
    }
    let mut ids = prompt_ids.to_vec();
    ids.extend_from_slice(forced_ids);
    let request = CompletionRequest {
        model: cfg.model_name.clone(),
        prompt: PromptPayload::TokenIds(ids.clone()),
        temperature: cfg.temperature,
        top_p: cfg.top_p,
        n: 1,
        logprobs: cfg.logprobs_top_k,
        echo: true,
        max_tokens: 0,
        seed: None,
    };
    let response = post_completion(cfg, http, &request)?;
    let logprobs = logprobs_of(&response)?;
    if logprobs.tokens.len() != ids.len() || logprobs.top_logprobs.len() != ids.len() {
        return Err(ClientError::Unsupported(format!(
            "echo returned {} positions for {} prompt tokens; prompt echo support is required",
            logprobs.tokens.len(),
            ids.len()
        )));
    }
    let start = prompt_ids.len();
    let mut steps = Vec::with_capacity(forced_ids.len());
    for (i, &correct) in forced_ids.iter().enumerate() {
        let pos = start + i;
        let Some(map) = logprobs.top_logprobs[pos].as_ref() else {
            return Err(ClientError::Unsupported(format!(
                "no top-logprobs at echoed position {pos}"
            )));
        };
        let topk = topk_from_map(map)?;
        let chosen = topk[0].0;
        steps.push(TraceStep {
            pair_id: pair_id.to_string(),
            variant,
            step_index: i as u64,
            correct_token_id: correct,
            topk,
            chosen_token_id: chosen,
            skip_prefix_flag: false,
        });
    }
    Ok(steps)
}

/// Outcome of a sampling run over one prompt.
#[derive(Clone, Debug, Serialize)]
pub struct RecordOutcome {
    pub prompt_id: String,
    pub requested: usize,
    pub completed: usize,
    /// (sample index, error) for samples that failed after retries.
    pub failed: Vec<(usize, String)>,
    /// Requests actually sent by this invocation (0 on an intact resume).
    pub requests_sent: usize,
}

#[derive(Serialize)]
struct CompletionLine<'a> {
    sample_index: usize,
    text: &'a str,
    finish_reason: &'a str,
    n_steps: usize,
}

/// Sample `cfg.n_samples` completions for one prompt, persisting each sample
/// incrementally and resumably.
///
/// Layout under `out_dir`: `staging/<id>/<idx>.jsonl` per-sample trace
/// records, `manifest/<id>.manifest.json` progress, and after assembly
/// `traces/<id>.jsonl` plus `completions/<id>.jsonl` in sample order.
pub fn record_samples(
    cfg: &EndpointConfig,
    prompt_id: &str,
    prompt_text: &str,
    variant: Variant,
    out_dir: &Path,
    resume: bool,
) -> Result<RecordOutcome> {
    cfg.validate()?;
    let manifest_dir = out_dir.join("manifest");
    let staging_dir = out_dir.join("staging").join(sanitize(prompt_id));
    fs::create_dir_all(&staging_dir)?;
    let manifest = if resume {
        Manifest::load_or_new(&manifest_dir, prompt_id, cfg.n_samples)?
    } else {
        Manifest::new(prompt_id, cfg.n_samples)
    };
    let todo: VecDeque<usize> = manifest.missing().into();
    let requests_planned = todo.len();

    let queue = Mutex::new(todo);
    let results: Mutex<Vec<(usize, std::result::Result<SampleRecord, String>)>> =
        Mutex::new(Vec::new());
    let manifest_lock = Mutex::new(manifest);
    let http = build_http(cfg)?;

    std::thread::scope(|scope| {
        for _ in 0..cfg.concurrency.min(requests_planned.max(1)) {
            scope.spawn(|| loop {
                let Some(idx) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                let outcome = fetch_one_sample(cfg, &http, prompt_id, prompt_text, variant, idx)
                    .and_then(|record| {
                        let path = staging_dir.join(format!("{idx:05}.jsonl"));
                        let mut buf = Vec::new();
                        write_trace_jsonl(&mut buf, &record.steps)?;
                        fs::write(path, buf)?;
                        Ok(record)
                    });
                match outcome {
                    Ok(record) => {
                        {
                            let mut m = manifest_lock.lock().unwrap();
                            m.done.insert(idx);
                            let _ = m.save(&manifest_dir);
                        }
                        results.lock().unwrap().push((idx, Ok(record)));
                    }
                    Err(e) => {
                        results.lock().unwrap().push((idx, Err(e.to_string())));
                    }
                }
            });
        }
    });

    let manifest = manifest_lock.into_inner().unwrap();
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(idx, _)| *idx);
    let failed: Vec<(usize, String)> = results
        .iter()
        .filter_map(|(idx, r)| r.as_ref().err().map(|e| (*idx, e.clone())))
        .collect();
    let completed_now = results.len() - failed.len();

    // the whole run failed and nothing was recorded before: surface the error
    if requests_planned > 0 && completed_now == 0 && manifest.done.is_empty() {
        let first = failed
            .first()
            .map(|(_, e)| e.clone())
            .unwrap_or_else(|| "no samples completed".into());
        return Err(ClientError::Network(first));
    }

    assemble(out_dir, prompt_id, &manifest)?;
    // completions summary for the samples fetched in this invocation
    let completions_dir = out_dir.join("completions");
    fs::create_dir_all(&completions_dir)?;
    let mut lines = Vec::new();
    for (idx, r) in &results {
        if let Ok(rec) = r {
            let line = CompletionLine {
                sample_index: *idx,
                text: &rec.text,
                finish_reason: &rec.finish_reason,
                n_steps: rec.steps.len(),
            };
            lines.push(serde_json::to_string(&line).unwrap());
        }
    }
    if !lines.is_empty() {
        let path = completions_dir.join(format!("{}.jsonl", sanitize(prompt_id)));
        let mut text = lines.join("\n");
        text.push('\n');
        fs::write(path, text)?;
    }
    Ok(RecordOutcome {
        prompt_id: prompt_id.to_string(),
        requested: cfg.n_samples,
        completed: manifest.done.len(),
        failed,
        requests_sent: requests_planned,
    })
}

struct SampleRecord {
    steps: Vec<TraceStep>,
    text: String,
    finish_reason: String,
}

fn fetch_one_sample(
    cfg: &EndpointConfig,
    http: &reqwest::blocking::Client,
    prompt_id: &str,
    prompt_text: &str,
    variant: Variant,
    idx: usize,
) -> Result<SampleRecord> {
    let request = CompletionRequest {
        model: cfg.model_name.clone(),
        prompt: PromptPayload::Text(prompt_text.to_string()),
        temperature: cfg.temperature,
        top_p: cfg.top_p,
        n: 1,
        logprobs: cfg.logprobs_top_k,
        echo: false,
        max_tokens: cfg.max_generation_tokens,
        seed: Some(idx as u64),
    };
    let response = post_completion(cfg, http, &request)?;
    let choice = response
        .choices
        .first()
        .ok_or_else(|| ClientError::Response("no choices".into()))?;
    let logprobs = logprobs_of(&response)?;
    let pair_id = format!("{prompt_id}/s{idx:05}");
    let mut steps = Vec::with_capacity(logprobs.tokens.len());
    for (t, token) in logprobs.tokens.iter().enumerate() {
        let chosen = crate::wire::parse_token_id(token)?;
        let Some(map) = logprobs.top_logprobs.get(t).and_then(|m| m.as_ref()) else {
            continue;
        };
        let mut topk = topk_from_map(map)?;
        // the sampled token is the measured continuation here
        if !topk.iter().any(|&(tok, _)| tok == chosen) {
            if let Some(lp) = logprobs.token_logprobs.get(t).copied().flatten() {
                topk.push((chosen, lp));
                topk.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            }
        }
        steps.push(TraceStep {
            pair_id: pair_id.clone(),
            variant,
            step_index: t as u64,
            correct_token_id: chosen,
            topk,
            chosen_token_id: chosen,
            skip_prefix_flag: false,
        });
    }
    Ok(SampleRecord {
        steps,
        text: choice.text.clone().unwrap_or_default(),
        finish_reason: choice.finish_reason.clone().unwrap_or_default(),
    })
}

/// Concatenate completed per-sample staging files into `traces/<id>.jsonl`
/// in sample order.
fn assemble(out_dir: &Path, prompt_id: &str, manifest: &Manifest) -> Result<()> {
    let staging_dir = out_dir.join("staging").join(sanitize(prompt_id));
    let traces_dir = out_dir.join("traces");
    fs::create_dir_all(&traces_dir)?;
    let mut combined = Vec::new();
    for idx in &manifest.done {
        let path = staging_dir.join(format!("{idx:05}.jsonl"));
        if path.exists() {
            combined.extend_from_slice(&fs::read(path)?);
        }
    }
    fs::write(traces_dir.join(format!("{}.jsonl", sanitize(prompt_id))), combined)?;
    Ok(())
}
