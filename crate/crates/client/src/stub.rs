//! In-process completions stub speaking the same wire format as a real
//! endpoint.
//!
//! Responses are a pure function of the request: sampling requests derive a
//! seed from (prompt, seed field) and scoring requests either hit an exact
//! fixed-score table or fall back to hash-derived logits. Tests and offline
//! pipelines get byte-identical traces on every run.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use crate::wire::{
    format_token_id, Choice, CompletionRequest, CompletionResponse, LogProbs, PromptPayload,
};

/// Per-position token logits for one exact prompt.
pub type ScoreTable = Vec<Vec<(i64, f64)>>;

#[derive(Clone, Debug)]
pub struct StubConfig {
    pub vocab_size: i64,
    pub top_k: usize,
    /// Completion length for sampling-mode requests.
    pub gen_len: usize,
    /// Exact-prompt score tables: prompt ids -> per-position top-k logits.
    /// Position 0 of an echoed prompt has no distribution (null logprobs).
    pub fixed_scores: HashMap<Vec<i64>, ScoreTable>,
    /// Respond HTTP 500 to this many requests before recovering.
    pub fail_first: usize,
    /// Respond HTTP 429 (Retry-After: 1) to every n-th request.
    pub rate_limit_every: Option<usize>,
}

impl Default for StubConfig {
    fn default() -> Self {
        Self {
            vocab_size: 16,
            top_k: 8,
            gen_len: 12,
            fixed_scores: HashMap::new(),
            fail_first: 0,
            rate_limit_every: None,
        }
    }
}

pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
}

impl StubServer {
    pub fn start(config: StubConfig) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let hits = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));
        let fails = Arc::new(AtomicUsize::new(config.fail_first));
        {
            let hits = Arc::clone(&hits);
            let shutdown = Arc::clone(&shutdown);
            let config = Arc::new(config);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if shutdown.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let hits = Arc::clone(&hits);
                    let fails = Arc::clone(&fails);
                    let config = Arc::clone(&config);
                    std::thread::spawn(move || {
                        let _ = handle_connection(stream, &config, &hits, &fails);
                    });
                }
            });
        }
        Ok(Self {
            addr,
            hits,
            shutdown,
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Completions requests served so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // nudge the accept loop so it observes the flag
        let _ = TcpStream::connect(self.addr);
    }
}

fn handle_connection(
    mut stream: TcpStream,
    config: &StubConfig,
    hits: &AtomicUsize,
    fails: &AtomicUsize,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some(rest) = line
            .to_ascii_lowercase()
            .strip_prefix("content-length:")
            .map(str::trim)
            .map(String::from)
        {
            content_length = rest.parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    if !request_line.starts_with("POST /v1/completions") {
        return respond(&mut stream, 404, "not found", &[]);
    }
    let hit_no = hits.fetch_add(1, Ordering::SeqCst) + 1;
    if fails
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |f| f.checked_sub(1))
        .is_ok()
    {
        return respond(&mut stream, 500, "{\"error\":\"transient\"}", &[]);
    }
    if let Some(every) = config.rate_limit_every {
        if every > 0 && hit_no % every == 0 {
            return respond(
                &mut stream,
                429,
                "{\"error\":\"rate limited\"}",
                &[("Retry-After", "1")],
            );
        }
    }
    let request: CompletionRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return respond(&mut stream, 400, &format!("{{\"error\":\"{e}\"}}"), &[]);
        }
    };
    let response = build_response(config, &request);
    let body = serde_json::to_string(&response).unwrap();
    respond(&mut stream, 200, &body, &[])
}

fn respond(
    stream: &mut TcpStream,
    status: u16,
    body: &str,
    extra_headers: &[(&str, &str)],
) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        429 => "Too Many Requests",
        _ => "Internal Server Error",
    };
    let mut head = format!(
        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n",
        body.len()
    );
    for (k, v) in extra_headers {
        head.push_str(&format!("{k}: {v}\r\n"));
    }
    head.push_str("\r\n");
    stream.write_all(head.as_bytes())?;
    stream.write_all(body.as_bytes())?;
    stream.flush()
}

fn build_response(config: &StubConfig, request: &CompletionRequest) -> CompletionResponse {
    let scoring = request.echo && request.max_tokens == 0;
    let choice = if scoring {
        match &request.prompt {
            PromptPayload::TokenIds(ids) => score_choice(config, ids),
            PromptPayload::Text(_) => Choice {
                text: Some(String::new()),
                index: 0,
                logprobs: None,
                finish_reason: Some("stop".into()),
            },
        }
    } else {
        sample_choice(config, request)
    };
    CompletionResponse {
        choices: vec![choice],
        model: Some("stub".into()),
    }
}

/// Echoed scoring: per-position top-k from the fixed table when the prompt
/// matches exactly, hash-derived logits otherwise.
fn score_choice(config: &StubConfig, ids: &[i64]) -> Choice {
    let table = config.fixed_scores.get(ids);
    let mut tokens = Vec::with_capacity(ids.len());
    let mut token_logprobs = Vec::with_capacity(ids.len());
    let mut top_logprobs = Vec::with_capacity(ids.len());
    let prompt_hash = hash_ids(ids, table.is_some());
    for (pos, &id) in ids.iter().enumerate() {
        tokens.push(format_token_id(id));
        if pos == 0 {
            token_logprobs.push(None);
            top_logprobs.push(None);
            continue;
        }
        let logits = match table {
            Some(t) if pos - 1 < t.len() => t[pos - 1].clone(),
            _ => hashed_topk(config, prompt_hash, pos),
        };
        let logprobs = normalize_topk(&logits);
        let own = logprobs
            .iter()
            .find(|(t, _)| *t == id)
            .map(|&(_, lp)| lp)
            .unwrap_or(-30.0);
        token_logprobs.push(Some(own));
        let map: HashMap<String, f64> = logprobs
            .iter()
            .map(|&(t, lp)| (format_token_id(t), lp))
            .collect();
        top_logprobs.push(Some(map));
    }
    Choice {
        text: Some(ids.iter().map(|i| format!("<{i}>")).collect()),
        index: 0,
        logprobs: Some(LogProbs {
            tokens,
            token_logprobs,
            top_logprobs,
            text_offset: vec![],
        }),
        finish_reason: Some("stop".into()),
    }
}

/// Sampling: a deterministic pseudo-completion derived from the prompt and
/// the request seed.
fn sample_choice(config: &StubConfig, request: &CompletionRequest) -> Choice {
    let prompt_hash = match &request.prompt {
        PromptPayload::Text(t) => hash_bytes(t.as_bytes()),
        PromptPayload::TokenIds(ids) => hash_ids(ids, false),
    };
    let seed = splitmix(prompt_hash ^ request.seed.unwrap_or(0).wrapping_mul(0x9e37_79b9));
    let len = config.gen_len.min(request.max_tokens.max(1));
    let mut tokens = Vec::with_capacity(len);
    let mut token_logprobs = Vec::with_capacity(len);
    let mut top_logprobs = Vec::with_capacity(len);
    for pos in 0..len {
        let logits = hashed_topk(config, seed, pos);
        let logprobs = normalize_topk(&logits);
        // deterministic "sample": rank chosen by a position hash
        let pick = (splitmix(seed ^ (pos as u64).wrapping_mul(31)) % 3) as usize;
        let (tok, lp) = logprobs[pick.min(logprobs.len() - 1)];
        tokens.push(format_token_id(tok));
        token_logprobs.push(Some(lp));
        let map: HashMap<String, f64> = logprobs
            .iter()
            .map(|&(t, l)| (format_token_id(t), l))
            .collect();
        top_logprobs.push(Some(map));
    }
    Choice {
        text: Some(
            tokens
                .iter()
                .map(|t| format!("<{}>", t.trim_start_matches("token_id:")))
                .collect(),
        ),
        index: 0,
        logprobs: Some(LogProbs {
            tokens,
            token_logprobs,
            top_logprobs,
            text_offset: vec![],
        }),
        finish_reason: Some("length".into()),
    }
}

/// Top-k (token, logit) pairs derived from a hash; full-vocab softmax is
/// applied afterwards by `normalize_topk`.
fn hashed_topk(config: &StubConfig, seed: u64, pos: usize) -> Vec<(i64, f64)> {
    let mut logits: Vec<(i64, f64)> = (0..config.vocab_size)
        .map(|tok| {
            let h = splitmix(seed ^ (pos as u64) << 32 ^ tok as u64);
            let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
            (tok, unit * 8.0 - 4.0)
        })
        .collect();
    logits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    logits.truncate(config.top_k);
    logits
}

/// Normalize a truncated logit list into logprobs over itself.
fn normalize_topk(logits: &[(i64, f64)]) -> Vec<(i64, f64)> {
    let hi = logits.iter().map(|&(_, l)| l).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|&(_, l)| (l - hi).exp()).sum();
    let ln_z = hi + z.ln();
    let mut out: Vec<(i64, f64)> = logits.iter().map(|&(t, l)| (t, l - ln_z)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_bytes(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

fn hash_ids(ids: &[i64], fixed: bool) -> u64 {
    let mut h = if fixed { 7 } else { 0xcbf2_9ce4_8422_2325 };
    for &id in ids {
        h ^= id as u64;
        h = splitmix(h);
    }
    h
}
