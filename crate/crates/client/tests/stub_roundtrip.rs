//! Client behavior against the bundled stub server: determinism,
//! retry/backoff, resumability, and teacher-forced scoring.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use screenlab_client::stub::{StubConfig, StubServer};
use screenlab_client::{client, EndpointConfig};
use screenlab_core::trace::{extract_step_noise, Variant};

fn fast_config(base_url: &str) -> EndpointConfig {
    let mut cfg = EndpointConfig::new(base_url, "stub-model");
    cfg.backoff_base_ms = 1;
    cfg.timeout_secs = 10;
    cfg.n_samples = 3;
    cfg.max_generation_tokens = 8;
    cfg
}

fn tmp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("screenlab-client-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_traces(dir: &Path, id: &str) -> Vec<u8> {
    fs::read(dir.join("traces").join(format!("{id}.jsonl"))).unwrap()
}

#[test]
fn sampling_traces_identical_across_runs() {
    let server = StubServer::start(StubConfig::default()).unwrap();
    let cfg = fast_config(&server.base_url());
    let mut bytes = Vec::new();
    for run in 0..2 {
        let dir = tmp_dir(&format!("det{run}"));
        for (i, prompt) in ["alpha", "beta", "gamma"].iter().enumerate() {
            let id = format!("p{i}");
            let outcome =
                client::record_samples(&cfg, &id, prompt, Variant::Standalone, &dir, false)
                    .unwrap();
            assert_eq!(outcome.completed, 3);
            assert!(outcome.failed.is_empty());
        }
        let combined: Vec<u8> = (0..3)
            .flat_map(|i| read_traces(&dir, &format!("p{i}")))
            .collect();
        bytes.push(combined);
        fs::remove_dir_all(&dir).ok();
    }
    assert_eq!(bytes[0], bytes[1], "trace bytes differ across runs");
}

#[test]
fn endpoint_down_is_a_network_error() {
    // a port nothing listens on
    let mut cfg = fast_config("http://127.0.0.1:9");
    cfg.max_retries = 1;
    let dir = tmp_dir("down");
    let err = client::record_samples(&cfg, "p", "prompt", Variant::Standalone, &dir, false)
        .unwrap_err();
    assert!(
        matches!(err, screenlab_client::ClientError::Network(_)),
        "{err:?}"
    );
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn transient_failures_are_retried() {
    let server = StubServer::start(StubConfig {
        fail_first: 2,
        ..StubConfig::default()
    })
    .unwrap();
    let mut cfg = fast_config(&server.base_url());
    cfg.n_samples = 1;
    cfg.max_retries = 4;
    let dir = tmp_dir("retry");
    let outcome =
        client::record_samples(&cfg, "p", "prompt", Variant::Standalone, &dir, false).unwrap();
    assert_eq!(outcome.completed, 1);
    assert_eq!(server.hits(), 3, "two failures plus one success");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn rate_limit_is_honored() {
    let server = StubServer::start(StubConfig {
        rate_limit_every: Some(3),
        ..StubConfig::default()
    })
    .unwrap();
    let mut cfg = fast_config(&server.base_url());
    cfg.n_samples = 6;
    cfg.concurrency = 2;
    let dir = tmp_dir("ratelimit");
    let outcome =
        client::record_samples(&cfg, "p", "prompt", Variant::Standalone, &dir, false).unwrap();
    assert_eq!(outcome.completed, 6);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn interrupted_run_resumes_with_exactly_the_missing_samples() {
    let total = 20;
    let dir = tmp_dir("resume");
    // first run: the first 8 requests hit hard 500s and max_retries = 0,
    // so those samples fail and 12 complete
    {
        let server = StubServer::start(StubConfig {
            fail_first: 8,
            ..StubConfig::default()
        })
        .unwrap();
        let mut cfg = fast_config(&server.base_url());
        cfg.n_samples = total;
        cfg.max_retries = 0;
        cfg.concurrency = 1;
        let outcome =
            client::record_samples(&cfg, "p", "prompt", Variant::Standalone, &dir, false).unwrap();
        assert_eq!(outcome.completed, total - 8);
        assert_eq!(outcome.failed.len(), 8);
    }
    // resume against a healthy server: exactly 8 requests go out
    {
        let server = StubServer::start(StubConfig::default()).unwrap();
        let mut cfg = fast_config(&server.base_url());
        cfg.n_samples = total;
        let outcome =
            client::record_samples(&cfg, "p", "prompt", Variant::Standalone, &dir, true).unwrap();
        assert_eq!(outcome.completed, total);
        assert_eq!(outcome.requests_sent, 8);
        assert_eq!(server.hits(), 8);
    }
    // resuming an intact manifest sends nothing
    {
        let server = StubServer::start(StubConfig::default()).unwrap();
        let mut cfg = fast_config(&server.base_url());
        cfg.n_samples = total;
        let outcome =
            client::record_samples(&cfg, "p", "prompt", Variant::Standalone, &dir, true).unwrap();
        assert_eq!(outcome.requests_sent, 0);
        assert_eq!(server.hits(), 0);
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn scoring_is_stable_and_greedy_consistent() {
    let server = StubServer::start(StubConfig::default()).unwrap();
    let cfg = fast_config(&server.base_url());
    let http = reqwest::blocking::Client::new();
    let prompt = vec![100, 101];
    let forced = vec![3, 1, 4, 1, 5];
    let a = client::score_sequence(&cfg, &http, "pair", Variant::Standalone, &prompt, &forced)
        .unwrap();
    let b = client::score_sequence(&cfg, &http, "pair", Variant::Standalone, &prompt, &forced)
        .unwrap();
    assert_eq!(a, b, "scoring the same sequence twice must match");
    assert_eq!(a.len(), forced.len());
    for (i, step) in a.iter().enumerate() {
        assert_eq!(step.step_index, i as u64);
        assert_eq!(step.correct_token_id, forced[i]);
        // chosen is the arg-max of the recorded top-k
        assert_eq!(step.chosen_token_id, step.topk[0].0);
    }
}

#[test]
fn injected_offsets_are_recovered_by_noise_extraction() {
    // fixed tables: the composite prompt scores the same positions with a
    // known additive offset pattern on the shared top-k
    let base: Vec<Vec<(i64, f64)>> = (0..4)
        .map(|t| {
            vec![
                (0, 1.0 - 0.1 * t as f64),
                (1, 0.2),
                (2, -0.4 + 0.05 * t as f64),
                (3, -1.0),
                (4, -1.8),
            ]
        })
        .collect();
    let offsets = [0.9, -0.3, 0.5, -0.7, 0.2];
    let shifted: Vec<Vec<(i64, f64)>> = base
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(tok, logit)| (tok, logit + offsets[tok as usize]))
                .collect()
        })
        .collect();
    let standalone_prompt = vec![7, 0, 1, 2, 3];
    let composite_prompt = vec![8, 0, 1, 2, 3];
    let mut fixed = HashMap::new();
    fixed.insert(standalone_prompt.clone(), base);
    fixed.insert(composite_prompt.clone(), shifted);
    let server = StubServer::start(StubConfig {
        fixed_scores: fixed,
        ..StubConfig::default()
    })
    .unwrap();
    let cfg = fast_config(&server.base_url());
    let http = reqwest::blocking::Client::new();
    let st = client::score_sequence(
        &cfg,
        &http,
        "pair",
        Variant::Standalone,
        &standalone_prompt[..1],
        &standalone_prompt[1..],
    )
    .unwrap();
    let co = client::score_sequence(
        &cfg,
        &http,
        "pair",
        Variant::Composite,
        &composite_prompt[..1],
        &composite_prompt[1..],
    )
    .unwrap();
    for (t, (s, c)) in st.iter().zip(co.iter()).enumerate() {
        let noise = extract_step_noise(s, c, 5).unwrap().unwrap();
        // centering removes one shared constant, so the recovered pattern
        // matches the injected one up to that constant: compare pairwise
        // differences
        for &(tok_a, xa) in &noise.per_token {
            for &(tok_b, xb) in &noise.per_token {
                let want = offsets[tok_a as usize] - offsets[tok_b as usize];
                assert!(
                    (xa - xb - want).abs() < 1e-9,
                    "step {t}: tokens {tok_a},{tok_b}: {} vs {want}",
                    xa - xb
                );
            }
        }
        // the weighted average is shift-invariant, so it must equal the
        // value computed from the injected offsets directly
        let logits = &s.topk;
        let hi = logits.iter().map(|&(_, l)| l).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|&(_, l)| (l - hi).exp()).sum();
        let correct = s.correct_token_id;
        let off_c = offsets[correct as usize];
        let mut num = 0.0;
        let mut den = 0.0;
        for &(tok, l) in logits {
            if tok == correct {
                continue;
            }
            let p = (l - hi).exp() / z;
            num += p * (offsets[tok as usize] - off_c);
            den += p;
        }
        assert!(
            (noise.weighted_x - num / den).abs() < 1e-9,
            "step {t}: weighted {} vs injected {}",
            noise.weighted_x,
            num / den
        );
    }
}
