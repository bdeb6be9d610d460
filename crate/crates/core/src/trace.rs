//! Analytics over recorded logprob traces.
//!
//! Inputs are JSONL trace steps (one [`TraceStep`] per line) and pass-rate
//! CSV records. From aligned standalone/composite steps the per-token logit
//! noise and its probability-weighted average X are extracted; downstream
//! come distribution diagnostics, plug-in `Delta(eps)` / `sigma(eps)` curves
//! with bootstrap error bars, the sequence log-ratio length regression, and
//! the hardness-ratio CDF.
//!
//! Logits are only meaningful up to a shared constant (softmax shift
//! invariance), so the two top-k lists are median-centered over their shared
//! token set before differencing.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::noise_math::renorm_term;
use crate::rng::{derive_rng, STREAM_BOOTSTRAP};
use crate::stats;

pub const DEFAULT_MIN_OVERLAP: usize = 5;
pub const DEFAULT_SKIP_PREFIX: usize = 10;
pub const DEFAULT_BOOTSTRAP: usize = 1000;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Standalone,
    Composite,
}

/// One decoding step of a recorded run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TraceStep {
    pub pair_id: String,
    pub variant: Variant,
    pub step_index: u64,
    pub correct_token_id: i64,
    /// (token_id, logit), sorted by descending logit.
    pub topk: Vec<(i64, f64)>,
    pub chosen_token_id: i64,
    #[serde(default)]
    pub skip_prefix_flag: bool,
}

impl TraceStep {
    pub fn validate(&self) -> Result<()> {
        if self.topk.is_empty() {
            return Err(Error::InvalidModel(format!(
                "trace step {}/{} has an empty topk",
                self.pair_id, self.step_index
            )));
        }
        if self.topk.iter().any(|(_, l)| !l.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "trace step {}/{} has a non-finite logit",
                self.pair_id, self.step_index
            )));
        }
        if self.topk.windows(2).any(|w| w[0].1 < w[1].1) {
            return Err(Error::InvalidModel(format!(
                "trace step {}/{} topk not sorted by descending logit",
                self.pair_id, self.step_index
            )));
        }
        Ok(())
    }

    pub fn logit_of(&self, token: i64) -> Option<f64> {
        self.topk.iter().find(|(t, _)| *t == token).map(|(_, l)| *l)
    }

    /// Log probability of `token` under the softmax of the recorded top-k.
    pub fn logprob_of(&self, token: i64) -> Option<f64> {
        let logit = self.logit_of(token)?;
        let hi = self.topk[0].1;
        let z: f64 = self.topk.iter().map(|(_, l)| (l - hi).exp()).sum();
        Some(logit - hi - z.ln())
    }
}

/// Parse one JSONL line into a validated step; `line_no` is 1-based and is
/// carried into the error.
pub fn parse_trace_line(line: &str, line_no: usize) -> Result<TraceStep> {
    let step: TraceStep = serde_json::from_str(line).map_err(|e| Error::Schema {
        line: line_no,
        message: e.to_string(),
    })?;
    step.validate().map_err(|e| Error::Schema {
        line: line_no,
        message: e.to_string(),
    })?;
    Ok(step)
}

/// Read a whole JSONL trace stream. Blank lines are permitted and skipped.
pub fn read_trace_jsonl<R: BufRead>(reader: R) -> Result<Vec<TraceStep>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_trace_line(&line, i + 1)?);
    }
    Ok(out)
}

pub fn write_trace_jsonl<W: Write>(mut w: W, steps: &[TraceStep]) -> Result<()> {
    for step in steps {
        serde_json::to_writer(&mut w, step)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

// --- noise extraction -------------------------------------------------------

/// Per-token noise and weighted average for one aligned step pair.
#[derive(Clone, Debug, PartialEq)]
pub struct StepNoise {
    /// (token_id, composite logit - standalone logit), both median-centered
    /// over the shared token set.
    pub per_token: Vec<(i64, f64)>,
    pub weighted_x: f64,
    pub shared_tokens: usize,
}

/// Why a step pair produced no measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepSkip {
    LowOverlap { shared: usize },
    MissingCorrectToken,
    CorrectTokenCertain,
}

/// Extract the per-token noise and the weighted average X from an aligned
/// standalone/composite step pair.
///
/// Both logit vectors are restricted to the intersection of the two top-k
/// sets and median-centered there; the weights are the standalone
/// probabilities renormalized over the shared set.
pub fn extract_step_noise(
    standalone: &TraceStep,
    composite: &TraceStep,
    min_overlap: usize,
) -> Result<std::result::Result<StepNoise, StepSkip>> {
    if standalone.pair_id != composite.pair_id
        || standalone.step_index != composite.step_index
        || standalone.variant != Variant::Standalone
        || composite.variant != Variant::Composite
    {
        return Err(Error::InvalidModel(format!(
            "steps are not an aligned standalone/composite pair: {}/{} vs {}/{}",
            standalone.pair_id, standalone.step_index, composite.pair_id, composite.step_index
        )));
    }
    let mut shared: Vec<(i64, f64, f64)> = Vec::new();
    for &(tok, ls) in &standalone.topk {
        if let Some(lc) = composite.logit_of(tok) {
            shared.push((tok, ls, lc));
        }
    }
    if shared.len() < min_overlap {
        return Ok(Err(StepSkip::LowOverlap {
            shared: shared.len(),
        }));
    }
    let correct = standalone.correct_token_id;
    let Some(pos) = shared.iter().position(|&(t, _, _)| t == correct) else {
        return Ok(Err(StepSkip::MissingCorrectToken));
    };

    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    let ms = median(shared.iter().map(|&(_, ls, _)| ls).collect());
    let mc = median(shared.iter().map(|&(_, _, lc)| lc).collect());

    let per_token: Vec<(i64, f64)> = shared
        .iter()
        .map(|&(tok, ls, lc)| (tok, (lc - mc) - (ls - ms)))
        .collect();

    // standalone probabilities renormalized over the shared set
    let hi = shared
        .iter()
        .map(|&(_, ls, _)| ls)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = shared.iter().map(|&(_, ls, _)| (ls - hi).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();

    let rest: f64 = probs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != pos)
        .map(|(_, &p)| p)
        .sum();
    if rest <= 0.0 {
        return Ok(Err(StepSkip::CorrectTokenCertain));
    }
    let noise_c = per_token[pos].1;
    let acc: f64 = probs
        .iter()
        .zip(per_token.iter())
        .enumerate()
        .filter(|&(i, _)| i != pos)
        .map(|(_, (&p, &(_, x)))| p * (x - noise_c))
        .sum();
    Ok(Ok(StepNoise {
        per_token,
        weighted_x: acc / rest,
        shared_tokens: shared.len(),
    }))
}

/// Pair up standalone/composite steps by (pair_id, step_index) and extract
/// the weighted noise from each, counting skips.
pub fn extract_all_noise(
    steps: &[TraceStep],
    min_overlap: usize,
) -> Result<(Vec<f64>, usize)> {
    let mut by_key: BTreeMap<(&str, u64), (Option<&TraceStep>, Option<&TraceStep>)> =
        BTreeMap::new();
    for step in steps {
        let slot = by_key
            .entry((step.pair_id.as_str(), step.step_index))
            .or_default();
        match step.variant {
            Variant::Standalone => slot.0 = Some(step),
            Variant::Composite => slot.1 = Some(step),
        }
    }
    let mut xs = Vec::new();
    let mut skipped = 0usize;
    for (_, (s, c)) in by_key {
        let (Some(s), Some(c)) = (s, c) else {
            skipped += 1;
            continue;
        };
        match extract_step_noise(s, c, min_overlap)? {
            Ok(noise) => xs.push(noise.weighted_x),
            Err(_) => skipped += 1,
        }
    }
    Ok((xs, skipped))
}

// --- distribution diagnostics -------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct NoiseDiagnostics {
    pub n: usize,
    /// max |X|
    pub m_hat: f64,
    /// 99th percentile of |X|
    pub m_hat_p99: f64,
    pub mean: f64,
    pub mean_abs: f64,
    pub skewness: f64,
    /// Two-sample KS p-value of {X} against {-X}.
    pub symmetry_p_value: f64,
    pub fraction_outside_pm4: f64,
    pub degenerate: bool,
}

pub fn noise_diagnostics(xs: &[f64]) -> Result<NoiseDiagnostics> {
    if xs.len() < 30 {
        return Err(Error::InsufficientSamples {
            have: xs.len(),
            need: 30,
        });
    }
    let mut abs: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let m_hat = *abs.last().unwrap();
    let m_hat_p99 = stats::percentile_sorted(&abs, 0.99);
    let mean = stats::mean(xs);
    let mean_abs = stats::mean(&abs);
    let mirrored: Vec<f64> = xs.iter().map(|x| -x).collect();
    let (_, symmetry_p_value) = stats::ks_two_sample(xs, &mirrored);
    let outside = xs.iter().filter(|x| x.abs() > 4.0).count();
    Ok(NoiseDiagnostics {
        n: xs.len(),
        m_hat,
        m_hat_p99,
        mean,
        mean_abs,
        skewness: stats::skewness(xs),
        symmetry_p_value,
        fraction_outside_pm4: outside as f64 / xs.len() as f64,
        degenerate: mean_abs == 0.0,
    })
}

// --- Delta(eps) / sigma(eps) curves ---------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeltaSigmaPoint {
    pub epsilon: f64,
    pub delta: f64,
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub sigma: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

/// Plug-in estimates of the renorm term's mean and deviation on a grid of
/// eps values, with percentile bootstrap intervals.
///
/// Samples are symmetrized first: each x contributes renorm(eps, x) and
/// renorm(eps, -x) with equal weight. The estimate then depends on eps only
/// through eps(1-eps), so the curve at eps and 1-eps coincides.
pub fn empirical_delta_sigma(
    xs: &[f64],
    eps_grid: &[f64],
    n_boot: usize,
    seed: u64,
) -> Result<Vec<DeltaSigmaPoint>> {
    if xs.is_empty() {
        return Err(Error::InsufficientSamples { have: 0, need: 1 });
    }
    for &eps in eps_grid {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::OutOfRange {
                name: "epsilon",
                value: eps,
                expected: "(0, 1)",
            });
        }
    }
    let n = xs.len();
    // per-sample symmetrized sums s_i = f(x) + f(-x) and square sums
    // q_i = f(x)^2 + f(-x)^2, one row per grid point
    let mut sums: Vec<Vec<f64>> = Vec::with_capacity(eps_grid.len());
    let mut sq_sums: Vec<Vec<f64>> = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let mut s = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for &x in xs {
            let a = renorm_term(eps, x)?;
            let b = renorm_term(eps, -x)?;
            s.push(a + b);
            q.push(a * a + b * b);
        }
        sums.push(s);
        sq_sums.push(q);
    }
    let point = |s: &[f64], q: &[f64], idx: Option<&[usize]>| -> (f64, f64) {
        let (total_s, total_q, count) = match idx {
            None => (s.iter().sum::<f64>(), q.iter().sum::<f64>(), s.len()),
            Some(ids) => (
                ids.iter().map(|&i| s[i]).sum::<f64>(),
                ids.iter().map(|&i| q[i]).sum::<f64>(),
                ids.len(),
            ),
        };
        let m = count as f64 * 2.0;
        let mean = total_s / m;
        let var = (total_q / m - mean * mean).max(0.0);
        (mean, var.sqrt())
    };

    // bootstrap index draws are shared across grid points so the resampled
    // curves stay coherent
    let boot: Vec<Vec<(f64, f64)>> = exec::indexed_map(n_boot, |r| {
        let mut rng = derive_rng(seed, &[STREAM_BOOTSTRAP, r as u64]);
        let idx: Vec<usize> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0..n)).collect();
        eps_grid
            .iter()
            .enumerate()
            .map(|(g, _)| point(&sums[g], &sq_sums[g], Some(&idx)))
            .collect()
    });

    let mut out = Vec::with_capacity(eps_grid.len());
    for (g, &eps) in eps_grid.iter().enumerate() {
        let (delta, sigma) = point(&sums[g], &sq_sums[g], None);
        let (delta_lo, delta_hi, sigma_lo, sigma_hi) = if n_boot > 0 {
            let mut ds: Vec<f64> = boot.iter().map(|row| row[g].0).collect();
            let mut ss: Vec<f64> = boot.iter().map(|row| row[g].1).collect();
            ds.sort_by(f64::total_cmp);
            ss.sort_by(f64::total_cmp);
            (
                stats::percentile_sorted(&ds, 0.025),
                stats::percentile_sorted(&ds, 0.975),
                stats::percentile_sorted(&ss, 0.025),
                stats::percentile_sorted(&ss, 0.975),
            )
        } else {
            (delta, delta, sigma, sigma)
        };
        out.push(DeltaSigmaPoint {
            epsilon: eps,
            delta,
            delta_lo,
            delta_hi,
            sigma,
            sigma_lo,
            sigma_hi,
        });
    }
    Ok(out)
}

// --- length regression ----------------------------------------------------------

/// Per-pair point for the length regression.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SequencePoint {
    pub pair_id: String,
    /// Number of counted steps (after prefix skipping).
    pub length: u64,
    /// Sum over counted steps of log P_standalone(correct) - log P_composite(correct).
    pub log_ratio: f64,
}

/// Build per-pair (length, log-ratio) points from aligned trace steps.
///
/// Steps with `step_index < skip_prefix` or a set `skip_prefix_flag` are not
/// counted, nor are steps whose correct token is missing from either top-k.
pub fn sequence_records(steps: &[TraceStep], skip_prefix: u64) -> Result<Vec<SequencePoint>> {
    let mut by_pair: BTreeMap<&str, BTreeMap<u64, (Option<&TraceStep>, Option<&TraceStep>)>> =
        BTreeMap::new();
    for step in steps {
        let slot = by_pair
            .entry(step.pair_id.as_str())
            .or_default()
            .entry(step.step_index)
            .or_default();
        match step.variant {
            Variant::Standalone => slot.0 = Some(step),
            Variant::Composite => slot.1 = Some(step),
        }
    }
    let mut out = Vec::new();
    for (pair_id, by_step) in by_pair {
        let mut length = 0u64;
        let mut log_ratio = 0.0;
        for (&step_index, &(s, c)) in &by_step {
            if step_index < skip_prefix {
                continue;
            }
            let (Some(s), Some(c)) = (s, c) else { continue };
            if s.skip_prefix_flag || c.skip_prefix_flag {
                continue;
            }
            if s.correct_token_id != c.correct_token_id {
                continue;
            }
            let (Some(ls), Some(lc)) = (
                s.logprob_of(s.correct_token_id),
                c.logprob_of(c.correct_token_id),
            ) else {
                continue;
            };
            length += 1;
            log_ratio += ls - lc;
        }
        if length > 0 {
            out.push(SequencePoint {
                pair_id: pair_id.to_string(),
                length,
                log_ratio,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub n_points: usize,
}

/// OLS of log-ratio on length with a percentile bootstrap interval on the
/// slope (resampling pairs).
pub fn length_regression(
    points: &[(f64, f64)],
    n_boot: usize,
    seed: u64,
) -> Result<RegressionFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientSamples {
            have: points.len(),
            need: 3,
        });
    }
    let (slope, intercept) = stats::ols(points).ok_or_else(|| {
        Error::Degenerate("length regression needs at least two distinct lengths".into())
    })?;
    let (slope_lo, slope_hi) = if n_boot > 0 {
        let slopes: Vec<Option<f64>> = exec::indexed_map(n_boot, |r| {
            let mut rng = derive_rng(seed, &[STREAM_BOOTSTRAP, r as u64]);
            let resampled: Vec<(f64, f64)> = (0..points.len())
                .map(|_| points[rand::Rng::gen_range(&mut rng, 0..points.len())])
                .collect();
            stats::ols(&resampled).map(|(s, _)| s)
        });
        let mut ok: Vec<f64> = slopes.into_iter().flatten().collect();
        if ok.is_empty() {
            (slope, slope)
        } else {
            ok.sort_by(f64::total_cmp);
            (
                stats::percentile_sorted(&ok, 0.025),
                stats::percentile_sorted(&ok, 0.975),
            )
        }
    } else {
        (slope, slope)
    };
    Ok(RegressionFit {
        slope,
        intercept,
        slope_lo,
        slope_hi,
        n_points: points.len(),
    })
}

// --- pass rates, ratios, CDF -------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    Standalone1,
    Standalone2,
    Composite,
}

impl RateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateKind::Standalone1 => "standalone_1",
            RateKind::Standalone2 => "standalone_2",
            RateKind::Composite => "composite",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "standalone_1" => Some(RateKind::Standalone1),
            "standalone_2" => Some(RateKind::Standalone2),
            "composite" => Some(RateKind::Composite),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PassRateRecord {
    pub problem_id: String,
    pub kind: RateKind,
    pub n_samples: u64,
    pub n_correct: u64,
}

impl PassRateRecord {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidModel(format!(
                "pass-rate record {} has zero samples",
                self.problem_id
            )));
        }
        if self.n_correct > self.n_samples {
            return Err(Error::InvalidModel(format!(
                "pass-rate record {} has n_correct > n_samples",
                self.problem_id
            )));
        }
        Ok(())
    }

    pub fn pass_rate(&self) -> f64 {
        self.n_correct as f64 / self.n_samples as f64
    }
}

pub const PASS_RATE_HEADER: &str = "problem_id,kind,n_samples,n_correct";

pub fn read_pass_rates_csv<R: BufRead>(reader: R) -> Result<Vec<PassRateRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if line_no == 1 {
            if line.trim() != PASS_RATE_HEADER {
                return Err(Error::Schema {
                    line: 1,
                    message: format!("expected header '{PASS_RATE_HEADER}'"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Schema {
                line: line_no,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let kind = RateKind::parse(fields[1]).ok_or_else(|| Error::Schema {
            line: line_no,
            message: format!("unknown kind '{}'", fields[1]),
        })?;
        let parse_u64 = |s: &str, name: &str| -> Result<u64> {
            s.trim().parse().map_err(|_| Error::Schema {
                line: line_no,
                message: format!("{name} is not an integer: '{s}'"),
            })
        };
        let rec = PassRateRecord {
            problem_id: fields[0].to_string(),
            kind,
            n_samples: parse_u64(fields[2], "n_samples")?,
            n_correct: parse_u64(fields[3], "n_correct")?,
        };
        rec.validate().map_err(|e| Error::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_pass_rates_csv<W: Write>(mut w: W, records: &[PassRateRecord]) -> Result<()> {
    writeln!(w, "{PASS_RATE_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{}",
            r.problem_id,
            r.kind.as_str(),
            r.n_samples,
            r.n_correct
        )?;
    }
    Ok(())
}

/// Problems whose both standalone pass rates reach 0.1. The comparison is
/// done in integers (10 * n_correct >= n_samples) so the boundary is exact.
pub fn filter_problems(records: &[PassRateRecord]) -> Vec<String> {
    let mut by_problem: BTreeMap<&str, (Option<&PassRateRecord>, Option<&PassRateRecord>)> =
        BTreeMap::new();
    for r in records {
        let slot = by_problem.entry(r.problem_id.as_str()).or_default();
        match r.kind {
            RateKind::Standalone1 => slot.0 = Some(r),
            RateKind::Standalone2 => slot.1 = Some(r),
            RateKind::Composite => {}
        }
    }
    by_problem
        .into_iter()
        .filter_map(|(id, (s1, s2))| {
            let (s1, s2) = (s1?, s2?);
            let ok = |r: &PassRateRecord| 10 * r.n_correct >= r.n_samples;
            (ok(s1) && ok(s2)).then(|| id.to_string())
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct HardnessRatio {
    pub problem_id: String,
    /// N_composite / (N_1 * N_2); a rule-of-three lower bound when censored.
    pub ratio: f64,
    pub censored: bool,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct CdfPoint {
    pub ratio: f64,
    pub cdf: f64,
    pub censored: bool,
}

/// Hardness ratios per problem and their empirical CDF.
///
/// Every problem needs its two standalone records and the composite record.
/// A composite with zero correct samples enters at its rule-of-three lower
/// bound `n/3 / (N1 N2)` and is flagged censored.
pub fn hardness_cdf(records: &[PassRateRecord]) -> Result<(Vec<HardnessRatio>, Vec<CdfPoint>)> {
    let mut by_problem: BTreeMap<
        &str,
        (
            Option<&PassRateRecord>,
            Option<&PassRateRecord>,
            Option<&PassRateRecord>,
        ),
    > = BTreeMap::new();
    for r in records {
        r.validate()?;
        let slot = by_problem.entry(r.problem_id.as_str()).or_default();
        match r.kind {
            RateKind::Standalone1 => slot.0 = Some(r),
            RateKind::Standalone2 => slot.1 = Some(r),
            RateKind::Composite => slot.2 = Some(r),
        }
    }
    let mut ratios = Vec::new();
    for (id, (s1, s2, comp)) in by_problem {
        let missing = |which: &'static str| Error::MissingGroupMember {
            problem_id: id.to_string(),
            missing: which,
        };
        let s1 = s1.ok_or_else(|| missing("standalone_1"))?;
        let s2 = s2.ok_or_else(|| missing("standalone_2"))?;
        let comp = comp.ok_or_else(|| missing("composite"))?;
        if s1.n_correct == 0 || s2.n_correct == 0 {
            return Err(Error::Degenerate(format!(
                "problem {id} has a zero standalone pass rate; apply the eligibility filter first"
            )));
        }
        let n1 = s1.n_samples as f64 / s1.n_correct as f64;
        let n2 = s2.n_samples as f64 / s2.n_correct as f64;
        let (n_comp, censored) = if comp.n_correct == 0 {
            (comp.n_samples as f64 / 3.0, true)
        } else {
            (comp.n_samples as f64 / comp.n_correct as f64, false)
        };
        ratios.push(HardnessRatio {
            problem_id: id.to_string(),
            ratio: n_comp / (n1 * n2),
            censored,
        });
    }
    ratios.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then(a.problem_id.cmp(&b.problem_id)));
    let total = ratios.len() as f64;
    let cdf = ratios
        .iter()
        .enumerate()
        .map(|(i, r)| CdfPoint {
            ratio: r.ratio,
            cdf: (i + 1) as f64 / total,
            censored: r.censored,
        })
        .collect();
    Ok((ratios, cdf))
}

/// Fraction of ratios at or below `x`.
pub fn cdf_at(ratios: &[HardnessRatio], x: f64) -> f64 {
    if ratios.is_empty() {
        return 0.0;
    }
    ratios.iter().filter(|r| r.ratio <= x).count() as f64 / ratios.len() as f64
}

// --- histogram -------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub density: f64,
}

/// Fixed-width histogram over [lo, hi]; values outside are clamped into the
/// end bins.
pub fn histogram(xs: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<HistBin> {
    assert!(bins > 0 && hi > lo);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in xs {
        let idx = (((x - lo) / width).floor() as i64).clamp(0, bins as i64 - 1) as usize;
        counts[idx] += 1;
    }
    let n = xs.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            count,
            density: count as f64 / (n * width),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(
        pair: &str,
        variant: Variant,
        idx: u64,
        correct: i64,
        topk: Vec<(i64, f64)>,
    ) -> TraceStep {
        let chosen_token_id = topk[0].0;
        TraceStep {
            pair_id: pair.into(),
            variant,
            step_index: idx,
            correct_token_id: correct,
            topk,
            chosen_token_id,
            skip_prefix_flag: false,
        }
    }

    fn sorted(mut topk: Vec<(i64, f64)>) -> Vec<(i64, f64)> {
        topk.sort_by(|a, b| b.1.total_cmp(&a.1));
        topk
    }

    #[test]
    fn identical_steps_give_zero_noise() {
        let logits = sorted(vec![(1, -0.2), (2, -1.5), (3, -2.0), (4, -2.5), (5, -3.0)]);
        let s = step("p", Variant::Standalone, 0, 1, logits.clone());
        let c = step("p", Variant::Composite, 0, 1, logits);
        let noise = extract_step_noise(&s, &c, 5).unwrap().unwrap();
        assert!(noise.weighted_x.abs() < 1e-14);
        assert!(noise.per_token.iter().all(|(_, x)| x.abs() < 1e-14));
    }

    #[test]
    fn constant_shift_is_removed() {
        let logits = sorted(vec![(1, -0.2), (2, -1.5), (3, -2.0), (4, -2.5), (5, -3.0)]);
        let shifted: Vec<(i64, f64)> = logits.iter().map(|&(t, l)| (t, l + 7.5)).collect();
        let s = step("p", Variant::Standalone, 0, 1, logits);
        let c = step("p", Variant::Composite, 0, 1, shifted);
        let noise = extract_step_noise(&s, &c, 5).unwrap().unwrap();
        assert!(noise.weighted_x.abs() < 1e-12);
        assert!(noise.per_token.iter().all(|(_, x)| x.abs() < 1e-12));
    }

    #[test]
    fn weighted_noise_matches_hand_arithmetic() {
        // standalone probs (0.7, 0.2, 0.1) on a shared 3-token set with
        // injected noise (1.0, 0.5, -0.5) on tokens (10, 20, 30)
        let st = sorted(vec![
            (10, 0.7f64.ln()),
            (20, 0.2f64.ln()),
            (30, 0.1f64.ln()),
        ]);
        let comp = sorted(vec![
            (10, 0.7f64.ln() + 1.0),
            (20, 0.2f64.ln() + 0.5),
            (30, 0.1f64.ln() - 0.5),
        ]);
        let s = step("p", Variant::Standalone, 3, 10, st);
        let c = step("p", Variant::Composite, 3, 10, comp);
        let noise = extract_step_noise(&s, &c, 3).unwrap().unwrap();
        assert!(
            (noise.weighted_x - (-0.25 / 0.3)).abs() < 1e-12,
            "x = {}",
            noise.weighted_x
        );
    }

    #[test]
    fn low_overlap_and_missing_correct_are_skips() {
        let s = step(
            "p",
            Variant::Standalone,
            0,
            1,
            sorted(vec![(1, -0.1), (2, -0.2)]),
        );
        let c = step(
            "p",
            Variant::Composite,
            0,
            1,
            sorted(vec![(1, -0.1), (9, -0.2)]),
        );
        assert_eq!(
            extract_step_noise(&s, &c, 5).unwrap(),
            Err(StepSkip::LowOverlap { shared: 1 })
        );
        let s2 = step(
            "p",
            Variant::Standalone,
            0,
            42,
            sorted(vec![(1, -0.1), (2, -0.2)]),
        );
        let c2 = step(
            "p",
            Variant::Composite,
            0,
            42,
            sorted(vec![(1, -0.1), (2, -0.2)]),
        );
        assert_eq!(
            extract_step_noise(&s2, &c2, 2).unwrap(),
            Err(StepSkip::MissingCorrectToken)
        );
    }

    #[test]
    fn parse_rejects_unsorted_topk_with_line_number() {
        let line = r#"{"pair_id":"p","variant":"standalone","step_index":0,"correct_token_id":1,"topk":[[1,-2.0],[2,-1.0]],"chosen_token_id":1,"skip_prefix_flag":false}"#;
        match parse_trace_line(line, 17) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 17),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn trace_jsonl_round_trip() {
        let steps = vec![
            step("a", Variant::Standalone, 0, 1, sorted(vec![(1, -0.5), (2, -1.0)])),
            step("a", Variant::Composite, 0, 1, sorted(vec![(1, -0.6), (2, -0.9)])),
        ];
        let mut buf = Vec::new();
        write_trace_jsonl(&mut buf, &steps).unwrap();
        let back = read_trace_jsonl(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(steps, back);
    }

    #[test]
    fn diagnostics_flags_degenerate_and_needs_samples() {
        assert!(noise_diagnostics(&[0.0; 10]).is_err());
        let d = noise_diagnostics(&[0.0; 64]).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.mean_abs, 0.0);
    }

    #[test]
    fn diagnostics_on_uniform_samples() {
        let m = crate::noise_model::NoiseModel::Uniform { bound: 4.0 };
        let mut rng = crate::rng::derive_rng(3, &[9]);
        let xs: Vec<f64> = (0..5000).map(|_| m.sample(&mut rng)).collect();
        let d = noise_diagnostics(&xs).unwrap();
        assert!(d.m_hat <= 4.0);
        assert!(d.symmetry_p_value > 0.01);
        assert_eq!(d.fraction_outside_pm4, 0.0);
        assert!(!d.degenerate);
    }

    #[test]
    fn delta_sigma_zero_samples_are_zero() {
        let pts = empirical_delta_sigma(&[0.0; 40], &[0.1, 0.3], 50, 1).unwrap();
        for p in pts {
            assert_eq!(p.delta, 0.0);
            assert_eq!(p.sigma, 0.0);
        }
    }

    #[test]
    fn delta_symmetric_in_eps() {
        // Delta depends on eps only through eps(1-eps) once samples are
        // symmetrized; sigma carries no such symmetry
        let mut rng = crate::rng::derive_rng(5, &[1]);
        let m = crate::noise_model::NoiseModel::TruncatedGaussian {
            std: 1.5,
            bound: 4.0,
        };
        let xs: Vec<f64> = (0..2000).map(|_| m.sample(&mut rng)).collect();
        let pts = empirical_delta_sigma(&xs, &[0.1, 0.9, 0.25, 0.75], 0, 0).unwrap();
        assert!((pts[0].delta - pts[1].delta).abs() < 1e-12);
        assert!((pts[2].delta - pts[3].delta).abs() < 1e-12);
    }

    #[test]
    fn delta_sigma_two_point_closed_form() {
        // samples exactly +/- ln 3 in equal numbers at eps = 0.5
        let xs: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 3f64.ln() } else { -(3f64.ln()) })
            .collect();
        let pts = empirical_delta_sigma(&xs, &[0.5], 0, 0).unwrap();
        assert!((pts[0].delta - 0.14384103622589046).abs() < 1e-12);
    }

    #[test]
    fn sequence_records_skip_prefix_and_sum() {
        // two counted steps with log-ratio 0.3 each after skipping index < 1
        let mk = |idx: u64, shift: f64| {
            let st = sorted(vec![(1, 0.5f64.ln()), (2, 0.5f64.ln())]);
            let co = sorted(vec![(1, 0.5f64.ln() - shift), (2, 0.5f64.ln() + shift)]);
            vec![
                step("p", Variant::Standalone, idx, 1, st),
                step("p", Variant::Composite, idx, 1, co),
            ]
        };
        let mut steps = mk(0, 10.0); // skipped by prefix rule
        steps.extend(mk(1, 0.3));
        steps.extend(mk(2, 0.3));
        let pts = sequence_records(&steps, 1).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].length, 2);
        // each step suppresses by log( (e^0.3+e^-0.3)/2 * ... ) — compute directly
        let expected: f64 = {
            let lp_st: f64 = 0.5f64.ln();
            let z = (0.5f64.ln() - 0.3f64).exp() + (0.5f64.ln() + 0.3f64).exp();
            let lp_co = (0.5f64.ln() - 0.3) - z.ln();
            2.0 * (lp_st - lp_co)
        };
        assert!((pts[0].log_ratio - expected).abs() < 1e-12);
    }

    #[test]
    fn regression_exact_line_zero_residual() {
        let pts: Vec<(f64, f64)> = (1..=10).map(|i| (20.0 * i as f64, 0.05 * 20.0 * i as f64)).collect();
        let fit = length_regression(&pts, 200, 7).unwrap();
        assert!((fit.slope - 0.05).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-10);
        assert!(fit.slope_lo <= 0.05 && 0.05 <= fit.slope_hi);
    }

    #[test]
    fn regression_degenerate_lengths_rejected() {
        let pts = vec![(5.0, 1.0), (5.0, 2.0), (5.0, 3.0)];
        assert!(matches!(
            length_regression(&pts, 0, 0),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            length_regression(&[(1.0, 1.0)], 0, 0),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn filter_keeps_boundary_drops_below() {
        let rec = |id: &str, kind, n, c| PassRateRecord {
            problem_id: id.into(),
            kind,
            n_samples: n,
            n_correct: c,
        };
        let records = vec![
            rec("keep", RateKind::Standalone1, 10_000, 1000), // exactly 0.1
            rec("keep", RateKind::Standalone2, 200, 20),
            rec("drop", RateKind::Standalone1, 10_000, 999), // 0.0999
            rec("drop", RateKind::Standalone2, 200, 100),
            rec("half", RateKind::Standalone1, 200, 100),
            rec("half", RateKind::Standalone2, 200, 10), // 0.05
        ];
        assert_eq!(filter_problems(&records), vec!["keep".to_string()]);
        assert!(filter_problems(&[]).is_empty());
    }

    #[test]
    fn cdf_example_values() {
        let rec = |id: &str, kind, n, c| PassRateRecord {
            problem_id: id.into(),
            kind,
            n_samples: n,
            n_correct: c,
        };
        // four problems engineered to ratios 1, 2, 4, 8: both standalone
        // complexities are 1, the composite complexity is 16/cc
        let mut records = Vec::new();
        for (i, cc) in [16, 8, 4, 2].into_iter().enumerate() {
            let id = format!("p{i}");
            records.push(rec(&id, RateKind::Standalone1, 16, 16));
            records.push(rec(&id, RateKind::Standalone2, 16, 16));
            records.push(rec(&id, RateKind::Composite, 16, cc));
        }
        let (ratios, cdf) = hardness_cdf(&records).unwrap();
        let vals: Vec<f64> = ratios.iter().map(|r| r.ratio).collect();
        assert_eq!(vals, vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(cdf_at(&ratios, 5.0), 0.75);
        assert_eq!(cdf.last().unwrap().cdf, 1.0);
        // monotone non-decreasing
        assert!(cdf.windows(2).all(|w| w[0].cdf <= w[1].cdf));
    }

    #[test]
    fn cdf_all_ratio_one_when_composite_matches_product() {
        let rec = |id: &str, kind, n, c| PassRateRecord {
            problem_id: id.into(),
            kind,
            n_samples: n,
            n_correct: c,
        };
        let mut records = Vec::new();
        for i in 0..3 {
            let id = format!("p{i}");
            records.push(rec(&id, RateKind::Standalone1, 100, 50));
            records.push(rec(&id, RateKind::Standalone2, 100, 40));
            records.push(rec(&id, RateKind::Composite, 100, 20)); // 0.5 * 0.4
        }
        let (ratios, _) = hardness_cdf(&records).unwrap();
        assert!(ratios.iter().all(|r| (r.ratio - 1.0).abs() < 1e-12));
    }

    #[test]
    fn cdf_censors_zero_correct_composites() {
        let rec = |id: &str, kind, n, c| PassRateRecord {
            problem_id: id.into(),
            kind,
            n_samples: n,
            n_correct: c,
        };
        let records = vec![
            rec("p", RateKind::Standalone1, 100, 50),
            rec("p", RateKind::Standalone2, 100, 50),
            rec("p", RateKind::Composite, 300, 0),
        ];
        let (ratios, _) = hardness_cdf(&records).unwrap();
        assert!(ratios[0].censored);
        assert!((ratios[0].ratio - 100.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_missing_member_is_error() {
        let records = vec![PassRateRecord {
            problem_id: "p".into(),
            kind: RateKind::Standalone1,
            n_samples: 100,
            n_correct: 50,
        }];
        assert!(matches!(
            hardness_cdf(&records),
            Err(Error::MissingGroupMember { .. })
        ));
    }

    #[test]
    fn pass_rate_csv_round_trip_and_errors() {
        let records = vec![
            PassRateRecord {
                problem_id: "a".into(),
                kind: RateKind::Standalone1,
                n_samples: 200,
                n_correct: 31,
            },
            PassRateRecord {
                problem_id: "a".into(),
                kind: RateKind::Composite,
                n_samples: 200,
                n_correct: 2,
            },
        ];
        let mut buf = Vec::new();
        write_pass_rates_csv(&mut buf, &records).unwrap();
        let back = read_pass_rates_csv(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(records, back);

        let bad = "problem_id,kind,n_samples,n_correct\na,composite,xyz,1\n";
        match read_pass_rates_csv(std::io::Cursor::new(bad.as_bytes())) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn histogram_covers_and_normalizes() {
        let xs: Vec<f64> = (0..1000).map(|i| -4.0 + 8.0 * i as f64 / 999.0).collect();
        let bins = histogram(&xs, 16, -4.0, 4.0);
        assert_eq!(bins.iter().map(|b| b.count).sum::<u64>(), 1000);
        let mass: f64 = bins.iter().map(|b| b.density * (b.hi - b.lo)).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }
}
