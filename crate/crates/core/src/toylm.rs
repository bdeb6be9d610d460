//! Exactly enumerable toy autoregressive models.
//!
//! A [`ToyLM`] is a next-token distribution over a small vocabulary that
//! always halts: the terminator token is forced once a sequence reaches
//! `max_len`. A [`ToyProblem`] pairs a model with an explicit set of correct
//! solutions, so the generation complexity `N = 1 / sum_correct P(y)` is
//! computable in closed form by summing chain-rule probabilities, and
//! measurable by Monte Carlo decoding for comparison.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{derive_rng, STREAM_DECODE};
use crate::stats;

const PROB_SUM_TOL: f64 = 1e-12;
/// Full enumeration refuses vocab^max_len beyond this.
pub const ENUMERATION_GUARD: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub enum ToyLMKind {
    /// Same distribution at every step.
    Iid { probs: Vec<f64> },
    /// Distribution depends on the step index; the last entry repeats.
    Schedule { steps: Vec<Vec<f64>> },
    /// Order-k Markov rule keyed on the last k tokens, with a fallback
    /// distribution for unlisted contexts. Entries are kept sorted.
    Markov {
        order: usize,
        entries: Vec<(Vec<usize>, Vec<f64>)>,
        fallback: Vec<f64>,
    },
}

/// An autoregressive token distribution over a small vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ToyLmSpec", into = "ToyLmSpec")]
pub struct ToyLM {
    vocab: Vec<String>,
    terminator: usize,
    max_len: usize,
    kind: ToyLMKind,
}

impl ToyLM {
    pub fn new(
        vocab: Vec<String>,
        terminator: &str,
        max_len: usize,
        kind: ToyLMKind,
    ) -> Result<Self> {
        if vocab.len() < 2 {
            return Err(Error::InvalidModel("vocab needs at least 2 tokens".into()));
        }
        let unique: BTreeSet<&String> = vocab.iter().collect();
        if unique.len() != vocab.len() {
            return Err(Error::InvalidModel("vocab tokens must be unique".into()));
        }
        let terminator_idx = vocab
            .iter()
            .position(|t| t == terminator)
            .ok_or_else(|| Error::UnknownToken(terminator.to_string()))?;
        if max_len == 0 {
            return Err(Error::InvalidModel("max_len must be at least 1".into()));
        }
        let lm = Self {
            vocab,
            terminator: terminator_idx,
            max_len,
            kind,
        };
        lm.validate_kind()?;
        Ok(lm)
    }

    fn validate_kind(&self) -> Result<()> {
        let check = |probs: &[f64]| -> Result<()> {
            if probs.len() != self.vocab.len() {
                return Err(Error::InvalidModel(format!(
                    "probability vector has {} entries for a vocab of {}",
                    probs.len(),
                    self.vocab.len()
                )));
            }
            if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidModel(
                    "probabilities must be finite and non-negative".into(),
                ));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(Error::InvalidModel(format!(
                    "probability vector sums to {sum}, expected 1"
                )));
            }
            Ok(())
        };
        match &self.kind {
            ToyLMKind::Iid { probs } => check(probs),
            ToyLMKind::Schedule { steps } => {
                if steps.is_empty() {
                    return Err(Error::InvalidModel("schedule needs at least one step".into()));
                }
                steps.iter().try_for_each(|p| check(p))
            }
            ToyLMKind::Markov {
                order,
                entries,
                fallback,
            } => {
                check(fallback)?;
                for (ctx, probs) in entries {
                    if ctx.len() > *order {
                        return Err(Error::InvalidModel(format!(
                            "markov context of length {} exceeds order {order}",
                            ctx.len()
                        )));
                    }
                    if ctx.iter().any(|&t| t >= self.vocab.len()) {
                        return Err(Error::InvalidModel("markov context token out of range".into()));
                    }
                    check(probs)?;
                }
                Ok(())
            }
        }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn terminator(&self) -> usize {
        self.terminator
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn token_id(&self, token: &str) -> Result<usize> {
        self.vocab
            .iter()
            .position(|t| t == token)
            .ok_or_else(|| Error::UnknownToken(token.to_string()))
    }

    /// Next-token distribution given the tokens generated so far. Once only
    /// one slot remains before `max_len`, the terminator is forced so every
    /// sequence halts.
    pub fn next_dist(&self, context: &[usize]) -> Vec<f64> {
        if context.len() + 1 >= self.max_len {
            let mut one_hot = vec![0.0; self.vocab.len()];
            one_hot[self.terminator] = 1.0;
            return one_hot;
        }
        match &self.kind {
            ToyLMKind::Iid { probs } => probs.clone(),
            ToyLMKind::Schedule { steps } => steps[context.len().min(steps.len() - 1)].clone(),
            ToyLMKind::Markov {
                order,
                entries,
                fallback,
            } => {
                let start = context.len().saturating_sub(*order);
                let key = &context[start..];
                match entries.binary_search_by(|(ctx, _)| ctx.as_slice().cmp(key)) {
                    Ok(i) => entries[i].1.clone(),
                    Err(_) => fallback.clone(),
                }
            }
        }
    }

    /// Check that `seq` is a well-formed halting sequence for this model:
    /// in-vocab tokens, a single terminator at the end, within `max_len`.
    pub fn validate_sequence(&self, seq: &[usize]) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::InvalidModel("empty sequence".into()));
        }
        if seq.len() > self.max_len {
            return Err(Error::InvalidModel(format!(
                "sequence of length {} exceeds max_len {}",
                seq.len(),
                self.max_len
            )));
        }
        for (i, &tok) in seq.iter().enumerate() {
            if tok >= self.vocab.len() {
                return Err(Error::UnknownToken(format!("token id {tok}")));
            }
            let is_last = i + 1 == seq.len();
            if (tok == self.terminator) != is_last {
                return Err(Error::InvalidModel(
                    "terminator must appear exactly once, at the end".into(),
                ));
            }
        }
        Ok(())
    }

    /// Exact chain-rule log probability of a terminator-ending sequence.
    /// Returns negative infinity when some step has probability zero.
    pub fn sequence_logprob(&self, seq: &[usize]) -> Result<f64> {
        self.validate_sequence(seq)?;
        let mut ln_p = 0.0;
        for (t, &tok) in seq.iter().enumerate() {
            let p = self.next_dist(&seq[..t])[tok];
            ln_p += p.ln();
        }
        Ok(ln_p)
    }

    /// Map token names to ids.
    pub fn encode(&self, tokens: &[String]) -> Result<Vec<usize>> {
        tokens.iter().map(|t| self.token_id(t)).collect()
    }

    pub fn decode_tokens(&self, seq: &[usize]) -> Vec<String> {
        seq.iter().map(|&t| self.vocab[t].clone()).collect()
    }

    /// Enumerate every halting sequence together with its log probability.
    ///
    /// Guarded by `|vocab|^max_len <= 1e8`; exact oracles are expected to
    /// finish in minutes on a laptop, not to page through astronomically
    /// many states.
    pub fn enumerate_sequences(&self) -> Result<Vec<(Vec<usize>, f64)>> {
        let states = (self.vocab.len() as f64).powi(self.max_len as i32);
        if states > ENUMERATION_GUARD {
            return Err(Error::EnumerationGuard {
                states,
                guard: ENUMERATION_GUARD,
            });
        }
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        self.enumerate_rec(&mut prefix, 0.0, &mut out);
        Ok(out)
    }

    fn enumerate_rec(&self, prefix: &mut Vec<usize>, ln_p: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        let dist = self.next_dist(prefix);
        for (tok, &p) in dist.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let ln_next = ln_p + p.ln();
            if tok == self.terminator {
                let mut seq = prefix.clone();
                seq.push(tok);
                out.push((seq, ln_next));
            } else {
                prefix.push(tok);
                self.enumerate_rec(prefix, ln_next, out);
                prefix.pop();
            }
        }
    }
}

// --- serde spec (token names instead of ids) -------------------------------

#[derive(Serialize, Deserialize)]
struct ToyLmSpec {
    vocab: Vec<String>,
    terminator: String,
    max_len: usize,
    dist: DistSpec,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DistSpec {
    Iid {
        probs: Vec<f64>,
    },
    Schedule {
        steps: Vec<Vec<f64>>,
    },
    Markov {
        order: usize,
        entries: Vec<MarkovEntrySpec>,
        fallback: Vec<f64>,
    },
}

#[derive(Serialize, Deserialize)]
struct MarkovEntrySpec {
    context: Vec<String>,
    probs: Vec<f64>,
}

impl TryFrom<ToyLmSpec> for ToyLM {
    type Error = Error;

    fn try_from(spec: ToyLmSpec) -> Result<Self> {
        let kind = match spec.dist {
            DistSpec::Iid { probs } => ToyLMKind::Iid { probs },
            DistSpec::Schedule { steps } => ToyLMKind::Schedule { steps },
            DistSpec::Markov {
                order,
                entries,
                fallback,
            } => {
                let mut ids = Vec::with_capacity(entries.len());
                for e in entries {
                    let ctx = e
                        .context
                        .iter()
                        .map(|t| {
                            spec.vocab
                                .iter()
                                .position(|v| v == t)
                                .ok_or_else(|| Error::UnknownToken(t.clone()))
                        })
                        .collect::<Result<Vec<usize>>>()?;
                    ids.push((ctx, e.probs));
                }
                ids.sort_by(|a, b| a.0.cmp(&b.0));
                ToyLMKind::Markov {
                    order,
                    entries: ids,
                    fallback,
                }
            }
        };
        ToyLM::new(spec.vocab, &spec.terminator.clone(), spec.max_len, kind)
    }
}

impl From<ToyLM> for ToyLmSpec {
    fn from(lm: ToyLM) -> Self {
        let dist = match &lm.kind {
            ToyLMKind::Iid { probs } => DistSpec::Iid {
                probs: probs.clone(),
            },
            ToyLMKind::Schedule { steps } => DistSpec::Schedule {
                steps: steps.clone(),
            },
            ToyLMKind::Markov {
                order,
                entries,
                fallback,
            } => DistSpec::Markov {
                order: *order,
                entries: entries
                    .iter()
                    .map(|(ctx, probs)| MarkovEntrySpec {
                        context: ctx.iter().map(|&t| lm.vocab[t].clone()).collect(),
                        probs: probs.clone(),
                    })
                    .collect(),
                fallback: fallback.clone(),
            },
        };
        ToyLmSpec {
            terminator: lm.vocab[lm.terminator].clone(),
            vocab: lm.vocab,
            max_len: lm.max_len,
            dist,
        }
    }
}

// --- problems ----------------------------------------------------------------

/// A toy model plus its declared correct-solution set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ToyProblemSpec", into = "ToyProblemSpec")]
pub struct ToyProblem {
    pub problem_id: String,
    pub lm: ToyLM,
    correct: Vec<Vec<usize>>,
    min_solution_len: usize,
}

#[derive(Serialize, Deserialize)]
struct ToyProblemSpec {
    problem_id: String,
    lm: ToyLM,
    correct_set: Vec<Vec<String>>,
}

impl TryFrom<ToyProblemSpec> for ToyProblem {
    type Error = Error;

    fn try_from(spec: ToyProblemSpec) -> Result<Self> {
        let correct = spec
            .correct_set
            .iter()
            .map(|seq| spec.lm.encode(seq))
            .collect::<Result<Vec<_>>>()?;
        ToyProblem::new(spec.problem_id, spec.lm, correct)
    }
}

impl From<ToyProblem> for ToyProblemSpec {
    fn from(p: ToyProblem) -> Self {
        ToyProblemSpec {
            problem_id: p.problem_id.clone(),
            correct_set: p
                .correct
                .iter()
                .map(|seq| p.lm.decode_tokens(seq))
                .collect(),
            lm: p.lm,
        }
    }
}

impl ToyProblem {
    pub fn new(problem_id: String, lm: ToyLM, mut correct: Vec<Vec<usize>>) -> Result<Self> {
        if correct.is_empty() {
            return Err(Error::InvalidModel(format!(
                "problem {problem_id} has an empty correct set"
            )));
        }
        correct.sort();
        correct.dedup();
        for seq in &correct {
            lm.validate_sequence(seq)?;
        }
        let min_solution_len = correct.iter().map(Vec::len).min().unwrap();
        Ok(Self {
            problem_id,
            lm,
            correct,
            min_solution_len,
        })
    }

    pub fn correct_set(&self) -> &[Vec<usize>] {
        &self.correct
    }

    pub fn solution_count(&self) -> usize {
        self.correct.len()
    }

    pub fn min_solution_len(&self) -> usize {
        self.min_solution_len
    }

    /// Shortest member, ties broken lexicographically (the set is sorted).
    pub fn designated_solution(&self) -> &[usize] {
        self.correct
            .iter()
            .filter(|s| s.len() == self.min_solution_len)
            .min_by(|a, b| a.cmp(b))
            .unwrap()
    }

    pub fn is_correct(&self, seq: &[usize]) -> bool {
        self.correct.binary_search_by(|s| s.as_slice().cmp(seq)).is_ok()
    }

    /// Log of the total probability mass on the correct set.
    pub fn ln_correct_mass(&self) -> Result<f64> {
        let ln_terms = self
            .correct
            .iter()
            .map(|seq| self.lm.sequence_logprob(seq))
            .collect::<Result<Vec<f64>>>()?;
        Ok(log_sum_exp(&ln_terms))
    }

    /// Exact generation complexity `N = 1 / sum_correct P(y)`.
    pub fn enumerate_complexity(&self) -> Result<ComplexityEstimate> {
        let ln_mass = self.ln_correct_mass()?;
        if ln_mass == f64::NEG_INFINITY {
            return Err(Error::Undefined(format!(
                "correct set of problem {} has zero probability",
                self.problem_id
            )));
        }
        Ok(ComplexityEstimate::exact(-ln_mass))
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let hi = terms.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&x| (x - hi).exp()).sum();
    hi + sum.ln()
}

// --- complexity estimates ------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityMethod {
    ExactEnumeration,
    MonteCarlo,
}

/// Generation complexity with its provenance.
///
/// Exact estimates carry no interval. A Monte Carlo run with zero correct
/// samples is reported as a rule-of-three lower bound with `censored = true`
/// rather than as a number pretending to be exact.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComplexityEstimate {
    pub value: f64,
    pub ln_value: f64,
    pub method: ComplexityMethod,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_samples: Option<u64>,
    pub n_correct: Option<u64>,
    pub censored: bool,
}

impl ComplexityEstimate {
    pub fn exact(ln_value: f64) -> Self {
        Self {
            value: ln_value.exp(),
            ln_value,
            method: ComplexityMethod::ExactEnumeration,
            ci_low: None,
            ci_high: None,
            n_samples: None,
            n_correct: None,
            censored: false,
        }
    }

    /// Product estimate for solving the parts in separate contexts.
    pub fn product(&self, other: &Self) -> Self {
        let method = if self.method == ComplexityMethod::ExactEnumeration
            && other.method == ComplexityMethod::ExactEnumeration
        {
            ComplexityMethod::ExactEnumeration
        } else {
            ComplexityMethod::MonteCarlo
        };
        let lo = match (self.ci_low, other.ci_low) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(self.value) * b.unwrap_or(other.value)),
        };
        // a censored side has no finite upper bound
        let hi = if self.censored || other.censored {
            None
        } else {
            match (self.ci_high, other.ci_high) {
                (None, None) => None,
                (a, b) => Some(a.unwrap_or(self.value) * b.unwrap_or(other.value)),
            }
        };
        Self {
            value: self.value * other.value,
            ln_value: self.ln_value + other.ln_value,
            method,
            ci_low: lo,
            ci_high: hi,
            n_samples: None,
            n_correct: None,
            censored: self.censored || other.censored,
        }
    }
}

/// Exact complexity of solving both problems independently: the product of
/// the standalone complexities.
pub fn multi_agent_complexity(p1: &ToyProblem, p2: &ToyProblem) -> Result<ComplexityEstimate> {
    Ok(p1.enumerate_complexity()?.product(&p2.enumerate_complexity()?))
}

// --- decoding --------------------------------------------------------------------

/// Anything that exposes a per-step token distribution and a correctness
/// predicate; implemented by standalone problems and by screened composites.
pub trait StepModel: Sync {
    fn vocab_len(&self) -> usize;
    fn terminator(&self) -> usize;
    fn max_steps(&self) -> usize;
    /// Distribution over the next token given the generated prefix.
    fn step_dist(&self, context: &[usize], step: usize) -> Vec<f64>;
    fn is_correct(&self, seq: &[usize]) -> bool;
}

impl StepModel for ToyProblem {
    fn vocab_len(&self) -> usize {
        self.lm.vocab_len()
    }

    fn terminator(&self) -> usize {
        self.lm.terminator()
    }

    fn max_steps(&self) -> usize {
        self.lm.max_len()
    }

    fn step_dist(&self, context: &[usize], _step: usize) -> Vec<f64> {
        self.lm.next_dist(context)
    }

    fn is_correct(&self, seq: &[usize]) -> bool {
        ToyProblem::is_correct(self, seq)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SamplerConfig {
    pub temperature: f64,
    pub nucleus_p: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            nucleus_p: 0.95,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::OutOfRange {
                name: "temperature",
                value: self.temperature,
                expected: "a positive finite real",
            });
        }
        if !(self.nucleus_p > 0.0 && self.nucleus_p <= 1.0) {
            return Err(Error::OutOfRange {
                name: "nucleus_p",
                value: self.nucleus_p,
                expected: "(0, 1]",
            });
        }
        Ok(())
    }
}

/// One nucleus (top-p) draw: keep the smallest prefix of tokens, sorted by
/// descending probability, whose mass reaches `nucleus_p`; renormalize and
/// sample. A single token already above the threshold is therefore chosen
/// deterministically.
pub fn nucleus_step<R: Rng>(dist: &[f64], cfg: &SamplerConfig, rng: &mut R) -> usize {
    let mut weights: Vec<(usize, f64)> = if (cfg.temperature - 1.0).abs() < 1e-15 {
        dist.iter().cloned().enumerate().collect()
    } else {
        let inv_t = 1.0 / cfg.temperature;
        let scaled: Vec<f64> = dist.iter().map(|&p| if p > 0.0 { p.powf(inv_t) } else { 0.0 }).collect();
        let z: f64 = scaled.iter().sum();
        scaled.iter().map(|&w| w / z).enumerate().collect()
    };
    // descending probability, index ascending on ties, so the nucleus is
    // identical on every run
    weights.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cut = weights.len();
    let mut acc = 0.0;
    for (i, &(_, p)) in weights.iter().enumerate() {
        acc += p;
        if acc >= cfg.nucleus_p - 1e-15 {
            cut = i + 1;
            break;
        }
    }
    let nucleus = &weights[..cut];
    let mass: f64 = nucleus.iter().map(|&(_, p)| p).sum();
    let mut u = rng.gen::<f64>() * mass;
    for &(tok, p) in nucleus {
        u -= p;
        if u <= 0.0 {
            return tok;
        }
    }
    nucleus[cut - 1].0
}

/// Autoregressive sample under nucleus truncation; stops at the terminator.
pub fn sample_decode<R: Rng>(model: &dyn StepModel, cfg: &SamplerConfig, rng: &mut R) -> Vec<usize> {
    let mut seq = Vec::new();
    for step in 0..model.max_steps() {
        let dist = model.step_dist(&seq, step);
        let tok = nucleus_step(&dist, cfg, rng);
        seq.push(tok);
        if tok == model.terminator() {
            break;
        }
    }
    seq
}

/// Monte Carlo generation complexity: sample `n_samples` sequences, count the
/// correct ones, invert the pass rate. The 95% Wilson interval on the pass
/// rate maps to an interval on N.
pub fn mc_complexity(
    model: &dyn StepModel,
    n_samples: usize,
    cfg: &SamplerConfig,
    master_seed: u64,
) -> Result<ComplexityEstimate> {
    if n_samples == 0 {
        return Err(Error::OutOfRange {
            name: "n_samples",
            value: 0.0,
            expected: "at least 1",
        });
    }
    cfg.validate()?;
    let hits = exec::indexed_map(n_samples, |i| {
        let mut rng = derive_rng(master_seed, &[STREAM_DECODE, i as u64]);
        let seq = sample_decode(model, cfg, &mut rng);
        model.is_correct(&seq) as u64
    });
    let n_correct: u64 = hits.iter().sum();
    let n = n_samples as u64;
    if n_correct == 0 {
        // rule of three: pass rate <= 3/n at 95%, so N >= n/3
        let lb = n as f64 / 3.0;
        return Ok(ComplexityEstimate {
            value: lb,
            ln_value: lb.ln(),
            method: ComplexityMethod::MonteCarlo,
            ci_low: Some(lb),
            ci_high: None,
            n_samples: Some(n),
            n_correct: Some(0),
            censored: true,
        });
    }
    let value = n as f64 / n_correct as f64;
    let (p_lo, p_hi) = stats::wilson_interval(n_correct, n, stats::Z_95);
    Ok(ComplexityEstimate {
        value,
        ln_value: value.ln(),
        method: ComplexityMethod::MonteCarlo,
        ci_low: Some(1.0 / p_hi),
        ci_high: if p_lo > 0.0 { Some(1.0 / p_lo) } else { None },
        n_samples: Some(n),
        n_correct: Some(n_correct),
        censored: false,
    })
}

/// Single-solution chain problem: the correct solution repeats the first
/// vocabulary token `len - 1` times and terminates, and the correct
/// continuation has probability `p_correct` at every step (the final
/// terminator step included).
pub fn chain_problem(
    problem_id: &str,
    p_correct: f64,
    vocab_size: usize,
    len: usize,
) -> Result<ToyProblem> {
    if !(p_correct > 0.0 && p_correct < 1.0) {
        return Err(Error::OutOfRange {
            name: "p_correct",
            value: p_correct,
            expected: "(0, 1)",
        });
    }
    if vocab_size < 3 {
        return Err(Error::InvalidModel("chain problems need vocab_size >= 3".into()));
    }
    if len < 2 {
        return Err(Error::InvalidModel("chain problems need len >= 2".into()));
    }
    let vocab: Vec<String> = (0..vocab_size - 1)
        .map(|i| format!("t{i}"))
        .chain(std::iter::once("$".to_string()))
        .collect();
    let term = vocab_size - 1;
    let others = vocab_size - 2;
    // steps before the last: mass on the chain token, remainder spread over
    // the other non-terminator tokens
    let mut early = vec![0.0; vocab_size];
    early[0] = p_correct;
    for slot in early.iter_mut().take(others + 1).skip(1) {
        *slot = (1.0 - p_correct) / others as f64;
    }
    // final step: the terminator carries p_correct, everything else shares
    let mut last = vec![0.0; vocab_size];
    for slot in last.iter_mut().take(others + 1) {
        *slot = (1.0 - p_correct) / (others + 1) as f64;
    }
    last[term] = p_correct;
    let mut steps = vec![early; len - 1];
    steps.push(last);
    let lm = ToyLM::new(vocab, "$", len + 4, ToyLMKind::Schedule { steps })?;
    let mut solution = vec![0usize; len - 1];
    solution.push(term);
    ToyProblem::new(problem_id.to_string(), lm, vec![solution])
}
