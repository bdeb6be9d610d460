//! Screened composition of two toy problems.
//!
//! The composite decodes the first problem's solution and then the second's,
//! but every step sees the standalone logits plus a noise draw. Per-step
//! suppression of the correct continuation, exact generation complexity under
//! a frozen noise realization, and the floor `e^{Delta L / 4}` separating the
//! composite from the product of the parts are all measurable here.
//!
//! Two injection surfaces are provided:
//!
//! * [`NoiseInjection::PerToken`] draws one value per vocabulary token per
//!   step, the mechanism-level picture; the weighted step noise is then a
//!   probability-weighted average of pairwise differences.
//! * [`NoiseInjection::ScalarIncorrect`] draws one value per step and adds it
//!   to every token that does not continue a correct solution. The weighted
//!   step noise then equals the draw itself, so measured suppression can be
//!   compared against quadrature values for the configured noise law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::noise_math::{self, EstimateMethod};
use crate::noise_model::{Conformance, NoiseModel};
use crate::rng::{derive_rng, STREAM_NOISE};
use crate::toylm::{log_sum_exp, ComplexityEstimate, StepModel, ToyProblem};
use crate::trace::{TraceStep, Variant};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCorrelation {
    /// Fresh draw(s) at every decoding step.
    #[default]
    IidPerStep,
    /// One draw reused across all steps of a sequence.
    FrozenPerSequence,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseInjection {
    /// Independent draw per vocabulary token.
    PerToken,
    /// One draw per step added to all non-continuation tokens.
    #[default]
    ScalarIncorrect,
}

/// Which probabilities weight the incorrect-minus-correct noise average:
/// those of the distribution being perturbed (standalone) or those observed
/// after perturbation (composite).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    #[default]
    Standalone,
    Composite,
}

/// Two problems decoded in one context with noise injected into the logits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScreenedComposite {
    pub first: ToyProblem,
    pub second: ToyProblem,
    pub noise: NoiseModel,
    #[serde(default)]
    pub correlation: NoiseCorrelation,
    #[serde(default)]
    pub injection: NoiseInjection,
}

impl ScreenedComposite {
    pub fn new(
        first: ToyProblem,
        second: ToyProblem,
        noise: NoiseModel,
        correlation: NoiseCorrelation,
        injection: NoiseInjection,
    ) -> Result<Self> {
        if first.lm.vocab() != second.lm.vocab() || first.lm.terminator() != second.lm.terminator()
        {
            return Err(Error::InvalidModel(
                "composite parts must share one vocabulary and terminator".into(),
            ));
        }
        noise.validate()?;
        Ok(Self {
            first,
            second,
            noise,
            correlation,
            injection,
        })
    }

    pub fn vocab_len(&self) -> usize {
        self.first.lm.vocab_len()
    }

    pub fn terminator(&self) -> usize {
        self.first.lm.terminator()
    }

    /// Combined minimal solution length L1 + L2.
    pub fn min_total_len(&self) -> usize {
        self.first.min_solution_len() + self.second.min_solution_len()
    }

    /// Concatenation of the parts' designated (shortest) solutions.
    pub fn designated_solution(&self) -> Vec<usize> {
        let mut seq = self.first.designated_solution().to_vec();
        seq.extend_from_slice(self.second.designated_solution());
        seq
    }

    /// The composite correct set is the concatenation of every correct pair.
    pub fn correct_pairs(&self) -> impl Iterator<Item = (&[usize], &[usize])> {
        self.first.correct_set().iter().flat_map(move |y1| {
            self.second
                .correct_set()
                .iter()
                .map(move |y2| (y1.as_slice(), y2.as_slice()))
        })
    }

    /// Total number of composite solutions |C1| * |C2|.
    pub fn solution_count(&self) -> usize {
        self.first.solution_count() * self.second.solution_count()
    }

    /// Split a composite sequence at the first terminator into its parts and
    /// validate each against its problem.
    pub fn split(&self, seq: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let term = self.terminator();
        let cut = seq
            .iter()
            .position(|&t| t == term)
            .ok_or_else(|| Error::InvalidModel("composite sequence has no terminator".into()))?;
        let y1 = seq[..=cut].to_vec();
        let y2 = seq[cut + 1..].to_vec();
        self.first.lm.validate_sequence(&y1)?;
        self.second.lm.validate_sequence(&y2)?;
        Ok((y1, y2))
    }

    /// Freeze one noise realization. Draw indices depend only on
    /// `(master_seed, seed_index)`, never on scheduling.
    pub fn realize(&self, master_seed: u64, seed_index: u64) -> Realization<'_> {
        let total_steps = self.first.lm.max_len() + self.second.lm.max_len();
        let vocab = self.vocab_len();
        let steps_to_draw = match self.correlation {
            NoiseCorrelation::IidPerStep => total_steps,
            NoiseCorrelation::FrozenPerSequence => 1,
        };
        let draws = match self.injection {
            NoiseInjection::PerToken => {
                let mut vectors = Vec::with_capacity(total_steps);
                for step in 0..steps_to_draw {
                    let mut rng = derive_rng(master_seed, &[STREAM_NOISE, seed_index, step as u64]);
                    vectors.push(self.noise.sample_noise_vector(vocab, &mut rng));
                }
                while vectors.len() < total_steps {
                    let v = vectors[0].clone();
                    vectors.push(v);
                }
                Draws::Vectors(vectors)
            }
            NoiseInjection::ScalarIncorrect => {
                let mut scalars = Vec::with_capacity(total_steps);
                for step in 0..steps_to_draw {
                    let mut rng = derive_rng(master_seed, &[STREAM_NOISE, seed_index, step as u64]);
                    scalars.push(self.noise.sample(&mut rng));
                }
                while scalars.len() < total_steps {
                    scalars.push(scalars[0]);
                }
                Draws::Scalars(scalars)
            }
        };
        Realization {
            composite: self,
            draws,
        }
    }
}

#[derive(Clone, Debug)]
enum Draws {
    Vectors(Vec<Vec<f64>>),
    Scalars(Vec<f64>),
}

/// A composite with its noise frozen: a fully deterministic autoregressive
/// model, so sequence probabilities and complexities are exact given the
/// realization.
pub struct Realization<'a> {
    composite: &'a ScreenedComposite,
    draws: Draws,
}

/// Which sub-problem is active for a given generated prefix.
struct Phase<'a> {
    problem: &'a ToyProblem,
    local: Vec<usize>,
    done: bool,
}

impl<'a> Realization<'a> {
    fn phase(&self, context: &[usize]) -> Phase<'a> {
        let term = self.composite.terminator();
        match context.iter().position(|&t| t == term) {
            None => Phase {
                problem: &self.composite.first,
                local: context.to_vec(),
                done: false,
            },
            Some(cut) => {
                let rest = &context[cut + 1..];
                let done = rest.contains(&term);
                Phase {
                    problem: &self.composite.second,
                    local: rest.to_vec(),
                    done,
                }
            }
        }
    }

    /// Tokens that continue some correct solution of the active problem from
    /// the current local prefix.
    fn correct_continuations(problem: &ToyProblem, local: &[usize]) -> Vec<usize> {
        let mut next: Vec<usize> = problem
            .correct_set()
            .iter()
            .filter(|sol| sol.len() > local.len() && sol.starts_with(local))
            .map(|sol| sol[local.len()])
            .collect();
        next.sort_unstable();
        next.dedup();
        next
    }

    /// Noisy next-token distribution for the composite at this prefix.
    pub fn noisy_step_dist(&self, context: &[usize]) -> Vec<f64> {
        let phase = self.phase(context);
        let base = phase.problem.lm.next_dist(&phase.local);
        if phase.done || self.composite.noise.is_degenerate() {
            return base;
        }
        let step = context.len();
        match &self.draws {
            Draws::Vectors(vectors) => screened_step_dist(&base, &vectors[step]),
            Draws::Scalars(scalars) => {
                let x = scalars[step];
                if x == 0.0 {
                    return base;
                }
                let cont = Self::correct_continuations(phase.problem, &phase.local);
                if cont.is_empty() {
                    // off every correct path; the perturbation direction is
                    // undefined there and suppression no longer applies
                    return base;
                }
                let mut noise = vec![x; base.len()];
                for &tok in &cont {
                    noise[tok] = 0.0;
                }
                screened_step_dist(&base, &noise)
            }
        }
    }

    /// Exact log probability of a composite sequence under this realization.
    pub fn sequence_logprob(&self, seq: &[usize]) -> Result<f64> {
        let (y1, y2) = self.composite.split(seq)?;
        debug_assert_eq!(y1.len() + y2.len(), seq.len());
        let mut ln_p = 0.0;
        for t in 0..seq.len() {
            let dist = self.noisy_step_dist(&seq[..t]);
            ln_p += dist[seq[t]].ln();
        }
        Ok(ln_p)
    }

    /// Log mass on the composite correct set.
    pub fn ln_correct_mass(&self) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.composite.solution_count());
        for (y1, y2) in self.composite.correct_pairs() {
            let mut seq = y1.to_vec();
            seq.extend_from_slice(y2);
            terms.push(self.sequence_logprob(&seq)?);
        }
        Ok(log_sum_exp(&terms))
    }

    /// Exact generation complexity of the composite given the realization.
    pub fn enumerate_complexity(&self) -> Result<ComplexityEstimate> {
        let ln_mass = self.ln_correct_mass()?;
        if ln_mass == f64::NEG_INFINITY {
            return Err(Error::Undefined(
                "composite correct set has zero probability".into(),
            ));
        }
        Ok(ComplexityEstimate::exact(-ln_mass))
    }
}

impl StepModel for Realization<'_> {
    fn vocab_len(&self) -> usize {
        self.composite.vocab_len()
    }

    fn terminator(&self) -> usize {
        self.composite.terminator()
    }

    fn max_steps(&self) -> usize {
        self.composite.first.lm.max_len() + self.composite.second.lm.max_len()
    }

    fn step_dist(&self, context: &[usize], _step: usize) -> Vec<f64> {
        self.noisy_step_dist(context)
    }

    fn is_correct(&self, seq: &[usize]) -> bool {
        match self.composite.split(seq) {
            Ok((y1, y2)) => {
                self.composite.first.is_correct(&y1) && self.composite.second.is_correct(&y2)
            }
            Err(_) => false,
        }
    }
}

/// Decoding in the composite halts at the *second* terminator; the first one
/// separates the parts. [`StepModel::step_dist`] handles the phase switch,
/// this helper runs the outer loop.
pub fn sample_composite_decode<R: rand::Rng>(
    realization: &Realization<'_>,
    cfg: &crate::toylm::SamplerConfig,
    rng: &mut R,
) -> Vec<usize> {
    let term = realization.terminator();
    let mut seq = Vec::new();
    let mut terminators = 0;
    for step in 0..realization.max_steps() {
        let dist = realization.step_dist(&seq, step);
        let tok = crate::toylm::nucleus_step(&dist, cfg, rng);
        seq.push(tok);
        if tok == term {
            terminators += 1;
            if terminators == 2 {
                break;
            }
        }
    }
    seq
}

/// softmax(log(p) + noise): tokens with zero standalone probability stay at
/// zero. An all-zero noise vector returns the input unchanged.
pub fn screened_step_dist(standalone: &[f64], noise: &[f64]) -> Vec<f64> {
    assert_eq!(standalone.len(), noise.len());
    if noise.iter().all(|&x| x == 0.0) {
        return standalone.to_vec();
    }
    let logits: Vec<f64> = standalone
        .iter()
        .zip(noise.iter())
        .map(|(&p, &x)| if p > 0.0 { p.ln() + x } else { f64::NEG_INFINITY })
        .collect();
    let hi = logits.iter().fold(f64::NEG_INFINITY, |m, &l| m.max(l));
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - hi).exp()).collect();
    let z: f64 = out.iter().sum();
    for v in &mut out {
        *v /= z;
    }
    out
}

/// Probability-weighted average of incorrect-minus-correct noise:
/// `sum_{i != c} P_i (X_i - X_c) / sum_{i != c} P_i`.
///
/// Undefined when the correct token holds all the mass.
pub fn weighted_noise_x(probs: &[f64], noise: &[f64], correct: usize) -> Result<f64> {
    if probs.len() < 2 || probs.len() != noise.len() || correct >= probs.len() {
        return Err(Error::InvalidModel(
            "weighted noise needs matching vectors with at least 2 tokens".into(),
        ));
    }
    let rest: f64 = probs
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != correct)
        .map(|(_, &p)| p)
        .sum();
    if rest <= 0.0 {
        return Err(Error::Undefined(
            "correct token holds probability 1; weighted noise undefined".into(),
        ));
    }
    let acc: f64 = probs
        .iter()
        .zip(noise.iter())
        .enumerate()
        .filter(|&(i, _)| i != correct)
        .map(|(_, (&p, &x))| p * (x - noise[correct]))
        .sum();
    Ok(acc / rest)
}

/// One decoding step of a screened composite, with everything needed to
/// check the per-step suppression bound.
#[derive(Clone, Debug, Serialize)]
pub struct DecodeStepRecord {
    pub step_index: usize,
    pub probs_standalone: Vec<f64>,
    pub probs_composite: Vec<f64>,
    pub noise_vector: Vec<f64>,
    pub correct_token_index: usize,
    pub weighted_noise_x: f64,
}

/// Assemble a step record from the standalone distribution and a noise
/// vector, computing the screened distribution and the weighted noise.
pub fn make_step_record(
    step_index: usize,
    standalone: &[f64],
    noise: &[f64],
    correct: usize,
    weights: WeightSource,
) -> Result<DecodeStepRecord> {
    let composite = screened_step_dist(standalone, noise);
    let weight_probs = match weights {
        WeightSource::Standalone => standalone,
        WeightSource::Composite => composite.as_slice(),
    };
    let x = weighted_noise_x(weight_probs, noise, correct)?;
    Ok(DecodeStepRecord {
        step_index,
        probs_standalone: standalone.to_vec(),
        probs_composite: composite,
        noise_vector: noise.to_vec(),
        correct_token_index: correct,
        weighted_noise_x: x,
    })
}

// --- screening experiment -----------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Confidence floor for the premise check and the quadrature values.
    pub epsilon: f64,
    pub n_seeds: usize,
    pub master_seed: u64,
    /// Failure probability at which the length threshold is echoed.
    pub fail_prob: f64,
    #[serde(default)]
    pub weight_source: WeightSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            n_seeds: 100,
            master_seed: 0,
            fail_prob: 0.1,
            weight_source: WeightSource::Standalone,
        }
    }
}

/// One noise realization's worth of measurements.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRow {
    pub seed: u64,
    pub l_total: u64,
    pub ln_n_composite: f64,
    pub ln_n_product: f64,
    /// log(N_composite / (N1 * N2))
    pub log_ratio: f64,
    /// Mean per-step suppression along the designated solution.
    pub delta_hat: f64,
    /// Steps of the designated solution whose correct-token probability lies
    /// outside [eps, 1-eps].
    pub premise_violations: u64,
    /// Whether the designated pair fell below the e^{Delta L / 4} floor.
    pub floor_violation: bool,
    /// Per-step log(P_standalone / P_composite) of the correct token.
    #[serde(skip)]
    pub step_log_ratios: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub epsilon: f64,
    pub l_total: u64,
    /// Quadrature mean of the renorm term for the configured noise at eps.
    pub delta_quad: f64,
    pub sigma_quad: f64,
    pub noise_bound: f64,
    pub noise_conformance: Conformance,
    /// Fraction of seeds violating the suppression floor.
    pub floor_violation_rate: f64,
    pub mean_log_ratio: f64,
    pub mean_delta_hat: f64,
    /// Length threshold at `fail_prob`, when the bound is not vacuous.
    pub length_threshold: Option<f64>,
    pub premise_violation_steps: u64,
}

/// Run `n_seeds` frozen-noise realizations of a composite and measure the
/// gap between the composite complexity and the product of the parts'.
pub fn run_screening_experiment(
    composite: &ScreenedComposite,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 0.5) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: cfg.epsilon,
            expected: "(0, 0.5)",
        });
    }
    if cfg.n_seeds == 0 {
        return Err(Error::OutOfRange {
            name: "n_seeds",
            value: 0.0,
            expected: "at least 1",
        });
    }
    let delta_quad =
        noise_math::delta_estimate(cfg.epsilon, &composite.noise, EstimateMethod::Quadrature)?
            .value;
    let sigma_quad =
        noise_math::sigma_estimate(cfg.epsilon, &composite.noise, EstimateMethod::Quadrature)?
            .value;
    let ln_n1 = -composite.first.ln_correct_mass()?;
    let ln_n2 = -composite.second.ln_correct_mass()?;
    let ln_n_product = ln_n1 + ln_n2;
    let designated = composite.designated_solution();
    let l_total = composite.min_total_len() as u64;
    let floor = delta_quad * l_total as f64 / 4.0;

    let rows: Vec<Result<ExperimentRow>> = exec::indexed_map(cfg.n_seeds, |seed| {
        let realization = composite.realize(cfg.master_seed, seed as u64);
        let ln_n_composite = -realization.ln_correct_mass()?;
        let log_ratio = ln_n_composite - ln_n_product;

        // per-step suppression along the designated solution
        let mut step_log_ratios = Vec::with_capacity(designated.len());
        let mut premise_violations = 0u64;
        let mut designated_ratio = 0.0;
        for t in 0..designated.len() {
            let ctx = &designated[..t];
            let phase = realization.phase(ctx);
            let p0 = phase.problem.lm.next_dist(&phase.local)[designated[t]];
            let noisy = realization.noisy_step_dist(ctx)[designated[t]];
            let r = p0.ln() - noisy.ln();
            step_log_ratios.push(r);
            designated_ratio += r;
            if p0 < cfg.epsilon || p0 > 1.0 - cfg.epsilon {
                premise_violations += 1;
            }
        }
        let delta_hat = designated_ratio / designated.len() as f64;
        let floor_violation = designated_ratio < floor;
        Ok(ExperimentRow {
            seed: seed as u64,
            l_total,
            ln_n_composite,
            ln_n_product,
            log_ratio,
            delta_hat,
            premise_violations,
            floor_violation,
            step_log_ratios,
        })
    });
    let rows: Vec<ExperimentRow> = rows.into_iter().collect::<Result<_>>()?;

    let n = rows.len() as f64;
    let floor_violation_rate = rows.iter().filter(|r| r.floor_violation).count() as f64 / n;
    let mean_log_ratio = rows.iter().map(|r| r.log_ratio).sum::<f64>() / n;
    let mean_delta_hat = rows.iter().map(|r| r.delta_hat).sum::<f64>() / n;
    let premise_violation_steps = rows.iter().map(|r| r.premise_violations).sum();
    let length_threshold = noise_math::RenormStats::new(
        cfg.epsilon,
        delta_quad,
        sigma_quad * sigma_quad,
        composite.noise.bound().max(f64::MIN_POSITIVE),
    )
    .ok()
    .and_then(|s| noise_math::length_threshold(&s, cfg.fail_prob).ok());

    Ok(ExperimentReport {
        rows,
        epsilon: cfg.epsilon,
        l_total,
        delta_quad,
        sigma_quad,
        noise_bound: composite.noise.bound(),
        noise_conformance: composite.noise.conformance_check(),
        floor_violation_rate,
        mean_log_ratio,
        mean_delta_hat,
        length_threshold,
        premise_violation_steps,
    })
}

/// Synthesize aligned standalone/composite trace records along the
/// designated solution of one realization. Token ids are vocabulary indices;
/// logits are log probabilities; zero-probability tokens are left out of the
/// top-k list.
pub fn synthesize_paired_traces(
    composite: &ScreenedComposite,
    master_seed: u64,
    seed_index: u64,
    pair_id: &str,
) -> Vec<TraceStep> {
    let realization = composite.realize(master_seed, seed_index);
    let designated = composite.designated_solution();
    let mut out = Vec::with_capacity(designated.len() * 2);
    for t in 0..designated.len() {
        let ctx = &designated[..t];
        let phase = realization.phase(ctx);
        let standalone = phase.problem.lm.next_dist(&phase.local);
        let noisy = realization.noisy_step_dist(ctx);
        let correct = designated[t] as i64;
        for (variant, dist) in [(Variant::Standalone, &standalone), (Variant::Composite, &noisy)] {
            let mut topk: Vec<(i64, f64)> = dist
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(tok, &p)| (tok as i64, p.ln()))
                .collect();
            topk.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let chosen = topk[0].0;
            out.push(TraceStep {
                pair_id: pair_id.to_string(),
                variant,
                step_index: t as u64,
                correct_token_id: correct,
                topk,
                chosen_token_id: chosen,
                skip_prefix_flag: false,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toylm::{chain_problem, SamplerConfig};

    fn tiny_composite(noise: NoiseModel, injection: NoiseInjection) -> ScreenedComposite {
        let p1 = chain_problem("p1", 0.5, 3, 4).unwrap();
        let p2 = chain_problem("p2", 0.4, 3, 5).unwrap();
        ScreenedComposite::new(p1, p2, noise, NoiseCorrelation::IidPerStep, injection).unwrap()
    }

    #[test]
    fn screened_dist_examples() {
        // zero noise leaves the distribution untouched
        let d = screened_step_dist(&[0.6, 0.3, 0.1], &[0.0, 0.0, 0.0]);
        assert_eq!(d, vec![0.6, 0.3, 0.1]);
        // boosting one of two equal tokens by ln 3 gives 0.75 / 0.25
        let d = screened_step_dist(&[0.5, 0.5], &[3f64.ln(), 0.0]);
        assert!((d[0] - 0.75).abs() < 1e-12);
        assert!((d[1] - 0.25).abs() < 1e-12);
        // a constant shift changes nothing
        let base = [0.6, 0.3, 0.1];
        let d = screened_step_dist(&base, &[0.7, 0.7, 0.7]);
        for (a, b) in d.iter().zip(base.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // zero-probability tokens stay at zero
        let d = screened_step_dist(&[0.7, 0.0, 0.3], &[1.0, 50.0, -1.0]);
        assert_eq!(d[1], 0.0);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_noise_examples() {
        // equal noise everywhere averages to zero
        let x = weighted_noise_x(&[0.5, 0.3, 0.2], &[0.4, 0.4, 0.4], 0).unwrap();
        assert_eq!(x, 0.0);
        // hand-computed weighted average
        let x = weighted_noise_x(&[0.7, 0.2, 0.1], &[1.0, 0.5, -0.5], 0).unwrap();
        assert!((x - (-0.25 / 0.3)).abs() < 1e-12);
        // noise +a on the correct token alone shifts the average to -a
        let x = weighted_noise_x(&[0.6, 0.25, 0.15], &[0.9, 0.0, 0.0], 0).unwrap();
        assert!((x + 0.9).abs() < 1e-12);
        // certainty on the correct token is undefined
        assert!(weighted_noise_x(&[1.0, 0.0], &[0.0, 1.0], 0).is_err());
    }

    #[test]
    fn zero_noise_composite_matches_standalone_product_exactly() {
        let c = tiny_composite(NoiseModel::DegenerateZero, NoiseInjection::ScalarIncorrect);
        let realization = c.realize(1, 0);
        let seq = c.designated_solution();
        let lp = realization.sequence_logprob(&seq).unwrap();
        let lp1 = c.first.lm.sequence_logprob(c.first.designated_solution()).unwrap();
        let lp2 = c.second.lm.sequence_logprob(c.second.designated_solution()).unwrap();
        assert_eq!(lp, lp1 + lp2);
        // complexity equals the product exactly
        let n_comp = realization.enumerate_complexity().unwrap();
        let n_prod = crate::toylm::multi_agent_complexity(&c.first, &c.second).unwrap();
        assert_eq!(n_comp.ln_value, n_prod.ln_value);
    }

    #[test]
    fn scalar_injection_reduces_to_closed_form() {
        // every step of the designated path has a single correct
        // continuation, so each step's suppression is exactly
        // log(p + (1-p) e^x) for the drawn x
        let c = tiny_composite(
            NoiseModel::TwoPoint {
                magnitude: 3f64.ln(),
            },
            NoiseInjection::ScalarIncorrect,
        );
        let realization = c.realize(17, 4);
        let seq = c.designated_solution();
        let scalars = match &realization.draws {
            Draws::Scalars(s) => s.clone(),
            _ => unreachable!(),
        };
        for t in 0..seq.len() {
            let phase = realization.phase(&seq[..t]);
            let p0 = phase.problem.lm.next_dist(&phase.local)[seq[t]];
            let noisy = realization.noisy_step_dist(&seq[..t])[seq[t]];
            let expected =
                crate::noise_math::apply_step_noise(p0, scalars[t]).unwrap();
            assert!(
                (noisy - expected).abs() < 1e-14,
                "step {t}: {noisy} vs {expected}"
            );
        }
    }

    #[test]
    fn per_token_injection_respects_amgm_bound() {
        let c = tiny_composite(
            NoiseModel::TruncatedGaussian {
                std: 1.5,
                bound: 4.0,
            },
            NoiseInjection::PerToken,
        );
        for seed in 0..50 {
            let realization = c.realize(3, seed);
            let seq = c.designated_solution();
            for t in 0..seq.len() {
                let phase = realization.phase(&seq[..t]);
                let standalone = phase.problem.lm.next_dist(&phase.local);
                let p0 = standalone[seq[t]];
                if p0 >= 1.0 {
                    continue;
                }
                let vectors = match &realization.draws {
                    Draws::Vectors(v) => v,
                    _ => unreachable!(),
                };
                let record =
                    make_step_record(t, &standalone, &vectors[t], seq[t], WeightSource::Standalone)
                        .unwrap();
                let bound =
                    crate::noise_math::apply_step_noise(p0, record.weighted_noise_x).unwrap();
                assert!(
                    record.probs_composite[seq[t]] <= bound + 1e-12,
                    "seed {seed} step {t}"
                );
            }
        }
    }

    #[test]
    fn experiment_zero_noise_ratio_one() {
        let c = tiny_composite(NoiseModel::DegenerateZero, NoiseInjection::ScalarIncorrect);
        let report = run_screening_experiment(
            &c,
            &ExperimentConfig {
                epsilon: 0.1,
                n_seeds: 10,
                master_seed: 5,
                fail_prob: 0.1,
                weight_source: WeightSource::Standalone,
            },
        )
        .unwrap();
        for row in &report.rows {
            assert_eq!(row.log_ratio, 0.0);
            assert_eq!(row.delta_hat, 0.0);
        }
        assert_eq!(report.floor_violation_rate, 0.0);
        assert!(report.length_threshold.is_none(), "zero noise has no bound");
    }

    #[test]
    fn experiment_two_point_matches_closed_form_mean() {
        // constant p = 0.5 per step, two-point ln 3 noise: the mean total
        // log-ratio converges to L * ln(4/3)/2
        let p1 = chain_problem("a", 0.5, 3, 50).unwrap();
        let p2 = chain_problem("b", 0.5, 3, 50).unwrap();
        let c = ScreenedComposite::new(
            p1,
            p2,
            NoiseModel::TwoPoint {
                magnitude: 3f64.ln(),
            },
            NoiseCorrelation::IidPerStep,
            NoiseInjection::ScalarIncorrect,
        )
        .unwrap();
        let n_seeds = 400;
        let report = run_screening_experiment(
            &c,
            &ExperimentConfig {
                epsilon: 0.4,
                n_seeds,
                master_seed: 11,
                fail_prob: 0.1,
                weight_source: WeightSource::Standalone,
            },
        )
        .unwrap();
        let l = 100.0;
        let expected = l * 0.14384103622589046;
        // 3 standard errors of the seed mean
        let sd = {
            let m = report.mean_log_ratio;
            let var = report
                .rows
                .iter()
                .map(|r| (r.log_ratio - m) * (r.log_ratio - m))
                .sum::<f64>()
                / (n_seeds as f64 - 1.0);
            var.sqrt()
        };
        let tol = 3.0 * sd / (n_seeds as f64).sqrt();
        assert!(
            (report.mean_log_ratio - expected).abs() < tol,
            "mean {} vs expected {expected} (tol {tol})",
            report.mean_log_ratio
        );
        // no premise violations: every step has p0 = 0.5
        assert_eq!(report.premise_violation_steps, 0);
    }

    #[test]
    fn experiment_rows_deterministic() {
        let c = tiny_composite(
            NoiseModel::TruncatedGaussian {
                std: 1.5,
                bound: 4.0,
            },
            NoiseInjection::ScalarIncorrect,
        );
        let cfg = ExperimentConfig {
            epsilon: 0.1,
            n_seeds: 20,
            master_seed: 42,
            fail_prob: 0.1,
            weight_source: WeightSource::Standalone,
        };
        let a = run_screening_experiment(&c, &cfg).unwrap();
        let b = run_screening_experiment(&c, &cfg).unwrap();
        for (x, y) in a.rows.iter().zip(b.rows.iter()) {
            assert_eq!(x.ln_n_composite, y.ln_n_composite);
            assert_eq!(x.log_ratio, y.log_ratio);
        }
    }

    #[test]
    fn frozen_correlation_reuses_one_draw() {
        let c = ScreenedComposite::new(
            chain_problem("a", 0.5, 3, 6).unwrap(),
            chain_problem("b", 0.5, 3, 6).unwrap(),
            NoiseModel::Uniform { bound: 4.0 },
            NoiseCorrelation::FrozenPerSequence,
            NoiseInjection::ScalarIncorrect,
        )
        .unwrap();
        let r = c.realize(9, 2);
        match &r.draws {
            Draws::Scalars(s) => {
                assert!(s.windows(2).all(|w| w[0] == w[1]));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn composite_decode_halts_after_both_parts() {
        let c = tiny_composite(
            NoiseModel::Uniform { bound: 2.0 },
            NoiseInjection::ScalarIncorrect,
        );
        let r = c.realize(21, 0);
        let mut rng = crate::rng::derive_rng(21, &[crate::rng::STREAM_DECODE, 0]);
        let seq = sample_composite_decode(&r, &SamplerConfig::default(), &mut rng);
        let term = c.terminator();
        let count = seq.iter().filter(|&&t| t == term).count();
        assert_eq!(count, 2, "seq = {seq:?}");
    }

    #[test]
    fn synthesized_traces_align() {
        let c = tiny_composite(
            NoiseModel::TruncatedGaussian {
                std: 1.5,
                bound: 4.0,
            },
            NoiseInjection::ScalarIncorrect,
        );
        let steps = synthesize_paired_traces(&c, 7, 0, "pair-0");
        let l = c.min_total_len();
        assert_eq!(steps.len(), 2 * l);
        for pair in steps.chunks(2) {
            assert_eq!(pair[0].variant, Variant::Standalone);
            assert_eq!(pair[1].variant, Variant::Composite);
            assert_eq!(pair[0].step_index, pair[1].step_index);
            assert_eq!(pair[0].correct_token_id, pair[1].correct_token_id);
            // topk sorted descending
            for w in pair[0].topk.windows(2) {
                assert!(w[0].1 >= w[1].1);
            }
        }
    }
}
