//! Scalar theory of screening noise.
//!
//! A decoding step whose correct token has standalone probability `p` and
//! receives weighted logit noise `x` keeps probability
//! `p / (p + (1-p)e^x)`; the log of the denominator,
//! `renorm(eps, x) = log(eps + (1-eps)e^x)`, is the per-step suppression
//! factor. Its mean `Delta` and standard deviation `sigma` under the noise
//! law, together with the noise bound `M`, feed a Bennett-type concentration
//! bound: once the combined solution length exceeds
//! `M^2 / (sigma^2 h(3 Delta M / 4 sigma^2)) * ln(1/fail_prob)`, the whole
//! sequence is suppressed by at least `e^{Delta L / 4}` with probability
//! `1 - fail_prob`. With `N` interchangeable solutions the log argument
//! becomes `ln(N/fail_prob)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::noise_model::NoiseModel;
use crate::quad::DEFAULT_ABS_TOL;
use crate::rng::{derive_rng, STREAM_MC};

/// (eps, Delta, sigma^2, M) bundle describing one noise regime.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct RenormStats {
    /// Confidence floor: correct-token probabilities are assumed inside
    /// [epsilon, 1 - epsilon].
    pub epsilon: f64,
    /// Mean of the renormalizing term under the noise law.
    pub delta: f64,
    /// Variance of the renormalizing term.
    pub sigma_sq: f64,
    /// Bound M on the weighted noise.
    pub noise_bound: f64,
}

impl RenormStats {
    pub fn new(epsilon: f64, delta: f64, sigma_sq: f64, noise_bound: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::OutOfRange {
                name: "epsilon",
                value: epsilon,
                expected: "(0, 0.5)",
            });
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta,
                expected: "a non-negative finite real",
            });
        }
        if !sigma_sq.is_finite() || sigma_sq < 0.0 {
            return Err(Error::OutOfRange {
                name: "sigma_sq",
                value: sigma_sq,
                expected: "a non-negative finite real",
            });
        }
        if !(noise_bound > 0.0) || !noise_bound.is_finite() {
            return Err(Error::OutOfRange {
                name: "noise_bound",
                value: noise_bound,
                expected: "a positive finite real",
            });
        }
        // |renorm(eps, x)| <= M on [-M, M], hence sigma^2 <= M^2
        if sigma_sq > noise_bound * noise_bound * (1.0 + 1e-12) {
            return Err(Error::OutOfRange {
                name: "sigma_sq",
                value: sigma_sq,
                expected: "at most noise_bound^2",
            });
        }
        Ok(Self {
            epsilon,
            delta,
            sigma_sq,
            noise_bound,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    fn require_non_degenerate(&self) -> Result<()> {
        if self.delta <= 0.0 || self.sigma_sq <= 0.0 {
            return Err(Error::VacuousBound(format!(
                "delta = {} and sigma^2 = {} must be strictly positive",
                self.delta, self.sigma_sq
            )));
        }
        Ok(())
    }
}

/// Failure probability, solution count and minimal combined length for the
/// multi-solution bound.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundParams {
    pub delta_prob: f64,
    pub solution_count: u64,
    pub min_len: u64,
}

impl BoundParams {
    pub fn new(delta_prob: f64, solution_count: u64, min_len: u64) -> Result<Self> {
        check_prob_open("delta_prob", delta_prob)?;
        if solution_count == 0 {
            return Err(Error::OutOfRange {
                name: "solution_count",
                value: 0.0,
                expected: "at least 1",
            });
        }
        if min_len == 0 {
            return Err(Error::OutOfRange {
                name: "min_len",
                value: 0.0,
                expected: "at least 1",
            });
        }
        Ok(Self {
            delta_prob,
            solution_count,
            min_len,
        })
    }
}

fn check_prob_open(name: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: p,
            expected: "(0, 1)",
        })
    }
}

/// log(eps + (1-eps)e^x), evaluated in log-sum-exp form so large |x| cannot
/// overflow. Zero at x = 0 and strictly increasing in x.
pub fn renorm_term(epsilon: f64, x: f64) -> Result<f64> {
    check_prob_open("epsilon", epsilon)?;
    if !x.is_finite() {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
            expected: "a finite real",
        });
    }
    Ok(renorm_term_unchecked(epsilon, x))
}

#[inline]
pub(crate) fn renorm_term_unchecked(epsilon: f64, x: f64) -> f64 {
    // eps + (1 - eps) = 1 identically; return 0 without floating residue
    if x == 0.0 {
        return 0.0;
    }
    let a = epsilon.ln();
    let b = (1.0 - epsilon).ln() + x;
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Bennett rate function h(x) = (1+x) ln(1+x) - x for x >= 0.
pub fn bennett_h(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
            expected: "a non-negative finite real",
        });
    }
    Ok((1.0 + x) * x.ln_1p() - x)
}

/// How an expectation was computed, with its error-bar convention.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimateMethod {
    /// Adaptive quadrature; error bar is the accumulated rule difference.
    Quadrature,
    /// Monte Carlo; error bar is one standard error.
    MonteCarlo { n: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error_bar: f64,
    pub method: EstimateMethod,
}

/// Mean of the renormalizing term under `model`.
///
/// Degenerate noise returns exactly 0 with a zero error bar. For any
/// non-degenerate symmetric model the result is strictly positive.
pub fn delta_estimate(epsilon: f64, model: &NoiseModel, method: EstimateMethod) -> Result<Estimate> {
    check_prob_open("epsilon", epsilon)?;
    model.validate()?;
    if model.is_degenerate() {
        return Ok(Estimate {
            value: 0.0,
            error_bar: 0.0,
            method,
        });
    }
    match method {
        EstimateMethod::Quadrature => {
            let (value, error_bar) =
                model.expect(|x| renorm_term_unchecked(epsilon, x), DEFAULT_ABS_TOL);
            Ok(Estimate {
                value,
                error_bar,
                method,
            })
        }
        EstimateMethod::MonteCarlo { n, seed } => {
            if n == 0 {
                return Err(Error::OutOfRange {
                    name: "n",
                    value: 0.0,
                    expected: "at least 1",
                });
            }
            let (mean, var) = mc_moments(epsilon, model, n, seed);
            Ok(Estimate {
                value: mean,
                error_bar: (var / n as f64).sqrt(),
                method,
            })
        }
    }
}

/// Standard deviation of the renormalizing term; satisfies sigma <= M.
pub fn sigma_estimate(epsilon: f64, model: &NoiseModel, method: EstimateMethod) -> Result<Estimate> {
    check_prob_open("epsilon", epsilon)?;
    model.validate()?;
    if model.is_degenerate() {
        return Ok(Estimate {
            value: 0.0,
            error_bar: 0.0,
            method,
        });
    }
    match method {
        EstimateMethod::Quadrature => {
            let (m1, e1) = model.expect(|x| renorm_term_unchecked(epsilon, x), DEFAULT_ABS_TOL);
            let (m2, e2) = model.expect(
                |x| {
                    let f = renorm_term_unchecked(epsilon, x);
                    f * f
                },
                DEFAULT_ABS_TOL,
            );
            let var = (m2 - m1 * m1).max(0.0);
            let sigma = var.sqrt();
            // first-order propagation of the two rule errors onto sigma
            let var_err = e2 + 2.0 * m1.abs() * e1;
            let error_bar = if sigma > 0.0 {
                0.5 * var_err / sigma
            } else {
                var_err.sqrt()
            };
            Ok(Estimate {
                value: sigma,
                error_bar,
                method,
            })
        }
        EstimateMethod::MonteCarlo { n, seed } => {
            if n < 2 {
                return Err(Error::OutOfRange {
                    name: "n",
                    value: n as f64,
                    expected: "at least 2",
                });
            }
            let (_, var) = mc_moments(epsilon, model, n, seed);
            let sigma = var.sqrt();
            // SE of a sample standard deviation ~ s / sqrt(2(n-1))
            let error_bar = sigma / (2.0 * (n as f64 - 1.0)).sqrt();
            Ok(Estimate {
                value: sigma,
                error_bar,
                method,
            })
        }
    }
}

/// Monte Carlo mean and unbiased variance of the renorm term, reduced in a
/// worker-count-independent order.
fn mc_moments(epsilon: f64, model: &NoiseModel, n: usize, seed: u64) -> (f64, f64) {
    let sum = exec::chunked_sum(n, |r| {
        r.map(|i| {
            let mut rng = derive_rng(seed, &[STREAM_MC, i as u64]);
            renorm_term_unchecked(epsilon, model.sample(&mut rng))
        })
        .sum()
    });
    let mean = sum / n as f64;
    let ss = exec::chunked_sum(n, |r| {
        r.map(|i| {
            let mut rng = derive_rng(seed, &[STREAM_MC, i as u64]);
            let f = renorm_term_unchecked(epsilon, model.sample(&mut rng));
            (f - mean) * (f - mean)
        })
        .sum()
    });
    let var = if n > 1 { ss / (n as f64 - 1.0) } else { 0.0 };
    (mean, var)
}

/// Minimal combined solution length for the single-solution suppression
/// guarantee to hold with probability `1 - delta_prob`:
/// `M^2 / (sigma^2 h(3 Delta M / 4 sigma^2)) * ln(1/delta_prob)`.
pub fn length_threshold(stats: &RenormStats, delta_prob: f64) -> Result<f64> {
    check_prob_open("delta_prob", delta_prob)?;
    stats.require_non_degenerate()?;
    Ok(threshold_scale(stats)? * (1.0 / delta_prob).ln())
}

/// Multi-solution variant: the union over `N` solutions replaces
/// `ln(1/delta)` with `ln(N/delta)`.
pub fn length_threshold_multi(stats: &RenormStats, params: &BoundParams) -> Result<f64> {
    stats.require_non_degenerate()?;
    let ratio = params.solution_count as f64 / params.delta_prob;
    Ok(threshold_scale(stats)? * ratio.ln())
}

fn threshold_scale(stats: &RenormStats) -> Result<f64> {
    let m = stats.noise_bound;
    let arg = 3.0 * stats.delta * m / (4.0 * stats.sigma_sq);
    let h = bennett_h(arg)?;
    if h <= 0.0 {
        return Err(Error::VacuousBound(format!(
            "rate function vanishes at argument {arg}"
        )));
    }
    Ok(m * m / (stats.sigma_sq * h))
}

/// Suppression factor e^{Delta * L / 4} separating composite complexity from
/// the product of the parts' complexities.
pub fn hardness_bound_factor(stats: &RenormStats, total_len: f64) -> f64 {
    hardness_bound_log_factor(stats, total_len).exp()
}

/// Log of [`hardness_bound_factor`]; safe for lengths where the factor itself
/// overflows.
pub fn hardness_bound_log_factor(stats: &RenormStats, total_len: f64) -> f64 {
    stats.delta * total_len / 4.0
}

/// Exponent coefficient `(sigma^2 / M^2) h(3 Delta M / 4 sigma^2)` of the
/// admissible solution-count growth.
pub fn solution_count_coefficient(stats: &RenormStats) -> Result<f64> {
    stats.require_non_degenerate()?;
    Ok(1.0 / threshold_scale(stats)?)
}

/// Largest admissible solution count at combined length `total_len`:
/// `delta_prob * exp(total_len * coefficient)`.
pub fn max_solution_count(stats: &RenormStats, total_len: f64, delta_prob: f64) -> Result<f64> {
    check_prob_open("delta_prob", delta_prob)?;
    if !(total_len >= 0.0) {
        return Err(Error::OutOfRange {
            name: "total_len",
            value: total_len,
            expected: "a non-negative real",
        });
    }
    let coeff = solution_count_coefficient(stats)?;
    Ok(delta_prob * (total_len * coeff).exp())
}

/// Per-step effect of weighted noise `x` on a correct-token probability:
/// `p -> p / (p + (1-p)e^x)`, computed as `sigmoid(logit(p) - x)`.
pub fn apply_step_noise(p_correct: f64, noise_x: f64) -> Result<f64> {
    check_prob_open("p_correct", p_correct)?;
    if !noise_x.is_finite() {
        return Err(Error::OutOfRange {
            name: "noise_x",
            value: noise_x,
            expected: "a finite real",
        });
    }
    Ok(apply_step_noise_unchecked(p_correct, noise_x))
}

#[inline]
pub(crate) fn apply_step_noise_unchecked(p: f64, x: f64) -> f64 {
    let t = (p / (1.0 - p)).ln() - x;
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Quadrature-backed Delta and sigma for a model, bundled into stats with
/// M = model bound.
pub fn stats_from_model(epsilon: f64, model: &NoiseModel) -> Result<RenormStats> {
    let d = delta_estimate(epsilon, model, EstimateMethod::Quadrature)?;
    let s = sigma_estimate(epsilon, model, EstimateMethod::Quadrature)?;
    RenormStats::new(epsilon, d.value, s.value * s.value, model.bound())
}

/// Closed-form value of renorm(p, x) + renorm(p, -x):
/// `log(1 + p(1-p)(e^x + e^{-x} - 2))`, always >= 0 with equality iff x = 0.
pub fn renorm_pair_identity_rhs(p: f64, x: f64) -> f64 {
    let s = (0.5 * x).sinh();
    (4.0 * p * (1.0 - p) * s * s).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> EstimateMethod {
        EstimateMethod::Quadrature
    }

    #[test]
    fn renorm_basics() {
        // x = 0 leaves the probability unchanged
        assert_eq!(renorm_term(0.1, 0.0).unwrap(), 0.0);
        // 0.5 + 0.5 * 3 = 2
        let v = renorm_term(0.5, 3f64.ln()).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        // deep negative noise approaches the log(eps) floor
        let v = renorm_term(0.1, -10.0).unwrap();
        assert!((v - (-2.3021765770801730)).abs() < 1e-12, "v = {v}");
        // stable at extreme arguments
        assert!(renorm_term(0.1, 700.0).unwrap().is_finite());
        assert!(renorm_term(0.1, -700.0).unwrap().is_finite());
    }

    #[test]
    fn renorm_domain_errors() {
        assert!(renorm_term(0.0, 1.0).is_err());
        assert!(renorm_term(1.0, 1.0).is_err());
        assert!(renorm_term(-0.2, 1.0).is_err());
        assert!(renorm_term(0.5, f64::NAN).is_err());
    }

    #[test]
    fn renorm_monotone_in_x() {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..200 {
            let x = -10.0 + i as f64 * 0.1;
            let v = renorm_term(0.3, x).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn bennett_h_values() {
        assert_eq!(bennett_h(0.0).unwrap(), 0.0);
        assert!((bennett_h(1.0).unwrap() - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!((bennett_h(0.266667).unwrap() - 0.032759197677661713).abs() < 1e-12);
        assert!(bennett_h(-0.1).is_err());
    }

    #[test]
    fn bennett_h_increasing_and_convex() {
        let h = |x: f64| bennett_h(x).unwrap();
        let mut prev = 0.0;
        let mut prev_slope = 0.0;
        for i in 1..100 {
            let x = i as f64 * 0.05;
            let v = h(x);
            assert!(v > prev);
            let slope = (v - prev) / 0.05;
            assert!(slope >= prev_slope);
            prev = v;
            prev_slope = slope;
        }
    }

    #[test]
    fn delta_degenerate_is_exactly_zero() {
        let e = delta_estimate(0.37, &NoiseModel::DegenerateZero, quad()).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.error_bar, 0.0);
        let s = sigma_estimate(0.37, &NoiseModel::DegenerateZero, quad()).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn delta_two_point_closed_form() {
        let m = NoiseModel::TwoPoint {
            magnitude: 3f64.ln(),
        };
        let d = delta_estimate(0.5, &m, quad()).unwrap();
        // (1/2) log(4/3)
        assert!((d.value - 0.14384103622589046).abs() < 1e-14);
        assert_eq!(d.error_bar, 0.0);
        let s = sigma_estimate(0.5, &m, quad()).unwrap();
        // two-point deviation = |f(m) - f(-m)| / 2 = ln(3)/2
        assert!((s.value - 3f64.ln() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn delta_truncated_gaussian_matches_frozen_quadrature() {
        // values frozen from an independent high-precision quadrature
        let tg26 = NoiseModel::TruncatedGaussian {
            std: 2.0,
            bound: 6.0,
        };
        let d = delta_estimate(0.1, &tg26, quad()).unwrap();
        assert!((d.value - 0.203680486762).abs() < 1e-8, "d = {}", d.value);

        let tg154 = NoiseModel::TruncatedGaussian {
            std: 1.5,
            bound: 4.0,
        };
        let d2 = delta_estimate(0.1, &tg154, quad()).unwrap();
        assert!((d2.value - 0.107714965965).abs() < 1e-8);
        let s2 = sigma_estimate(0.1, &tg154, quad()).unwrap();
        assert!((s2.value - 1.229999428431).abs() < 1e-8);
        assert!(s2.value <= tg154.bound());

        let uni8 = NoiseModel::Uniform { bound: 8.0 };
        let d3 = delta_estimate(0.45, &uni8, quad()).unwrap();
        assert!((d3.value - 1.405852).abs() < 1e-5, "d3 = {}", d3.value);
        let s3 = sigma_estimate(0.45, &uni8, quad()).unwrap();
        assert!((s3.value - 2.603919).abs() < 1e-5);
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let m = NoiseModel::TruncatedGaussian {
            std: 1.5,
            bound: 4.0,
        };
        let q = delta_estimate(0.1, &m, quad()).unwrap();
        let mc = delta_estimate(
            0.1,
            &m,
            EstimateMethod::MonteCarlo {
                n: 200_000,
                seed: 11,
            },
        )
        .unwrap();
        assert!(
            (mc.value - q.value).abs() < 3.0 * mc.error_bar,
            "mc {} vs quad {} (3se = {})",
            mc.value,
            q.value,
            3.0 * mc.error_bar
        );
    }

    fn paper_scale_stats() -> RenormStats {
        RenormStats::new(0.1, 0.2, 1.5 * 1.5, 4.0).unwrap()
    }

    #[test]
    fn length_threshold_frozen_value() {
        let s = paper_scale_stats();
        let t = length_threshold(&s, (-1f64).exp()).unwrap();
        assert!((t - 217.07272215913208).abs() < 1e-9, "t = {t}");
        // linear in ln(1/delta)
        let t2 = length_threshold(&s, (-2f64).exp()).unwrap();
        assert!((t2 - 2.0 * t).abs() < 1e-9);
        // delta -> 1 sends the threshold to 0+
        let t3 = length_threshold(&s, 0.999999).unwrap();
        assert!(t3 > 0.0 && t3 < 1e-3);
    }

    #[test]
    fn length_threshold_multi_values() {
        let s = paper_scale_stats();
        let single = length_threshold(&s, (-1f64).exp()).unwrap();
        let p1 = BoundParams::new((-1f64).exp(), 1, 1).unwrap();
        assert!((length_threshold_multi(&s, &p1).unwrap() - single).abs() < 1e-12);
        let p100 = BoundParams::new((-1f64).exp(), 100, 1).unwrap();
        let t = length_threshold_multi(&s, &p100).unwrap();
        assert!((t - 1216.7295504376436).abs() < 1e-8, "t = {t}");
        assert!((t - single * (1.0 + 100f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn threshold_monotonicity() {
        let base = paper_scale_stats();
        let more_delta = RenormStats::new(0.1, 0.3, 2.25, 4.0).unwrap();
        let d = 0.2;
        assert!(length_threshold(&more_delta, d).unwrap() < length_threshold(&base, d).unwrap());
        assert!(length_threshold(&base, 0.4).unwrap() < length_threshold(&base, 0.1).unwrap());
        let p_small = BoundParams::new(0.2, 10, 1).unwrap();
        let p_big = BoundParams::new(0.2, 1000, 1).unwrap();
        assert!(
            length_threshold_multi(&base, &p_big).unwrap()
                > length_threshold_multi(&base, &p_small).unwrap()
        );
    }

    #[test]
    fn degenerate_stats_reject_with_vacuous_bound() {
        let s = RenormStats::new(0.1, 0.0, 1.0, 4.0).unwrap();
        assert!(matches!(
            length_threshold(&s, 0.5),
            Err(Error::VacuousBound(_))
        ));
        let s2 = RenormStats::new(0.1, 0.2, 0.0, 4.0).unwrap();
        assert!(matches!(
            max_solution_count(&s2, 10.0, 0.5),
            Err(Error::VacuousBound(_))
        ));
    }

    #[test]
    fn hardness_factor_values() {
        let s = paper_scale_stats();
        assert_eq!(hardness_bound_factor(&s, 0.0), 1.0);
        // 20 tokens at Delta = 0.2 cost one e-fold
        assert!((hardness_bound_factor(&s, 20.0) - 1f64.exp()).abs() < 1e-12);
        assert!((hardness_bound_log_factor(&s, 400.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn solution_count_bound_values() {
        let s = paper_scale_stats();
        let c = solution_count_coefficient(&s).unwrap();
        assert!((c - 0.004606751092691039).abs() < 1e-12, "c = {c}");
        let delta_prob = 0.5;
        let n = max_solution_count(&s, 1600.0, delta_prob).unwrap();
        assert!((n - delta_prob * 7.370801748305662f64.exp()).abs() < 1e-6);
        assert!((max_solution_count(&s, 0.0, 0.3).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn solution_count_boundary_inverts_threshold() {
        // N chosen on the boundary N = delta * e^{L * coeff} makes the
        // multi-solution threshold exactly L
        let s = paper_scale_stats();
        let delta_prob = 0.25;
        let l = 812.0;
        let n_boundary = max_solution_count(&s, l, delta_prob).unwrap();
        let scale = 1.0 / solution_count_coefficient(&s).unwrap();
        let t = scale * (n_boundary / delta_prob).ln();
        assert!((t - l).abs() < 1e-9);
    }

    #[test]
    fn apply_step_noise_values() {
        assert!((apply_step_noise(0.3, 0.0).unwrap() - 0.3).abs() < 1e-15);
        assert!((apply_step_noise(0.5, 3f64.ln()).unwrap() - 0.25).abs() < 1e-15);
        assert!((apply_step_noise(0.5, -(3f64.ln())).unwrap() - 0.75).abs() < 1e-15);
        assert!(apply_step_noise(0.0, 1.0).is_err());
        assert!(apply_step_noise(1.0, 1.0).is_err());
    }

    #[test]
    fn apply_step_noise_monotone() {
        // increasing in p, decreasing in x
        let f = |p: f64, x: f64| apply_step_noise(p, x).unwrap();
        assert!(f(0.6, 1.0) > f(0.4, 1.0));
        assert!(f(0.5, 2.0) < f(0.5, 1.0));
        let v = f(0.5, 0.7);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn pair_identity_rhs_nonnegative() {
        assert_eq!(renorm_pair_identity_rhs(0.3, 0.0), 0.0);
        for i in 1..50 {
            let x = i as f64 * 0.2;
            assert!(renorm_pair_identity_rhs(0.3, x) > 0.0);
        }
    }
}
