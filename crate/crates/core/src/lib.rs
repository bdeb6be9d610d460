//! Core library for studying how in-context noise suppresses the probability
//! of correct continuations during autoregressive decoding.
//!
//! The crate has three layers:
//!
//! * scalar theory ([`noise_math`]): the renormalizing term
//!   `log(eps + (1-eps)e^x)`, its mean `Delta` and deviation `sigma` under a
//!   symmetric bounded noise law, Bennett-rate length thresholds, and the
//!   induced bound factor `e^{Delta*L/4}` on generation complexity;
//! * simulation ([`toylm`], [`screen`]): exactly enumerable toy autoregressive
//!   models, a screened composition operator that injects logit noise, nucleus
//!   decoding, and exact / Monte Carlo generation-complexity measurement;
//! * analytics ([`trace`], [`compose`]): extraction of per-step noise from
//!   recorded logprob traces, distribution diagnostics, `Delta(eps)` /
//!   `sigma(eps)` curves, sequence-length regression, the hardness-ratio CDF,
//!   and composite-problem construction.
//!
//! Everything is deterministic given a master seed: parallel work derives
//! per-task generators by counter-based splitting ([`rng`]) and merges results
//! in canonical order, so outputs are identical at any worker count. The
//! `parallel` feature (on by default) backs the data-parallel loops with
//! rayon; without it the same code paths run sequentially.

pub mod compose;
pub mod error;
pub mod exec;
pub mod noise_math;
pub mod noise_model;
pub mod quad;
pub mod report;
pub mod rng;
pub mod screen;
pub mod stats;
pub mod toylm;
pub mod trace;

pub use error::{Error, Result};
pub use noise_math::{BoundParams, Estimate, EstimateMethod, RenormStats};
pub use noise_model::{Conformance, NoiseModel};
pub use screen::{NoiseCorrelation, NoiseInjection, ScreenedComposite, WeightSource};
pub use toylm::{ComplexityEstimate, ComplexityMethod, SamplerConfig, ToyLM, ToyProblem};
