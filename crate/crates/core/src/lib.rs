//! Latency and energy benchmarking for binary-classifier inference, plus the
//! additive cost equations fitted from the resulting measurements.
//!
//! The pipeline runs `datasets` → `classifiers` → `guardrails` →
//! `measurement` → `model`. The `cli` module wires it into the `infercost`
//! binary.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifiers;
pub mod cli;
pub mod datasets;
mod error;
mod fsutil;
pub mod guardrails;
pub mod measurement;
pub mod model;
mod rng;

pub use classifiers::{AlgorithmKind, Hyperparameters, OpCount, Prediction, TrainedModel};
pub use datasets::{DataType, Dataset};
pub use error::{Error, Result};
pub use guardrails::{FairnessWindow, GuardedPrediction, GuardrailConfig, GuardrailConstants};
pub use measurement::MeasurementRecord;
pub use model::{FitOptions, FittedEquation, PredictorInputs, Target};
pub use rng::derive_seed;
