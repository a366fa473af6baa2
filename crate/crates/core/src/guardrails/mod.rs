//! Runtime responsible-AI guardrails wrapped around `predict`.
//!
//! Each guardrail is enabled by a positive intensity in `(0, 1]` that sets
//! the fraction of its maximum effort: explanation samples and feature
//! coverage, fairness window length, safety probes, interpretation coverage
//! and privacy noise. Guardrails run after the base prediction in the fixed
//! order safety, explainability, interpretability, fairness, privacy.

mod explain;
mod fairness;
mod interpret;
mod privacy;
mod safety;

use std::cell::Cell;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use explain::{explain, Attribution, Explanation};
pub use fairness::{audit_fairness, FairnessReport, FairnessWindow};
pub use interpret::{interpret, Interpretation, Sensitivity};
pub use privacy::{privatize, PrivacyReport};
pub use safety::{safety_probe, SafetyReport};

use crate::classifiers::{AlgorithmKind, OpCount, Prediction, TrainedModel};
use crate::error::invalid;
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Intensity per guardrail; `0` disables it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardrailConfig {
    #[serde(default)]
    pub expl: f64,
    #[serde(default)]
    pub fair: f64,
    #[serde(default)]
    pub interp: f64,
    #[serde(default)]
    pub safety: f64,
    #[serde(default)]
    pub privacy: f64,
}

/// Guardrail names in record/equation column order.
pub const GUARDRAIL_NAMES: [&str; 5] = ["expl", "fair", "interp", "safety", "privacy"];

impl GuardrailConfig {
    pub const OFF: GuardrailConfig = GuardrailConfig { expl: 0.0, fair: 0.0, interp: 0.0, safety: 0.0, privacy: 0.0 };

    pub fn new(expl: f64, fair: f64, interp: f64, safety: f64, privacy: f64) -> Result<Self> {
        GuardrailConfig::from_array([expl, fair, interp, safety, privacy])
    }

    pub fn from_array(values: [f64; 5]) -> Result<Self> {
        let cfg = GuardrailConfig {
            expl: values[0],
            fair: values[1],
            interp: values[2],
            safety: values[3],
            privacy: values[4],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Only guardrail `index` (in [`GUARDRAIL_NAMES`] order) at `intensity`.
    pub fn single(index: usize, intensity: f64) -> Result<Self> {
        let mut v = [0.0; 5];
        *v.get_mut(index).ok_or_else(|| invalid(format!("guardrail index {index} out of range")))? = intensity;
        GuardrailConfig::from_array(v)
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.expl, self.fair, self.interp, self.safety, self.privacy]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in GUARDRAIL_NAMES.iter().zip(self.as_array()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("guardrail intensity {name}={v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_off(&self) -> bool {
        self.as_array().iter().all(|&v| v == 0.0)
    }
}

/// Effort caps and noise magnitudes. Overridable from the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardrailConstants {
    /// Perturbed samples drawn by the explainer at intensity 1.
    pub explain_samples_max: usize,
    /// Perturbation standard deviation, in units of each feature's scale.
    pub explain_sigma: f64,
    pub explain_ridge: f64,
    /// Fairness window length at intensity 1.
    pub fairness_window_max: usize,
    /// Safety probes at intensity 1.
    pub safety_probes_max: usize,
    /// Safety probe radius, in units of each feature's scale.
    pub probe_radius: f64,
    /// Inputs with any magnitude above this are flagged out of bounds.
    pub safety_bound: f64,
    /// Finite-difference step for sensitivities, in units of feature scale.
    pub sensitivity_step: f64,
    /// Label flip probability at intensity 1.
    pub privacy_flip_ceiling: f64,
    /// Half-width of the uniform score noise at intensity 1.
    pub privacy_noise_scale: f64,
}

impl Default for GuardrailConstants {
    fn default() -> Self {
        GuardrailConstants {
            explain_samples_max: 64,
            explain_sigma: 1.0,
            explain_ridge: 1e-3,
            fairness_window_max: 1024,
            safety_probes_max: 32,
            probe_radius: 0.01,
            safety_bound: 1e6,
            sensitivity_step: 1e-4,
            privacy_flip_ceiling: 0.25,
            privacy_noise_scale: 0.1,
        }
    }
}

impl GuardrailConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("explain_sigma", self.explain_sigma),
            ("probe_radius", self.probe_radius),
            ("safety_bound", self.safety_bound),
            ("sensitivity_step", self.sensitivity_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("guardrail constant {name} must be positive, got {v}")));
            }
        }
        if self.explain_samples_max == 0 || self.fairness_window_max == 0 || self.safety_probes_max == 0 {
            return Err(invalid("guardrail effort caps must be at least 1"));
        }
        if !(0.0..=0.5).contains(&self.privacy_flip_ceiling) {
            return Err(invalid("privacy_flip_ceiling must lie in [0, 0.5]"));
        }
        if !(self.privacy_noise_scale >= 0.0) || !(self.explain_ridge >= 0.0) {
            return Err(invalid("privacy_noise_scale and explain_ridge must be non-negative"));
        }
        Ok(())
    }
}

/// `⌈intensity · cap⌉`, clamped to `[1, cap]` for positive intensity and 0
/// when disabled. Products within 1e-9 of an integer are not rounded up, so
/// 0.7 · 10 yields 7.
pub fn effort(intensity: f64, cap: usize) -> usize {
    if intensity <= 0.0 || cap == 0 {
        return 0;
    }
    let raw = intensity * cap as f64;
    ((raw - 1e-9).ceil() as usize).clamp(1, cap)
}

/// Counts every `predict` issued on behalf of a guardrail.
pub(crate) struct CountingModel<'a> {
    pub model: &'a TrainedModel,
    calls: Cell<usize>,
}

impl<'a> CountingModel<'a> {
    pub fn new(model: &'a TrainedModel) -> Self {
        CountingModel { model, calls: Cell::new(0) }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.calls.set(self.calls.get() + 1);
        self.model.predict(x)
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Completed(T),
    Failed(String),
}

impl<T> Outcome<T> {
    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Completed(v),
            Err(e) => Outcome::Failed(e.to_string()),
        }
    }

    pub fn completed(&self) -> Option<&T> {
        match self {
            Outcome::Completed(v) => Some(v),
            Outcome::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadMark {
    pub guardrail: String,
    pub elapsed_ns: u64,
    pub predict_calls: usize,
}

/// The output of [`guarded_predict`]. With every guardrail disabled its JSON
/// form is identical to that of the bare [`Prediction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardedPrediction {
    pub label: u8,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety: Option<Outcome<SafetyReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<Outcome<Explanation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpretation: Option<Outcome<Interpretation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fairness: Option<Outcome<FairnessReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyReport>,
    /// Predict calls beyond the base prediction.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub extra_predict_calls: usize,
    /// Diagnostic per-guardrail timings; not the benchmark latency.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overhead_marks: Vec<OverheadMark>,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl GuardedPrediction {
    pub fn prediction(&self) -> Prediction {
        Prediction { label: self.label, score: self.score }
    }
}

/// A guardrail configuration bound to its constants.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GuardrailStack {
    pub config: GuardrailConfig,
    pub constants: GuardrailConstants,
    /// Record per-guardrail timings in `overhead_marks`.
    pub record_marks: bool,
}

const SEED_SAFETY: u64 = 1;
const SEED_EXPLAIN: u64 = 2;
const SEED_PRIVACY: u64 = 5;

impl GuardrailStack {
    pub fn new(config: GuardrailConfig, constants: GuardrailConstants) -> Result<Self> {
        config.validate()?;
        constants.validate()?;
        Ok(GuardrailStack { config, constants, record_marks: false })
    }

    pub fn fairness_window(&self) -> FairnessWindow {
        FairnessWindow::new(effort(self.config.fair, self.constants.fairness_window_max))
    }

    /// Runs the base prediction and every enabled guardrail. Errors come
    /// only from the base prediction; guardrail faults are reported inside
    /// the output.
    pub fn run(
        &self,
        model: &TrainedModel,
        sample: &[f64],
        group: u8,
        window: &mut FairnessWindow,
        rng_seed: u64,
    ) -> Result<GuardedPrediction> {
        let base = model.predict(sample)?;
        let mut out = GuardedPrediction {
            label: base.label,
            score: base.score,
            safety: None,
            explanation: None,
            interpretation: None,
            fairness: None,
            privacy: None,
            extra_predict_calls: 0,
            overhead_marks: Vec::new(),
        };
        if self.config.is_off() {
            return Ok(out);
        }
        let cfg = &self.config;
        let consts = &self.constants;
        let probe = CountingModel::new(model);
        let mark = |out: &mut GuardedPrediction, name: &str, started: Instant, before: usize, after: usize| {
            if self.record_marks {
                out.overhead_marks.push(OverheadMark {
                    guardrail: name.to_string(),
                    elapsed_ns: started.elapsed().as_nanos() as u64,
                    predict_calls: after - before,
                });
            }
        };

        if cfg.safety > 0.0 {
            let (t0, c0) = (Instant::now(), probe.calls());
            let r = safety::probe_with(&probe, sample, base, cfg.safety, consts, derive_seed(rng_seed, SEED_SAFETY));
            out.safety = Some(Outcome::from_result(r));
            mark(&mut out, "safety", t0, c0, probe.calls());
        }
        if cfg.expl > 0.0 {
            let (t0, c0) = (Instant::now(), probe.calls());
            let r = explain::explain_with(&probe, sample, cfg.expl, consts, derive_seed(rng_seed, SEED_EXPLAIN));
            out.explanation = Some(Outcome::from_result(r));
            mark(&mut out, "expl", t0, c0, probe.calls());
        }
        if cfg.interp > 0.0 {
            let (t0, c0) = (Instant::now(), probe.calls());
            let r = interpret::interpret_with(&probe, sample, base, cfg.interp, consts);
            out.interpretation = Some(Outcome::from_result(r));
            mark(&mut out, "interp", t0, c0, probe.calls());
        }
        if cfg.fair > 0.0 {
            let (t0, c0) = (Instant::now(), probe.calls());
            let r = if group > 1 {
                Err(invalid(format!("group indicator must be 0 or 1, got {group}")))
            } else {
                Ok(window.audit(group, base.label))
            };
            out.fairness = Some(Outcome::from_result(r));
            mark(&mut out, "fair", t0, c0, probe.calls());
        }
        if cfg.privacy > 0.0 {
            let (t0, c0) = (Instant::now(), probe.calls());
            let (p, report) = privacy::privatize_with(base, cfg.privacy, consts, derive_seed(rng_seed, SEED_PRIVACY));
            out.label = p.label;
            out.score = p.score;
            out.privacy = Some(report);
            mark(&mut out, "privacy", t0, c0, probe.calls());
        }
        out.extra_predict_calls = probe.calls();
        Ok(out)
    }
}

/// [`GuardrailStack::run`] with default constants.
pub fn guarded_predict(
    model: &TrainedModel,
    sample: &[f64],
    group: u8,
    cfg: &GuardrailConfig,
    window: &mut FairnessWindow,
    rng_seed: u64,
) -> Result<GuardedPrediction> {
    GuardrailStack::new(*cfg, GuardrailConstants::default())?.run(model, sample, group, window, rng_seed)
}

/// Closed-form number of extra predict calls one guarded inference issues.
pub fn extra_predict_calls(model: &TrainedModel, cfg: &GuardrailConfig, consts: &GuardrailConstants) -> usize {
    let p = model.input_dim();
    let interp = match model.kind() {
        AlgorithmKind::Svm | AlgorithmKind::Nn => effort(cfg.interp, p),
        AlgorithmKind::Knn | AlgorithmKind::Rf => 0,
    };
    effort(cfg.safety, consts.safety_probes_max) + effort(cfg.expl, consts.explain_samples_max) + interp
}

/// Operations performed inside the guardrails themselves, excluding the
/// predict calls they issue.
pub fn guardrail_op_count(model: &TrainedModel, cfg: &GuardrailConfig, consts: &GuardrailConstants) -> OpCount {
    let p = model.input_dim() as u64;
    let mut ops = OpCount::default();
    if cfg.safety > 0.0 {
        let m = effort(cfg.safety, consts.safety_probes_max) as u64;
        ops += OpCount::new(m * p, m * p, p + m);
    }
    if cfg.expl > 0.0 {
        let k = effort(cfg.expl, consts.explain_samples_max) as u64;
        let rows = k + p;
        let cols = p + 1;
        let qr = 2 * rows * cols * cols;
        let rank = p * (64 - p.leading_zeros() as u64);
        ops += OpCount::new(k * p + qr, k * p + qr, rank);
    }
    if cfg.interp > 0.0 {
        ops += match &model.params {
            crate::classifiers::ModelParams::Rf(f) => {
                let trees = effort(cfg.interp, f.trees.len());
                OpCount::new(0, 0, f.trees.iter().take(trees).map(|t| t.depth as u64).sum())
            }
            crate::classifiers::ModelParams::Knn(k) => {
                let pe = model.meta.p_effective as u64;
                let n = k.rows() as u64;
                OpCount::new(n * pe, 2 * n * pe, n)
            }
            _ => {
                let m = effort(cfg.interp, p as usize) as u64;
                OpCount::new(m, 2 * m, 0)
            }
        };
    }
    if cfg.fair > 0.0 {
        ops += OpCount::new(2, 4, 2);
    }
    if cfg.privacy > 0.0 {
        ops += OpCount::new(2, 2, 3);
    }
    ops
}

pub(crate) fn check_intensity(intensity: f64) -> Result<()> {
    if intensity > 0.0 && intensity <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("guardrail intensity must lie in (0, 1], got {intensity}")))
    }
}
