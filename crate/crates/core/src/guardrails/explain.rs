//! Local surrogate attributions: perturb the input, re-score each perturbed
//! copy, fit a ridge-regularised linear model to the scores and rank the
//! features by the magnitude of their slope.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_intensity, effort, CountingModel, GuardrailConstants};
use crate::classifiers::TrainedModel;
use crate::error::invalid;
use crate::model::linalg::ridge_with_intercept;
use crate::rng::seeded;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature: usize,
    /// Surrogate slope per unit of the feature's training scale.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// Top `⌈intensity·p⌉` features by `|weight|`, descending.
    pub attributions: Vec<Attribution>,
    /// Perturbed samples scored (one predict call each).
    pub samples: usize,
}

pub fn explain(
    model: &TrainedModel,
    sample: &[f64],
    intensity: f64,
    consts: &GuardrailConstants,
    rng_seed: u64,
) -> Result<Explanation> {
    explain_with(&CountingModel::new(model), sample, intensity, consts, rng_seed)
}

/// The perturbation offsets (in feature-scale units) drawn for `rng_seed`.
pub(crate) fn perturbations(p: usize, count: usize, sigma: f64, rng_seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(rng_seed);
    let normal = Normal::new(0.0, sigma).expect("sigma validated positive");
    (0..count).map(|_| (0..p).map(|_| normal.sample(&mut rng)).collect()).collect()
}

pub(crate) fn explain_with(
    probe: &CountingModel<'_>,
    sample: &[f64],
    intensity: f64,
    consts: &GuardrailConstants,
    rng_seed: u64,
) -> Result<Explanation> {
    check_intensity(intensity)?;
    let model = probe.model;
    let p = model.input_dim();
    if sample.len() != p {
        return Err(invalid("sample dimensionality does not match the model"));
    }
    let k = effort(intensity, consts.explain_samples_max);
    let keep = effort(intensity, p);
    let scale = &model.meta.feature_scale;
    let offsets = perturbations(p, k, consts.explain_sigma, rng_seed);
    let mut scores = Vec::with_capacity(k);
    let mut x = vec![0.0; p];
    for delta in &offsets {
        for j in 0..p {
            x[j] = sample[j] + delta[j] * scale[j];
        }
        scores.push(probe.predict(&x)?.score);
    }
    let beta = ridge_with_intercept(&offsets, &scores, consts.explain_ridge);
    let mut attributions: Vec<Attribution> = (0..p).map(|j| Attribution { feature: j, weight: beta[j + 1] }).collect();
    attributions.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then(a.feature.cmp(&b.feature)));
    attributions.truncate(keep);
    Ok(Explanation { attributions, samples: k })
}
