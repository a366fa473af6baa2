use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_intensity, effort, CountingModel, GuardrailConstants};
use crate::classifiers::{Prediction, TrainedModel};
use crate::rng::seeded;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    /// Input finite and within the configured magnitude bound, and no probe
    /// flipped the label.
    pub stable: bool,
    pub in_bounds: bool,
    pub flips: usize,
    pub probes: usize,
}

pub fn safety_probe(
    model: &TrainedModel,
    sample: &[f64],
    intensity: f64,
    consts: &GuardrailConstants,
    rng_seed: u64,
) -> Result<SafetyReport> {
    let base = model.predict(sample)?;
    probe_with(&CountingModel::new(model), sample, base, intensity, consts, rng_seed)
}

/// Re-scores `⌈intensity·m_max⌉` copies of `sample`, each feature shifted
/// uniformly within `probe_radius` of its training scale, and counts label
/// flips against `base`.
pub(crate) fn probe_with(
    probe: &CountingModel<'_>,
    sample: &[f64],
    base: Prediction,
    intensity: f64,
    consts: &GuardrailConstants,
    rng_seed: u64,
) -> Result<SafetyReport> {
    check_intensity(intensity)?;
    let in_bounds = sample.iter().all(|v| v.is_finite() && v.abs() <= consts.safety_bound);
    let probes = effort(intensity, consts.safety_probes_max);
    let scale = &probe.model.meta.feature_scale;
    let mut rng = seeded(rng_seed);
    let mut x = vec![0.0; sample.len()];
    let mut flips = 0;
    for _ in 0..probes {
        for (j, xj) in x.iter_mut().enumerate() {
            let r = consts.probe_radius * scale[j];
            *xj = sample[j] + rng.random_range(-r..=r);
        }
        if probe.predict(&x)?.label != base.label {
            flips += 1;
        }
    }
    Ok(SafetyReport { stable: in_bounds && flips == 0, in_bounds, flips, probes })
}
