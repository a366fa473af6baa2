//! Randomised-response output privatisation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::GuardrailConstants;
use crate::classifiers::Prediction;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub flip_probability: f64,
    pub noise_half_width: f64,
}

/// Flips the label with probability `intensity · flip_ceiling` and adds
/// uniform noise of half-width `intensity · noise_scale` to the score,
/// clamped to `[0, 1]`. Intensity 0 is the identity.
pub fn privatize(score: f64, label: u8, intensity: f64, consts: &GuardrailConstants, rng_seed: u64) -> (f64, u8) {
    let (p, _) = privatize_with(Prediction { label, score }, intensity, consts, rng_seed);
    (p.score, p.label)
}

pub(crate) fn privatize_with(
    base: Prediction,
    intensity: f64,
    consts: &GuardrailConstants,
    rng_seed: u64,
) -> (Prediction, PrivacyReport) {
    let q = intensity * consts.privacy_flip_ceiling;
    let half_width = intensity * consts.privacy_noise_scale;
    let report = PrivacyReport { flip_probability: q, noise_half_width: half_width };
    if intensity <= 0.0 {
        return (base, report);
    }
    let mut rng = seeded(rng_seed);
    let flip = rng.random::<f64>() < q;
    let noise = rng.random_range(-1.0..=1.0) * half_width;
    let label = if flip { 1 - base.label } else { base.label };
    let score = (base.score + noise).clamp(0.0, 1.0);
    (Prediction { label, score }, report)
}
