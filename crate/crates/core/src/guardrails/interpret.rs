use serde::{Deserialize, Serialize};

use super::{check_intensity, effort, CountingModel, GuardrailConstants};
use crate::classifiers::{ModelParams, Neighbor, PathStep, Prediction, TrainedModel};
use crate::datasets::preprocess;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub feature: usize,
    /// Forward-difference derivative of the score per unit of the feature.
    pub derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "trace", rename_all = "snake_case")]
pub enum Interpretation {
    /// Root-to-leaf split sequence for the first `⌈intensity·trees⌉` trees.
    DecisionPaths(Vec<Vec<PathStep>>),
    /// The `⌈intensity·k⌉` nearest training rows.
    Neighbors(Vec<Neighbor>),
    /// Score sensitivity of the first `⌈intensity·p⌉` features.
    Sensitivities(Vec<Sensitivity>),
}

pub fn interpret(
    model: &TrainedModel,
    sample: &[f64],
    intensity: f64,
    consts: &GuardrailConstants,
) -> Result<Interpretation> {
    let base = model.predict(sample)?;
    interpret_with(&CountingModel::new(model), sample, base, intensity, consts)
}

pub(crate) fn interpret_with(
    probe: &CountingModel<'_>,
    sample: &[f64],
    base: Prediction,
    intensity: f64,
    consts: &GuardrailConstants,
) -> Result<Interpretation> {
    check_intensity(intensity)?;
    let model = probe.model;
    Ok(match &model.params {
        ModelParams::Rf(forest) => {
            let x = preprocess(sample, model.meta.t)?;
            let count = effort(intensity, forest.trees.len());
            Interpretation::DecisionPaths(forest.trees.iter().take(count).map(|t| t.decision_path(&x)).collect())
        }
        ModelParams::Knn(knn) => {
            let x = preprocess(sample, model.meta.t)?;
            Interpretation::Neighbors(knn.nearest(&x, effort(intensity, knn.k)))
        }
        ModelParams::Svm(_) | ModelParams::Nn(_) => {
            let count = effort(intensity, sample.len());
            let mut x = sample.to_vec();
            let mut out = Vec::with_capacity(count);
            for j in 0..count {
                let h = consts.sensitivity_step * model.meta.feature_scale[j];
                x[j] = sample[j] + h;
                let shifted = probe.predict(&x)?.score;
                x[j] = sample[j];
                out.push(Sensitivity { feature: j, derivative: (shifted - base.score) / h });
            }
            Interpretation::Sensitivities(out)
        }
    })
}
