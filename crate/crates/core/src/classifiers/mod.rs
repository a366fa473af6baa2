//! Trainable inference engines for the four classifier families and their
//! closed-form per-inference operation counts.

mod forest;
mod knn;
mod mlp;
mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use forest::{Forest, PathStep, Tree, TreeNode};
pub use knn::{KnnModel, Neighbor};
pub use mlp::Mlp;
pub use svm::{SvmKernel, SvmModel};

use crate::datasets::{effective_dim, preprocess, DataType, Dataset};
use crate::error::invalid;
use crate::{Error, Result};

/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgorithmKind {
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "NN")]
    Nn,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] = [AlgorithmKind::Svm, AlgorithmKind::Knn, AlgorithmKind::Rf, AlgorithmKind::Nn];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmKind::Svm => "SVM",
            AlgorithmKind::Knn => "KNN",
            AlgorithmKind::Rf => "RF",
            AlgorithmKind::Nn => "NN",
        }
    }

    /// Indicator vector over (SVM, KNN, RF, NN).
    pub fn one_hot(self) -> [u8; 4] {
        let mut v = [0; 4];
        v[self as usize] = 1;
        v
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "SVM" => Ok(AlgorithmKind::Svm),
            "KNN" => Ok(AlgorithmKind::Knn),
            "RF" => Ok(AlgorithmKind::Rf),
            "NN" => Ok(AlgorithmKind::Nn),
            _ => Err(invalid(format!("unknown algorithm {s:?} (expected SVM, KNN, RF or NN)"))),
        }
    }
}

/// Family hyperparameters. The defaults are the fixed treatment levels used
/// for every benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub k: usize,
    pub trees: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    pub min_samples_split: usize,
    pub hidden: usize,
    pub nn_epochs: usize,
    pub nn_learning_rate: f64,
    pub svm_kernel: SvmKernel,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            k: 5,
            trees: 16,
            max_depth: 8,
            bootstrap: true,
            min_samples_split: 2,
            hidden: 32,
            nn_epochs: 40,
            nn_learning_rate: 0.05,
            svm_kernel: SvmKernel::Linear,
            svm_lambda: 1e-3,
            svm_epochs: 20,
        }
    }
}

impl Hyperparameters {
    fn validate(&self, kind: AlgorithmKind, n: usize) -> Result<()> {
        match kind {
            AlgorithmKind::Knn => {
                if self.k == 0 || self.k.is_multiple_of(2) {
                    return Err(invalid(format!("k must be odd and positive, got {}", self.k)));
                }
                if self.k > n {
                    return Err(invalid(format!("k={} exceeds training size {n}", self.k)));
                }
            }
            AlgorithmKind::Rf => {
                if self.trees == 0 {
                    return Err(invalid("random forest needs at least one tree"));
                }
                if self.min_samples_split < 2 {
                    return Err(invalid("min_samples_split must be at least 2"));
                }
            }
            AlgorithmKind::Nn => {
                if self.hidden == 0 {
                    return Err(invalid("hidden width must be at least 1"));
                }
                if self.nn_epochs == 0 || !(self.nn_learning_rate > 0.0) {
                    return Err(invalid("NN needs positive epochs and learning rate"));
                }
            }
            AlgorithmKind::Svm => {
                if !(self.svm_lambda > 0.0) || self.svm_epochs == 0 {
                    return Err(invalid("SVM needs positive lambda and epochs"));
                }
                if let SvmKernel::Rbf { gamma } = self.svm_kernel {
                    if !(gamma > 0.0) {
                        return Err(invalid("RBF gamma must be positive"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: u8,
    pub score: f64,
}

impl Prediction {
    pub(crate) fn from_score(score: f64) -> Self {
        Prediction { label: u8::from(score >= 0.5), score }
    }
}

/// Per-inference arithmetic operation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub mults: u64,
    pub adds: u64,
    pub compares: u64,
}

impl OpCount {
    pub fn new(mults: u64, adds: u64, compares: u64) -> Self {
        OpCount { mults, adds, compares }
    }

    pub fn scaled(self, factor: u64) -> Self {
        OpCount::new(self.mults * factor, self.adds * factor, self.compares * factor)
    }
}

impl std::ops::Add for OpCount {
    type Output = OpCount;
    fn add(self, rhs: OpCount) -> OpCount {
        OpCount::new(self.mults + rhs.mults, self.adds + rhs.adds, self.compares + rhs.compares)
    }
}

impl std::ops::AddAssign for OpCount {
    fn add_assign(&mut self, rhs: OpCount) {
        *self = *self + rhs;
    }
}

/// Operation count of [`preprocess`] for a raw row of `p` values.
pub fn preprocess_op_count(p: usize, t: DataType) -> OpCount {
    let p = p as u64;
    match t {
        DataType::Tabular => OpCount::default(),
        // one scale + floor per value, 16 xor/multiply rounds of FNV-1a, one bucket add
        DataType::Text => OpCount::new(p * 17, p * 17, 0),
        DataType::Image => {
            let out = effective_dim(p as usize, t) as u64;
            OpCount::new(out, p, 0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub n_train: usize,
    pub p: usize,
    pub p_effective: usize,
    pub t: DataType,
    pub seed: u64,
    /// Standard deviation of each raw training feature (1.0 where constant).
    pub feature_scale: Vec<f64>,
}

impl TrainMeta {
    /// Metadata for a hand-assembled model over tabular features of unit scale.
    pub fn tabular(n_train: usize, p: usize) -> Self {
        TrainMeta { n_train, p, p_effective: p, t: DataType::Tabular, seed: 0, feature_scale: vec![1.0; p] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ModelParams {
    #[serde(rename = "SVM")]
    Svm(SvmModel),
    #[serde(rename = "KNN")]
    Knn(KnnModel),
    #[serde(rename = "RF")]
    Rf(Forest),
    #[serde(rename = "NN")]
    Nn(Mlp),
}

/// A deployable classifier. Immutable after training; `predict` may be
/// called concurrently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub meta: TrainMeta,
    pub params: ModelParams,
}

/// Trains a classifier of `kind` on `data`; the data is preprocessed
/// according to its type first, exactly as at inference time.
pub fn train(kind: AlgorithmKind, data: &Dataset, hyper: &Hyperparameters, seed: u64) -> Result<TrainedModel> {
    let n = data.n();
    hyper.validate(kind, n)?;
    let positives = data.positives();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateDataset("training data contains a single class".into()));
    }
    let t = data.data_type();
    let features = data.samples.iter().map(|row| preprocess(row, t)).collect::<Result<Vec<_>>>()?;
    let p_effective = effective_dim(data.p(), t);
    let params = match kind {
        AlgorithmKind::Svm => ModelParams::Svm(svm::train(&features, &data.labels, hyper, seed)),
        AlgorithmKind::Knn => ModelParams::Knn(KnnModel::new(features, data.labels.clone(), hyper.k)),
        AlgorithmKind::Rf => ModelParams::Rf(forest::train(&features, &data.labels, hyper, seed)),
        AlgorithmKind::Nn => ModelParams::Nn(mlp::train(&features, &data.labels, hyper, seed)),
    };
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        meta: TrainMeta { n_train: n, p: data.p(), p_effective, t, seed, feature_scale: feature_scale(&data.samples) },
        params,
    })
}

fn feature_scale(samples: &[Vec<f64>]) -> Vec<f64> {
    let n = samples.len() as f64;
    let p = samples[0].len();
    (0..p)
        .map(|j| {
            let mean = samples.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = samples.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect()
}

impl TrainedModel {
    /// Wraps hand-assembled parameters, checking they fit `meta`.
    pub fn from_parts(meta: TrainMeta, params: ModelParams) -> Result<Self> {
        let model = TrainedModel { version: MODEL_FORMAT_VERSION, meta, params };
        model.validate()?;
        Ok(model)
    }

    /// A linear SVM with weights `w` and bias `b` over tabular features.
    pub fn linear_svm(w: Vec<f64>, b: f64) -> Result<Self> {
        let p = w.len();
        TrainedModel::from_parts(TrainMeta::tabular(1, p), ModelParams::Svm(SvmModel::linear(w, b)))
    }

    pub fn validate(&self) -> Result<()> {
        let meta = &self.meta;
        if self.version != MODEL_FORMAT_VERSION {
            return Err(invalid(format!("unsupported model format version {}", self.version)));
        }
        if meta.p == 0 || meta.feature_scale.len() != meta.p {
            return Err(invalid("model metadata has inconsistent dimensionality"));
        }
        if meta.p_effective != effective_dim(meta.p, meta.t) {
            return Err(invalid("p_effective does not match (p, t)"));
        }
        let consistent = match &self.params {
            ModelParams::Svm(m) => m.input_dim() == meta.p_effective,
            ModelParams::Knn(m) => m.input_dim() == meta.p_effective && m.rows() == meta.n_train,
            ModelParams::Rf(m) => m.max_feature().is_none_or(|f| f < meta.p_effective),
            ModelParams::Nn(m) => m.input_dim() == meta.p_effective,
        };
        if !consistent {
            return Err(invalid("model parameters inconsistent with metadata"));
        }
        Ok(())
    }

    pub fn kind(&self) -> AlgorithmKind {
        match self.params {
            ModelParams::Svm(_) => AlgorithmKind::Svm,
            ModelParams::Knn(_) => AlgorithmKind::Knn,
            ModelParams::Rf(_) => AlgorithmKind::Rf,
            ModelParams::Nn(_) => AlgorithmKind::Nn,
        }
    }

    /// Raw (pre-preprocessing) input dimensionality.
    pub fn input_dim(&self) -> usize {
        self.meta.p
    }

    pub fn predict(&self, sample: &[f64]) -> Result<Prediction> {
        if sample.len() != self.meta.p {
            return Err(Error::DimensionMismatch { expected: self.meta.p, got: sample.len() });
        }
        let x = preprocess(sample, self.meta.t)?;
        Ok(Prediction::from_score(self.score_features(&x)))
    }

    pub(crate) fn score_features(&self, x: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Svm(m) => m.score(x),
            ModelParams::Knn(m) => m.score(x),
            ModelParams::Rf(m) => m.score(x),
            ModelParams::Nn(m) => m.score(x),
        }
    }

    /// Closed-form operations for one call of the model on a preprocessed
    /// vector of length `p_effective`.
    pub fn op_count(&self, p_effective: usize) -> OpCount {
        let p = p_effective as u64;
        match &self.params {
            ModelParams::Svm(m) => m.op_count(p),
            ModelParams::Knn(m) => m.op_count(p),
            ModelParams::Rf(m) => m.op_count(),
            ModelParams::Nn(m) => m.op_count(p),
        }
    }

    /// Operations of one full `predict` call: preprocessing plus the model.
    pub fn inference_op_count(&self) -> OpCount {
        preprocess_op_count(self.meta.p, self.meta.t) + self.op_count(self.meta.p_effective)
    }

    pub fn training_accuracy(&self, data: &Dataset) -> Result<f64> {
        let mut correct = 0usize;
        for (row, &label) in data.samples.iter().zip(&data.labels) {
            if self.predict(row)?.label == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.n() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
