use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{dot, sigmoid, Hyperparameters, OpCount};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "lowercase")]
pub enum SvmKernel {
    Linear,
    Rbf { gamma: f64 },
}

/// Linear or RBF support vector machine. The score is the logistic of the
/// decision value, so `label = 1` exactly when the decision value is
/// non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: SvmKernel,
    /// Primal weights (linear kernel only; empty for RBF).
    pub weights: Vec<f64>,
    pub bias: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// Signed dual coefficients, one per support vector (RBF only).
    pub dual_coef: Vec<f64>,
    pub dim: usize,
}

impl SvmModel {
    pub fn linear(weights: Vec<f64>, bias: f64) -> Self {
        let dim = weights.len();
        SvmModel { kernel: SvmKernel::Linear, weights, bias, support_vectors: Vec::new(), dual_coef: Vec::new(), dim }
    }

    pub fn input_dim(&self) -> usize {
        self.dim
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        match self.kernel {
            SvmKernel::Linear => dot(&self.weights, x) + self.bias,
            SvmKernel::Rbf { gamma } => {
                self.support_vectors.iter().zip(&self.dual_coef).map(|(sv, c)| c * rbf(sv, x, gamma)).sum::<f64>()
                    + self.bias
            }
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }

    pub fn op_count(&self, p: u64) -> OpCount {
        match self.kernel {
            SvmKernel::Linear => OpCount::new(p, p, 1),
            SvmKernel::Rbf { .. } => {
                let sv = self.support_vectors.len() as u64;
                OpCount::new(sv * (p + 1), sv * (p + 1), 1)
            }
        }
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

pub(super) fn train(x: &[Vec<f64>], labels: &[u8], hyper: &Hyperparameters, seed: u64) -> SvmModel {
    match hyper.svm_kernel {
        SvmKernel::Linear => train_linear(x, labels, hyper, seed),
        SvmKernel::Rbf { gamma } => train_rbf(x, labels, hyper, gamma, seed),
    }
}

fn sign(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Sub-gradient descent on the L2-regularised hinge loss with a decaying
/// step size.
fn train_linear(x: &[Vec<f64>], labels: &[u8], hyper: &Hyperparameters, seed: u64) -> SvmModel {
    const ETA0: f64 = 0.1;
    let n = x.len();
    let p = x[0].len();
    let lambda = hyper.svm_lambda;
    let mut rng = seeded(seed);
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0u64;
    for _ in 0..hyper.svm_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = ETA0 / (1.0 + ETA0 * lambda * step as f64);
            step += 1;
            let y = sign(labels[i]);
            let margin = y * (dot(&w, &x[i]) + b);
            for wj in w.iter_mut() {
                *wj *= 1.0 - eta * lambda;
            }
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += eta * y * xj;
                }
                b += eta * y;
            }
        }
    }
    let support_vectors =
        x.iter().zip(labels).filter(|(xi, &l)| sign(l) * (dot(&w, xi) + b) <= 1.0).map(|(xi, _)| xi.clone()).collect();
    SvmModel { kernel: SvmKernel::Linear, weights: w, bias: b, support_vectors, dual_coef: Vec::new(), dim: p }
}

/// Kernelised Pegasos: `svm_epochs * n` stochastic steps, no bias term.
fn train_rbf(x: &[Vec<f64>], labels: &[u8], hyper: &Hyperparameters, gamma: f64, seed: u64) -> SvmModel {
    let n = x.len();
    let lambda = hyper.svm_lambda;
    let mut rng = seeded(seed);
    let mut alpha = vec![0u32; n];
    let steps = hyper.svm_epochs * n;
    for t in 1..=steps {
        let i = rng.random_range(0..n);
        let yi = sign(labels[i]);
        let f: f64 = (0..n)
            .filter(|&j| alpha[j] > 0)
            .map(|j| f64::from(alpha[j]) * sign(labels[j]) * rbf(&x[j], &x[i], gamma))
            .sum::<f64>()
            / (lambda * t as f64);
        if yi * f < 1.0 {
            alpha[i] += 1;
        }
    }
    let scale = 1.0 / (lambda * steps as f64);
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for j in 0..n {
        if alpha[j] > 0 {
            support_vectors.push(x[j].clone());
            dual_coef.push(f64::from(alpha[j]) * sign(labels[j]) * scale);
        }
    }
    SvmModel {
        kernel: SvmKernel::Rbf { gamma },
        weights: Vec::new(),
        bias: 0.0,
        support_vectors,
        dual_coef,
        dim: x[0].len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{train as train_model, AlgorithmKind};
    use crate::datasets::{generate, DataType};

    #[test]
    fn rbf_kernel_learns_separable_clouds() {
        let ds = generate(120, 3, DataType::Tabular, 4.0, 2).unwrap();
        let hyper = Hyperparameters { svm_kernel: SvmKernel::Rbf { gamma: 0.5 }, svm_epochs: 5, ..Default::default() };
        let m = train_model(AlgorithmKind::Svm, &ds, &hyper, 1).unwrap();
        assert!(m.training_accuracy(&ds).unwrap() >= 0.9);
        let ops = m.op_count(3);
        if let crate::classifiers::ModelParams::Svm(s) = &m.params {
            assert!(!s.support_vectors.is_empty());
            assert_eq!(ops.mults, s.support_vectors.len() as u64 * 4);
        }
    }

    #[test]
    fn linear_training_retains_margin_violators() {
        let ds = generate(200, 4, DataType::Tabular, 2.0, 6).unwrap();
        let m = train_model(AlgorithmKind::Svm, &ds, &Hyperparameters::default(), 0).unwrap();
        if let crate::classifiers::ModelParams::Svm(s) = &m.params {
            assert!(!s.support_vectors.is_empty());
            assert!(s.support_vectors.len() < 200);
        }
    }
}
