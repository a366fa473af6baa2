use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{dot, sigmoid, Hyperparameters, OpCount};
use crate::rng::seeded;

const BATCH: usize = 32;

/// Two-layer perceptron: ReLU hidden layer, logistic output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// `hidden x input` weights, row-major.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    pub fn input_dim(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    pub fn hidden(&self) -> usize {
        self.w1.len()
    }

    fn forward(&self, x: &[f64], hidden: &mut Vec<f64>) -> f64 {
        hidden.clear();
        hidden.extend(self.w1.iter().zip(&self.b1).map(|(w, b)| (dot(w, x) + b).max(0.0)));
        dot(&self.w2, hidden) + self.b2
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut h = Vec::with_capacity(self.hidden());
        sigmoid(self.forward(x, &mut h))
    }

    /// Two mat-vecs (`p*h + h` multiply-adds) and one ReLU compare per
    /// hidden unit.
    pub fn op_count(&self, p: u64) -> OpCount {
        let h = self.hidden() as u64;
        OpCount::new(p * h + h, p * h + h, h)
    }
}

/// Mini-batch gradient descent on binary cross-entropy for a fixed number
/// of epochs, He-uniform initialisation.
pub(super) fn train(x: &[Vec<f64>], labels: &[u8], hyper: &Hyperparameters, seed: u64) -> Mlp {
    let n = x.len();
    let p = x[0].len();
    let h = hyper.hidden;
    let mut rng = seeded(seed);
    let limit1 = (6.0 / p as f64).sqrt();
    let limit2 = (6.0 / h as f64).sqrt();
    let mut net = Mlp {
        w1: (0..h).map(|_| (0..p).map(|_| rng.random_range(-limit1..limit1)).collect()).collect(),
        b1: vec![0.0; h],
        w2: (0..h).map(|_| rng.random_range(-limit2..limit2) * 0.5).collect(),
        b2: 0.0,
    };
    let lr = hyper.nn_learning_rate;
    let mut order: Vec<usize> = (0..n).collect();
    let mut hidden = Vec::with_capacity(h);
    let mut g_w1 = vec![vec![0.0; p]; h];
    let mut g_b1 = vec![0.0; h];
    let mut g_w2 = vec![0.0; h];
    for _ in 0..hyper.nn_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(BATCH) {
            g_w1.iter_mut().for_each(|r| r.fill(0.0));
            g_b1.fill(0.0);
            g_w2.fill(0.0);
            let mut g_b2 = 0.0;
            for &i in batch {
                let z = net.forward(&x[i], &mut hidden);
                let delta = sigmoid(z) - f64::from(labels[i]);
                g_b2 += delta;
                for u in 0..h {
                    g_w2[u] += delta * hidden[u];
                    if hidden[u] > 0.0 {
                        let back = delta * net.w2[u];
                        g_b1[u] += back;
                        for (g, xj) in g_w1[u].iter_mut().zip(&x[i]) {
                            *g += back * xj;
                        }
                    }
                }
            }
            let step = lr / batch.len() as f64;
            net.b2 -= step * g_b2;
            for u in 0..h {
                net.w2[u] -= step * g_w2[u];
                net.b1[u] -= step * g_b1[u];
                for (w, g) in net.w1[u].iter_mut().zip(&g_w1[u]) {
                    *w -= step * g;
                }
            }
        }
    }
    net
}
