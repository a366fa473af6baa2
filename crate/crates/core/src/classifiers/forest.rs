//! Random forest of CART trees grown on the Gini criterion.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Hyperparameters, OpCount};
use crate::rng::{derive_seed, seeded, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        /// Fraction of positive training samples reaching this leaf.
        score: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A single tree stored as a flat node array rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    /// Longest realised root-to-leaf path, in splits.
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub feature: usize,
    pub threshold: f64,
    pub went_left: bool,
}

impl Tree {
    fn leaf_score(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { score } => return score,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// The splits visited from the root to the leaf reached by `x`.
    pub fn decision_path(&self, x: &[f64]) -> Vec<PathStep> {
        let mut path = Vec::new();
        let mut at = 0;
        while let TreeNode::Split { feature, threshold, left, right } = self.nodes[at] {
            let went_left = x[feature] <= threshold;
            path.push(PathStep { feature, threshold, went_left });
            at = if went_left { left } else { right };
        }
        path
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub max_depth: usize,
}

impl Forest {
    /// Mean leaf score over the trees.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.leaf_score(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub(crate) fn max_feature(&self) -> Option<usize> {
        self.trees
            .iter()
            .flat_map(|t| &t.nodes)
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }

    /// Worst case: one compare per level of every tree, one add per tree and
    /// a single multiply to average.
    pub fn op_count(&self) -> OpCount {
        let compares = self.trees.iter().map(|t| t.depth as u64).sum();
        OpCount::new(1, self.trees.len() as u64, compares)
    }
}

pub(super) fn train(x: &[Vec<f64>], labels: &[u8], hyper: &Hyperparameters, seed: u64) -> Forest {
    let n = x.len();
    let p = x[0].len();
    let mtry = ((p as f64).sqrt().round() as usize).clamp(1, p);
    let trees = (0..hyper.trees)
        .map(|i| {
            let mut rng = seeded(derive_seed(seed, i as u64));
            let idx: Vec<usize> =
                if hyper.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            let mut builder = TreeBuilder { x, labels, hyper, mtry, rng, nodes: Vec::new(), depth: 0 };
            builder.grow(idx, 0);
            Tree { nodes: builder.nodes, depth: builder.depth }
        })
        .collect();
    Forest { trees, max_depth: hyper.max_depth }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    labels: &'a [u8],
    hyper: &'a Hyperparameters,
    mtry: usize,
    rng: Rng,
    nodes: Vec<TreeNode>,
    depth: usize,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let q = pos as f64 / total as f64;
    2.0 * q * (1.0 - q)
}

impl TreeBuilder<'_> {
    fn grow(&mut self, idx: Vec<usize>, level: usize) -> usize {
        let id = self.nodes.len();
        let pos = idx.iter().filter(|&&i| self.labels[i] == 1).count();
        let score = pos as f64 / idx.len() as f64;
        self.nodes.push(TreeNode::Leaf { score });
        self.depth = self.depth.max(level);

        if level >= self.hyper.max_depth || idx.len() < self.hyper.min_samples_split || pos == 0 || pos == idx.len() {
            return id;
        }
        let Some(best) = self.best_split(&idx, pos) else {
            return id;
        };
        if best.impurity >= gini(pos, idx.len()) * idx.len() as f64 {
            return id;
        }
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x[i][best.feature] <= best.threshold);
        let left = self.grow(left_idx, level + 1);
        let right = self.grow(right_idx, level + 1);
        self.nodes[id] = TreeNode::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    /// Best weighted-Gini split over a random subset of `mtry` features.
    fn best_split(&mut self, idx: &[usize], pos: usize) -> Option<SplitChoice> {
        let p = self.x[0].len();
        let mut features = sample(&mut self.rng, p, self.mtry).into_vec();
        features.sort_unstable();
        let total = idx.len();
        let mut best: Option<SplitChoice> = None;
        let mut order: Vec<(f64, u8)> = Vec::with_capacity(total);
        for f in features {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x[i][f], self.labels[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for s in 1..total {
                left_pos += usize::from(order[s - 1].1);
                if order[s - 1].0 == order[s].0 {
                    continue;
                }
                let right_pos = pos - left_pos;
                let impurity = gini(left_pos, s) * s as f64 + gini(right_pos, total - s) * (total - s) as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let threshold = order[s - 1].0 + (order[s].0 - order[s - 1].0) / 2.0;
                    best = Some(SplitChoice { feature: f, threshold, impurity });
                }
            }
        }
        best
    }
}
