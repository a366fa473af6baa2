use serde::{Deserialize, Serialize};

use super::OpCount;

/// Exhaustive-scan k-nearest-neighbours over the full training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    /// Euclidean distance.
    pub distance: f64,
}

impl KnnModel {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>, k: usize) -> Self {
        KnnModel { k, rows, labels }
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn input_dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// The `count` nearest training rows, ordered by distance then index.
    pub fn nearest(&self, x: &[f64], count: usize) -> Vec<Neighbor> {
        let mut d: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let count = count.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if count < d.len() {
            d.select_nth_unstable_by(count, cmp);
            d.truncate(count);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(d2, index)| Neighbor { index, distance: d2.sqrt() }).collect()
    }

    /// Fraction of positive labels among the k nearest rows.
    pub fn score(&self, x: &[f64]) -> f64 {
        let hits = self.nearest(x, self.k).iter().filter(|nb| self.labels[nb.index] == 1).count();
        hits as f64 / self.k as f64
    }

    /// `n*p` multiplies and `2*n*p` adds for the distances (difference plus
    /// accumulation), one compare per row for selection, `k` adds to vote.
    pub fn op_count(&self, p: u64) -> OpCount {
        let n = self.rows.len() as u64;
        OpCount::new(n * p, 2 * n * p + self.k as u64, n)
    }
}
