//! Sliding-window demographic-parity monitor.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Positive-prediction counters per protected group over the last
/// `capacity` predictions. One window per prediction stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessWindow {
    capacity: usize,
    entries: VecDeque<(u8, u8)>,
    positives: [usize; 2],
    totals: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// `|rate(group 1) - rate(group 0)|`; 0 while either group is unseen.
    pub parity_gap: f64,
    pub window_len: usize,
}

impl FairnessWindow {
    pub fn new(capacity: usize) -> Self {
        FairnessWindow { capacity, entries: VecDeque::with_capacity(capacity), positives: [0; 2], totals: [0; 2] }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rate(&self, group: u8) -> Option<f64> {
        let g = usize::from(group);
        (self.totals[g] > 0).then(|| self.positives[g] as f64 / self.totals[g] as f64)
    }

    pub fn gap(&self) -> f64 {
        match (self.rate(0), self.rate(1)) {
            (Some(a), Some(b)) => (b - a).abs(),
            _ => 0.0,
        }
    }

    /// Records one prediction (O(1)) and returns the updated report.
    /// `group` and `label` must be 0 or 1.
    pub fn audit(&mut self, group: u8, label: u8) -> FairnessReport {
        debug_assert!(group <= 1 && label <= 1);
        if self.capacity > 0 {
            if self.entries.len() == self.capacity {
                if let Some((g, l)) = self.entries.pop_front() {
                    self.totals[usize::from(g)] -= 1;
                    self.positives[usize::from(g)] -= usize::from(l);
                }
            }
            self.entries.push_back((group, label));
            self.totals[usize::from(group)] += 1;
            self.positives[usize::from(group)] += usize::from(label);
        }
        FairnessReport { parity_gap: self.gap(), window_len: self.entries.len() }
    }
}

/// Records one `(group, label)` observation in `window` and returns the
/// current parity gap.
pub fn audit_fairness(window: &mut FairnessWindow, group: u8, label: u8) -> f64 {
    window.audit(group, label).parity_gap
}
