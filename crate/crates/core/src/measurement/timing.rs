//! Warm-up then per-execution wall-clock timing with robust statistics.

use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub median_ms: f64,
    /// Median absolute deviation from the median.
    pub mad_ms: f64,
    pub min_ms: f64,
    pub samples_ms: Vec<f64>,
    /// Clock resolution coarser than 1% of the median.
    pub low_confidence: bool,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn median_abs_deviation(values: &[f64], center: f64) -> f64 {
    let dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    median(&dev)
}

/// Smallest positive step observed between consecutive clock reads, in ms.
pub fn clock_resolution_ms() -> f64 {
    static RESOLUTION: OnceLock<f64> = OnceLock::new();
    *RESOLUTION.get_or_init(|| {
        let mut best = f64::INFINITY;
        for _ in 0..2000 {
            let a = Instant::now();
            let mut b = Instant::now();
            while b == a {
                b = Instant::now();
            }
            best = best.min((b - a).as_secs_f64() * 1e3);
        }
        best
    })
}

impl LatencyStats {
    pub fn from_samples(samples_ms: Vec<f64>) -> Self {
        let median_ms = median(&samples_ms);
        let mad_ms = median_abs_deviation(&samples_ms, median_ms);
        let min_ms = samples_ms.iter().copied().fold(f64::INFINITY, f64::min);
        let low_confidence = clock_resolution_ms() > 0.01 * median_ms;
        LatencyStats { median_ms, mad_ms, min_ms, samples_ms, low_confidence }
    }
}

/// Runs `task` `warmup` times untimed, then `reps` times each timed
/// individually on the monotonic clock.
pub fn measure_latency<F: FnMut()>(mut task: F, warmup: usize, reps: usize) -> Result<LatencyStats> {
    if reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    for _ in 0..warmup {
        task();
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        task();
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(LatencyStats::from_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_mad_of_known_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        // |x - 2| = 1, 1, 0, 2, 7 -> median 1
        assert_eq!(median_abs_deviation(&[1.0, 3.0, 2.0, 4.0, 9.0], 2.0), 1.0);
    }

    #[test]
    fn no_op_task_has_non_negative_minimum() {
        let stats = measure_latency(|| {}, 5, 50).unwrap();
        assert!(stats.min_ms >= 0.0);
        assert_eq!(stats.samples_ms.len(), 50);
        assert!(stats.median_ms < 1.0);
    }

    #[test]
    fn rejects_zero_reps() {
        assert!(measure_latency(|| {}, 0, 0).is_err());
    }
}
