//! Declarative experiment grids and the single-threaded, resumable runner.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::energy::{pj_to_mj, EnergyProvider};
use super::records::{MeasurementRecord, RecordKey, RecordSink};
use super::timing::LatencyStats;
use crate::classifiers::{train, AlgorithmKind, Hyperparameters, OpCount, TrainedModel};
use crate::datasets::{generate, DataType, Dataset};
use crate::error::invalid;
use crate::guardrails::{extra_predict_calls, guardrail_op_count, GuardrailConfig, GuardrailConstants, GuardrailStack};
use crate::rng::derive_seed;
use crate::Result;

const STREAM_TRAIN: u64 = 0x7;
const STREAM_QUERIES: u64 = 0x51;

fn default_reps() -> usize {
    200
}
fn default_warmup() -> usize {
    50
}
fn default_separation() -> f64 {
    2.0
}
fn default_queries() -> usize {
    64
}

/// Axis values of an experiment grid; every combination is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPlan {
    pub algorithms: Vec<AlgorithmKind>,
    pub n: Vec<u64>,
    pub p: Vec<u64>,
    pub t: Vec<DataType>,
    pub guardrails: Vec<GuardrailConfig>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    /// Held-out queries cycled through during timing.
    #[serde(default = "default_queries")]
    pub queries: usize,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub constants: GuardrailConstants,
}

impl GridPlan {
    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("algorithms", self.algorithms.len()),
            ("n", self.n.len()),
            ("p", self.p.len()),
            ("t", self.t.len()),
            ("guardrails", self.guardrails.len()),
            ("seeds", self.seeds.len()),
        ];
        for (name, len) in axes {
            if len == 0 {
                return Err(invalid(format!("grid axis {name:?} is empty")));
            }
        }
        if let Some(n) = self.n.iter().find(|&&n| n < 2) {
            return Err(invalid(format!("grid n values must be at least 2, got {n}")));
        }
        if self.p.contains(&0) {
            return Err(invalid("grid p values must be at least 1"));
        }
        for g in &self.guardrails {
            g.validate()?;
        }
        self.constants.validate()?;
        if self.reps == 0 || self.queries == 0 {
            return Err(invalid("reps and queries must be at least 1"));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(invalid("separation must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.algorithms.len() * self.n.len() * self.p.len() * self.t.len() * self.guardrails.len() * self.seeds.len()
    }
}

/// Per-operation time in picoseconds for the modelled clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeConstants {
    pub mult_ps: u64,
    pub add_ps: u64,
    pub compare_ps: u64,
    pub call_overhead_ps: u64,
}

impl Default for TimeConstants {
    fn default() -> Self {
        TimeConstants { mult_ps: 300, add_ps: 300, compare_ps: 500, call_overhead_ps: 20_000 }
    }
}

impl TimeConstants {
    pub fn per_execution_ps(&self, ops: &OpCount, calls: u64) -> u128 {
        u128::from(ops.mults) * u128::from(self.mult_ps)
            + u128::from(ops.adds) * u128::from(self.add_ps)
            + u128::from(ops.compares) * u128::from(self.compare_ps)
            + u128::from(calls) * u128::from(self.call_overhead_ps)
    }
}

/// Source of the latency column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "clock")]
pub enum LatencyClock {
    /// Monotonic wall clock.
    #[default]
    Wall,
    /// Operation-count time model; bit-reproducible.
    Modeled(TimeConstants),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub clock: LatencyClock,
    /// Value of the `timestamp` column; current Unix time when `None`.
    pub timestamp: Option<u64>,
    /// Stop after writing this many new records.
    pub max_new_records: Option<usize>,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct GridSummary {
    pub written: usize,
    pub skipped: usize,
    pub failed: Vec<(RecordKey, String)>,
}

struct Cell<'a> {
    model: &'a TrainedModel,
    queries: &'a Dataset,
    stack: GuardrailStack,
}

/// Total operations and predict calls of one guarded inference.
pub fn guarded_op_count(model: &TrainedModel, cfg: &GuardrailConfig, consts: &GuardrailConstants) -> (OpCount, u64) {
    let calls = 1 + extra_predict_calls(model, cfg, consts) as u64;
    (model.inference_op_count().scaled(calls) + guardrail_op_count(model, cfg, consts), calls)
}

fn now_unix() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Times `warmup + reps` guarded inferences over the cell's queries and
/// meters the same `reps` executions for energy.
fn measure_cell(
    cell: &Cell<'_>,
    provider: &mut dyn EnergyProvider,
    clock: LatencyClock,
    warmup: usize,
    reps: usize,
    seed: u64,
) -> Result<(LatencyStats, f64)> {
    let q = cell.queries.n();
    let mut window = cell.stack.fairness_window();
    let (ops, calls) = guarded_op_count(cell.model, &cell.stack.config, &cell.stack.constants);
    let run = |i: usize, window: &mut crate::guardrails::FairnessWindow| -> Result<()> {
        let k = i % q;
        let out = cell.stack.run(
            cell.model,
            &cell.queries.samples[k],
            cell.queries.protected[k],
            window,
            derive_seed(seed, i as u64),
        )?;
        std::hint::black_box(out);
        Ok(())
    };
    for i in 0..warmup {
        run(i, &mut window)?;
    }
    let mut samples = Vec::with_capacity(reps);
    let before = provider.read_pj()?;
    for i in warmup..warmup + reps {
        let start = Instant::now();
        run(i, &mut window)?;
        let elapsed = start.elapsed();
        provider.charge(&ops, calls);
        samples.push(match clock {
            LatencyClock::Wall => elapsed.as_secs_f64() * 1e3,
            LatencyClock::Modeled(tc) => tc.per_execution_ps(&ops, calls) as f64 / 1e9,
        });
    }
    let after = provider.read_pj()?;
    let energy_mj = pj_to_mj((after - before) as f64 / reps as f64);
    let mut stats = LatencyStats::from_samples(samples);
    if matches!(clock, LatencyClock::Modeled(_)) {
        stats.low_confidence = false;
    }
    Ok((stats, energy_mj))
}

/// Runs every cell not already present in `sink`, in plan order, one at a
/// time. A failing cell is logged and skipped.
pub fn run_grid(
    plan: &GridPlan,
    provider: &mut dyn EnergyProvider,
    sink: &mut dyn RecordSink,
    opts: &RunOptions,
) -> Result<GridSummary> {
    plan.validate()?;
    let mut summary = GridSummary::default();
    let timestamp = opts.timestamp.unwrap_or_else(now_unix);
    for &algo in &plan.algorithms {
        for &n in &plan.n {
            for &p in &plan.p {
                for &t in &plan.t {
                    for &seed in &plan.seeds {
                        let keys: Vec<(GuardrailConfig, RecordKey)> =
                            plan.guardrails.iter().map(|g| (*g, RecordKey::new(algo, n, p, t, g, seed))).collect();
                        let pending: Vec<&(GuardrailConfig, RecordKey)> =
                            keys.iter().filter(|(_, k)| !sink.contains(k)).collect();
                        summary.skipped += keys.len() - pending.len();
                        if pending.is_empty() {
                            continue;
                        }
                        let prepared = prepare(plan, algo, n, p, t, seed);
                        let (model, queries) = match prepared {
                            Ok(v) => v,
                            Err(e) => {
                                for (_, key) in pending {
                                    log::warn!("cell {key} failed: {e}");
                                    summary.failed.push((key.clone(), e.to_string()));
                                }
                                continue;
                            }
                        };
                        for (g, key) in pending {
                            if opts.max_new_records.is_some_and(|m| summary.written >= m) {
                                return Ok(summary);
                            }
                            let result = GuardrailStack::new(*g, plan.constants.clone()).and_then(|stack| {
                                let cell = Cell { model: &model, queries: &queries, stack };
                                measure_cell(&cell, provider, opts.clock, plan.warmup, plan.reps, seed)
                            });
                            match result {
                                Ok((stats, energy_mj)) => {
                                    if stats.low_confidence {
                                        log::debug!("cell {key}: clock resolution is coarse relative to the median");
                                    }
                                    let record = MeasurementRecord {
                                        algo,
                                        n,
                                        p,
                                        t,
                                        g_expl: g.expl,
                                        g_fair: g.fair,
                                        g_interp: g.interp,
                                        g_safety: g.safety,
                                        g_privacy: g.privacy,
                                        latency_ms: stats.median_ms,
                                        energy_mj,
                                        reps: plan.reps,
                                        warmup: plan.warmup,
                                        provider: provider.tag().to_string(),
                                        seed,
                                        timestamp,
                                    };
                                    sink.append(record)?;
                                    summary.written += 1;
                                    log::info!("cell {key}: {:.6} ms, {:.3e} mJ", stats.median_ms, energy_mj);
                                }
                                Err(e) => {
                                    log::warn!("cell {key} failed: {e}");
                                    summary.failed.push((key.clone(), e.to_string()));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(summary)
}

fn prepare(
    plan: &GridPlan,
    algo: AlgorithmKind,
    n: u64,
    p: u64,
    t: DataType,
    seed: u64,
) -> Result<(TrainedModel, Dataset)> {
    let train_data = generate(n as usize, p as usize, t, plan.separation, seed)?;
    let queries = generate(plan.queries.max(2), p as usize, t, plan.separation, derive_seed(seed, STREAM_QUERIES))?;
    let model = train(algo, &train_data, &plan.hyperparameters, derive_seed(seed, STREAM_TRAIN))?;
    Ok((model, queries))
}
