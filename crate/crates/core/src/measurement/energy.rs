//! Energy providers: the RAPL package counter exposed through powercap, and
//! a deterministic operation-count cost model.

use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classifiers::OpCount;
use crate::error::invalid;
use crate::{Error, Result};

/// Forces the cost-model provider when set to `cost-model`.
pub const PROVIDER_ENV: &str = "INFERCOST_ENERGY_PROVIDER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capability {
    HardwareCounter,
    CostModel,
}

/// A session-scoped energy counter. `read_pj` is monotone non-decreasing
/// within a session.
pub trait EnergyProvider {
    /// Tag written into the `provider` column of measurement records.
    fn tag(&self) -> &str;
    fn capability(&self) -> Capability;
    /// Cumulative energy in picojoules since the provider was opened.
    fn read_pj(&mut self) -> Result<u128>;
    /// Accounts one execution that performed `ops` over `calls` predict
    /// calls. Hardware counters ignore this.
    fn charge(&mut self, ops: &OpCount, calls: u64);
}

/// Per-operation energy in picojoules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConstants {
    pub mult_pj: u64,
    pub add_pj: u64,
    pub compare_pj: u64,
    pub call_overhead_pj: u64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        // 1.0 nJ, 0.5 nJ, 0.5 nJ, 50 nJ
        EnergyConstants { mult_pj: 1000, add_pj: 500, compare_pj: 500, call_overhead_pj: 50_000 }
    }
}

impl EnergyConstants {
    pub fn per_execution_pj(&self, ops: &OpCount, calls: u64) -> u128 {
        u128::from(ops.mults) * u128::from(self.mult_pj)
            + u128::from(ops.adds) * u128::from(self.add_pj)
            + u128::from(ops.compares) * u128::from(self.compare_pj)
            + u128::from(calls) * u128::from(self.call_overhead_pj)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CostModelProvider {
    pub constants: EnergyConstants,
    counter_pj: u128,
    tag: String,
}

impl CostModelProvider {
    pub const TAG: &'static str = "cost-model";

    pub fn new(constants: EnergyConstants) -> Self {
        CostModelProvider { constants, counter_pj: 0, tag: Self::TAG.to_string() }
    }

    /// A cost model standing in for an unavailable hardware counter.
    pub fn fallback(constants: EnergyConstants) -> Self {
        CostModelProvider { constants, counter_pj: 0, tag: format!("{}-fallback", Self::TAG) }
    }
}

impl EnergyProvider for CostModelProvider {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn capability(&self) -> Capability {
        Capability::CostModel
    }

    fn read_pj(&mut self) -> Result<u128> {
        Ok(self.counter_pj)
    }

    fn charge(&mut self, ops: &OpCount, calls: u64) {
        self.counter_pj += self.constants.per_execution_pj(ops, calls);
    }
}

/// Package-0 energy from `/sys/class/powercap/intel-rapl:0`, with
/// wrap-around handled against `max_energy_range_uj`.
#[derive(Debug, Clone)]
pub struct RaplProvider {
    energy_path: PathBuf,
    max_range_uj: u128,
    last_raw_uj: u128,
    total_uj: u128,
}

impl RaplProvider {
    pub const TAG: &'static str = "rapl";
    pub const DEFAULT_ZONE: &'static str = "/sys/class/powercap/intel-rapl:0";

    pub fn open() -> Result<Self> {
        Self::open_zone(Self::DEFAULT_ZONE)
    }

    pub fn open_zone(zone: impl Into<PathBuf>) -> Result<Self> {
        let zone = zone.into();
        let energy_path = zone.join("energy_uj");
        let max_range_uj = read_uj(&zone.join("max_energy_range_uj"))?;
        let last_raw_uj = read_uj(&energy_path)?;
        Ok(RaplProvider { energy_path, max_range_uj, last_raw_uj, total_uj: 0 })
    }
}

fn read_uj(path: &PathBuf) -> Result<u128> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::ProviderUnavailable(format!("cannot read {}: {e}", path.display())))?;
    text.trim()
        .parse::<u128>()
        .map_err(|e| Error::ProviderUnavailable(format!("bad counter value in {}: {e}", path.display())))
}

impl EnergyProvider for RaplProvider {
    fn tag(&self) -> &str {
        Self::TAG
    }

    fn capability(&self) -> Capability {
        Capability::HardwareCounter
    }

    fn read_pj(&mut self) -> Result<u128> {
        let raw = read_uj(&self.energy_path)?;
        let delta =
            if raw >= self.last_raw_uj { raw - self.last_raw_uj } else { raw + (self.max_range_uj - self.last_raw_uj) };
        self.last_raw_uj = raw;
        self.total_uj += delta;
        Ok(self.total_uj * 1_000_000)
    }

    fn charge(&mut self, _ops: &OpCount, _calls: u64) {}
}

/// Which provider a run asks for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderChoice {
    /// RAPL when readable, otherwise the cost model (tagged as fallback).
    #[default]
    Auto,
    Rapl,
    CostModel,
}

impl std::str::FromStr for ProviderChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ProviderChoice::Auto),
            "rapl" => Ok(ProviderChoice::Rapl),
            "cost-model" => Ok(ProviderChoice::CostModel),
            other => Err(invalid(format!("unknown energy provider {other:?} (expected auto, rapl or cost-model)"))),
        }
    }
}

/// Applies the environment override on top of `choice`.
pub fn effective_choice(choice: ProviderChoice) -> Result<ProviderChoice> {
    match std::env::var(PROVIDER_ENV) {
        Ok(v) if !v.is_empty() => v.parse(),
        _ => Ok(choice),
    }
}

pub fn open_provider(choice: ProviderChoice, constants: EnergyConstants) -> Result<Box<dyn EnergyProvider>> {
    match effective_choice(choice)? {
        ProviderChoice::CostModel => Ok(Box::new(CostModelProvider::new(constants))),
        ProviderChoice::Rapl => Ok(Box::new(RaplProvider::open()?)),
        ProviderChoice::Auto => match RaplProvider::open() {
            Ok(p) => Ok(Box::new(p)),
            Err(e) => {
                log::info!("{e}; falling back to the cost model");
                Ok(Box::new(CostModelProvider::fallback(constants)))
            }
        },
    }
}

pub(crate) fn pj_to_mj(pj: f64) -> f64 {
    pj / 1e9
}

/// A unit of work that can be re-run and reports its operation count.
pub trait MeteredTask {
    fn run(&mut self);
    /// Operations and predict calls of one execution.
    fn ops(&self) -> (OpCount, u64);
}

/// Mean energy per execution over `reps` executions, in millijoules.
pub fn measure_energy(provider: &mut dyn EnergyProvider, task: &mut dyn MeteredTask, reps: usize) -> Result<f64> {
    if reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    let before = provider.read_pj()?;
    for _ in 0..reps {
        task.run();
        let (ops, calls) = task.ops();
        provider.charge(&ops, calls);
    }
    let after = provider.read_pj()?;
    Ok(pj_to_mj((after - before) as f64 / reps as f64))
}
