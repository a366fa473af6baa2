use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::measurement::{EnergyConstants, GridPlan, LatencyClock, ProviderChoice, TimeConstants};
use crate::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ClockChoice {
    #[default]
    Wall,
    Modeled,
}

/// A benchmark run: the grid plus provider, clock and output settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridPlan,
    #[serde(default = "default_provider")]
    pub provider: String,
    #[serde(default)]
    pub clock: ClockChoice,
    #[serde(default)]
    pub records: Option<PathBuf>,
    /// Fixed value for the `timestamp` column.
    #[serde(default)]
    pub timestamp: Option<u64>,
    #[serde(default)]
    pub energy_constants: EnergyConstants,
    #[serde(default)]
    pub time_constants: TimeConstants,
}

fn default_provider() -> String {
    "auto".into()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
    }

    pub fn provider_choice(&self) -> Result<ProviderChoice> {
        self.provider.parse()
    }

    pub fn latency_clock(&self) -> LatencyClock {
        match self.clock {
            ClockChoice::Wall => LatencyClock::Wall,
            ClockChoice::Modeled => LatencyClock::Modeled(self.time_constants),
        }
    }

    /// Checks everything that can be checked before a cell runs.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.provider_choice()?;
        let records = self
            .records
            .as_deref()
            .ok_or_else(|| invalid("no records path given (config \"records\" or --records)"))?;
        if records.is_dir() {
            return Err(invalid(format!("records path {} is a directory", records.display())));
        }
        if let Some(parent) = records.parent().filter(|p| !p.as_os_str().is_empty()) {
            if parent.exists() && !parent.is_dir() {
                return Err(invalid(format!("{} is not a directory", parent.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"algorithms": ["SVM"], "n": [20], "p": [3], "t": [0],
                 "guardrails": [{"expl": 0, "fair": 0, "interp": 0, "safety": 0, "privacy": 0}], "seeds": [1]},
        "records": "out.csv"
    }"#;

    #[test]
    fn defaults_fill_in() {
        let cfg: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.provider, "auto");
        assert_eq!(cfg.clock, ClockChoice::Wall);
        assert_eq!(cfg.grid.reps, 200);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_provider_fails_validation() {
        let mut cfg: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        cfg.provider = "joulemeter".into();
        assert!(cfg.validate().unwrap_err().is_validation());
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = MINIMAL.replace("\"records\"", "\"recrods\"");
        assert!(serde_json::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn missing_records_path() {
        let mut cfg: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        cfg.records = None;
        assert!(cfg.validate().is_err());
    }
}
