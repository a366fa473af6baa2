//! Latency and energy observations for (model, dataset, guardrail)
//! configurations, and the resumable grid runner that produces them.

pub mod energy;
pub mod grid;
mod records;
pub mod timing;

pub use energy::{
    measure_energy, open_provider, Capability, CostModelProvider, EnergyConstants, EnergyProvider, MeteredTask,
    ProviderChoice, RaplProvider, PROVIDER_ENV,
};
pub use grid::{run_grid, GridPlan, GridSummary, LatencyClock, RunOptions, TimeConstants};
pub use records::{CsvRecordSink, MeasurementRecord, MemorySink, RecordKey, RecordSink, FIT_GRADE_REPS, RECORD_HEADER};
pub use timing::{measure_latency, LatencyStats};
