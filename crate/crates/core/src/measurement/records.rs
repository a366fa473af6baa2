use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::AlgorithmKind;
use crate::datasets::DataType;
use crate::error::invalid;
use crate::fsutil::write_atomic;
use crate::guardrails::GuardrailConfig;
use crate::Result;

pub const RECORD_HEADER: &str =
    "algo,n,p,t,g_expl,g_fair,g_interp,g_safety,g_privacy,latency_ms,energy_mj,reps,warmup,provider,seed,timestamp";

/// Records with at least this many timed repetitions are fit-grade.
pub const FIT_GRADE_REPS: usize = 30;

/// One benchmark observation. `n` is the deployed model's training-set size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub algo: AlgorithmKind,
    pub n: u64,
    pub p: u64,
    pub t: DataType,
    pub g_expl: f64,
    pub g_fair: f64,
    pub g_interp: f64,
    pub g_safety: f64,
    pub g_privacy: f64,
    /// Median per-inference wall time.
    pub latency_ms: f64,
    /// Mean per-inference energy.
    pub energy_mj: f64,
    pub reps: usize,
    pub warmup: usize,
    pub provider: String,
    pub seed: u64,
    pub timestamp: u64,
}

/// Identity of a grid cell: every input coordinate, no outputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey(String);

impl fmt::Display for RecordKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl RecordKey {
    pub fn new(algo: AlgorithmKind, n: u64, p: u64, t: DataType, g: &GuardrailConfig, seed: u64) -> Self {
        let g = g.as_array();
        RecordKey(format!("{algo}|{n}|{p}|{t}|{}|{}|{}|{}|{}|{seed}", g[0], g[1], g[2], g[3], g[4]))
    }
}

impl MeasurementRecord {
    pub fn guardrails(&self) -> GuardrailConfig {
        GuardrailConfig {
            expl: self.g_expl,
            fair: self.g_fair,
            interp: self.g_interp,
            safety: self.g_safety,
            privacy: self.g_privacy,
        }
    }

    pub fn key(&self) -> RecordKey {
        RecordKey::new(self.algo, self.n, self.p, self.t, &self.guardrails(), self.seed)
    }

    pub fn is_fit_grade(&self) -> bool {
        self.reps >= FIT_GRADE_REPS
    }

    pub fn validate(&self) -> Result<()> {
        self.guardrails().validate()?;
        if !(self.latency_ms > 0.0 && self.latency_ms.is_finite()) {
            return Err(invalid(format!("latency_ms must be positive, got {}", self.latency_ms)));
        }
        if !(self.energy_mj >= 0.0 && self.energy_mj.is_finite()) {
            return Err(invalid(format!("energy_mj must be non-negative, got {}", self.energy_mj)));
        }
        if self.n == 0 || self.p == 0 {
            return Err(invalid("n and p must be at least 1"));
        }
        Ok(())
    }

    pub fn write_csv(records: &[MeasurementRecord]) -> Result<Vec<u8>> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        wtr.write_record(RECORD_HEADER.split(','))?;
        for r in records {
            wtr.serialize(r)?;
        }
        wtr.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
    }

    /// Parses a record CSV, requiring the exact header. An empty input
    /// yields no records.
    pub fn read_csv(bytes: &[u8]) -> Result<Vec<MeasurementRecord>> {
        if bytes.iter().all(u8::is_ascii_whitespace) {
            return Ok(Vec::new());
        }
        let mut rdr = csv::Reader::from_reader(bytes);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != RECORD_HEADER {
            return Err(invalid(format!("unexpected record header {:?}", header.join(","))));
        }
        let mut out = Vec::new();
        for rec in rdr.deserialize() {
            let rec: MeasurementRecord = rec?;
            rec.validate()?;
            out.push(rec);
        }
        Ok(out)
    }

    pub fn read_path(path: &Path) -> Result<Vec<MeasurementRecord>> {
        MeasurementRecord::read_csv(&std::fs::read(path)?)
    }
}

/// Destination for grid records.
pub trait RecordSink {
    fn contains(&self, key: &RecordKey) -> bool;
    fn append(&mut self, record: MeasurementRecord) -> Result<()>;
}

#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub records: Vec<MeasurementRecord>,
    keys: HashSet<RecordKey>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }
}

impl RecordSink for MemorySink {
    fn contains(&self, key: &RecordKey) -> bool {
        self.keys.contains(key)
    }

    fn append(&mut self, record: MeasurementRecord) -> Result<()> {
        self.keys.insert(record.key());
        self.records.push(record);
        Ok(())
    }
}

/// CSV file sink. Existing rows are loaded on open so completed cells can be
/// skipped; every append rewrites the file atomically.
#[derive(Debug)]
pub struct CsvRecordSink {
    path: PathBuf,
    inner: MemorySink,
}

impl CsvRecordSink {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut inner = MemorySink::new();
        if path.exists() {
            for r in MeasurementRecord::read_path(&path)? {
                inner.append(r)?;
            }
        }
        Ok(CsvRecordSink { path, inner })
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.inner.records
    }

    pub fn flush(&self) -> Result<()> {
        write_atomic(&self.path, &MeasurementRecord::write_csv(&self.inner.records)?)
    }
}

impl RecordSink for CsvRecordSink {
    fn contains(&self, key: &RecordKey) -> bool {
        self.inner.contains(key)
    }

    fn append(&mut self, record: MeasurementRecord) -> Result<()> {
        self.inner.append(record)?;
        self.flush()
    }
}
