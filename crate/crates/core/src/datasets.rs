//! Synthetic binary-classification datasets and the type-dependent
//! preprocessing that runs inside the timed inference path.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::fsutil::write_atomic;
use crate::rng::seeded;
use crate::{Error, Result};

/// Data modality: tabular (0), text (1) or image (2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DataType {
    Tabular,
    Text,
    Image,
}

impl DataType {
    pub const ALL: [DataType; 3] = [DataType::Tabular, DataType::Text, DataType::Image];

    pub fn code(self) -> u8 {
        match self {
            DataType::Tabular => 0,
            DataType::Text => 1,
            DataType::Image => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DataType::Tabular),
            1 => Ok(DataType::Text),
            2 => Ok(DataType::Image),
            other => Err(invalid(format!("data type code must be 0, 1 or 2, got {other}"))),
        }
    }
}

impl TryFrom<u8> for DataType {
    type Error = Error;
    fn try_from(code: u8) -> Result<Self> {
        DataType::from_code(code)
    }
}

impl From<DataType> for u8 {
    fn from(t: DataType) -> u8 {
        t.code()
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Generation parameters stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub p: usize,
    pub t: DataType,
    pub separation: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub protected: Vec<u8>,
}

impl Dataset {
    /// Builds a dataset from explicit rows, checking shape and label domains.
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<u8>, protected: Vec<u8>, t: DataType) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(invalid("dataset must contain at least one sample"));
        }
        let p = samples[0].len();
        if p == 0 {
            return Err(invalid("feature dimensionality must be at least 1"));
        }
        if labels.len() != n || protected.len() != n {
            return Err(invalid(format!(
                "expected {n} labels and group indicators, got {} and {}",
                labels.len(),
                protected.len()
            )));
        }
        for row in &samples {
            if row.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: row.len() });
            }
            if let Some(index) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index });
            }
        }
        if labels.iter().chain(&protected).any(|&v| v > 1) {
            return Err(invalid("labels and group indicators must be 0 or 1"));
        }
        Ok(Dataset { meta: DatasetMeta { n, p, t, separation: 0.0, seed: 0 }, samples, labels, protected })
    }

    pub fn n(&self) -> usize {
        self.meta.n
    }

    pub fn p(&self) -> usize {
        self.meta.p
    }

    pub fn data_type(&self) -> DataType {
        self.meta.t
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Writes `<path>` as CSV and the metadata sidecar next to it with a
    /// `.json` extension. Both writes are atomic.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (0..self.p()).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        header.push("protected".into());
        wtr.write_record(&header)?;
        for ((row, label), group) in self.samples.iter().zip(&self.labels).zip(&self.protected) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.to_string());
            rec.push(group.to_string());
            wtr.write_record(&rec)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_atomic(csv_path, &bytes)?;
        let meta = serde_json::to_vec_pretty(&self.meta)?;
        write_atomic(&sidecar_path(csv_path), &meta)?;
        Ok(())
    }

    /// Reads a dataset written by [`Dataset::write`].
    pub fn read(csv_path: &Path) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_slice(&std::fs::read(sidecar_path(csv_path))?)?;
        let mut rdr = csv::Reader::from_path(csv_path)?;
        let mut samples = Vec::with_capacity(meta.n);
        let mut labels = Vec::with_capacity(meta.n);
        let mut protected = Vec::with_capacity(meta.n);
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != meta.p + 2 {
                return Err(Error::DimensionMismatch { expected: meta.p + 2, got: rec.len() });
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|e| invalid(format!("bad value {s:?}: {e}")));
            let row = (0..meta.p).map(|j| parse(&rec[j])).collect::<Result<Vec<_>>>()?;
            samples.push(row);
            labels.push(parse(&rec[meta.p])? as u8);
            protected.push(parse(&rec[meta.p + 1])? as u8);
        }
        let mut ds = Dataset::new(samples, labels, protected, meta.t)?;
        if ds.n() != meta.n {
            return Err(invalid(format!("sidecar declares n={} but CSV has {} rows", meta.n, ds.n())));
        }
        ds.meta = meta;
        Ok(ds)
    }
}

pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

/// Two isotropic unit-variance Gaussian clouds whose means lie `separation`
/// apart along the all-ones diagonal. Labels are balanced to within one and
/// shuffled; the protected attribute is an independent fair coin.
pub fn generate(n: usize, p: usize, t: DataType, separation: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(invalid(format!("n must be at least 2, got {n}")));
    }
    if p < 1 {
        return Err(invalid("p must be at least 1"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(invalid(format!("separation must be a finite non-negative number, got {separation}")));
    }
    let mut rng = seeded(seed);
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n - n / 2)).collect();
    labels.shuffle(&mut rng);

    let offset = separation / 2.0 / (p as f64).sqrt();
    let mut samples = Vec::with_capacity(n);
    let mut protected = Vec::with_capacity(n);
    for &label in &labels {
        let centre = if label == 1 { offset } else { -offset };
        let row: Vec<f64> = (0..p)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                centre + z
            })
            .collect();
        samples.push(row);
        protected.push(u8::from(rng.random_bool(0.5)));
    }
    Ok(Dataset { meta: DatasetMeta { n, p, t, separation, seed }, samples, labels, protected })
}

/// Output dimensionality of [`preprocess`] for a raw row of `p` values.
pub fn effective_dim(p: usize, t: DataType) -> usize {
    match t {
        DataType::Tabular | DataType::Text => p,
        DataType::Image => {
            let pooled = grid_side(p).div_ceil(2);
            pooled * pooled
        }
    }
}

fn grid_side(p: usize) -> usize {
    let mut side = (p as f64).sqrt() as usize;
    while side * side < p {
        side += 1;
    }
    side
}

/// Applies the transform selected by `t`:
///
/// * tabular: identity;
/// * text: every value is quantised into a token, hashed together with its
///   position, and counted into one of `p` buckets;
/// * image: the row is laid out row-major on the smallest square grid that
///   holds it (zero padded), 2x2 mean-pooled and flattened.
pub fn preprocess(raw: &[f64], t: DataType) -> Result<Vec<f64>> {
    if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(match t {
        DataType::Tabular => raw.to_vec(),
        DataType::Text => hash_counts(raw),
        DataType::Image => mean_pool(raw),
    })
}

pub(crate) const TOKEN_WIDTH: f64 = 0.5;

/// Bucket that the value at `position` is counted into.
pub fn text_bucket(position: usize, value: f64, buckets: usize) -> usize {
    let token = (value / TOKEN_WIDTH).floor() as i64;
    (fnv1a(position as u64, token) % buckets as u64) as usize
}

fn fnv1a(position: u64, token: i64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in position.to_le_bytes().into_iter().chain(token.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn hash_counts(raw: &[f64]) -> Vec<f64> {
    let buckets = raw.len();
    let mut out = vec![0.0; buckets];
    for (i, &v) in raw.iter().enumerate() {
        out[text_bucket(i, v, buckets)] += 1.0;
    }
    out
}

fn mean_pool(raw: &[f64]) -> Vec<f64> {
    let side = grid_side(raw.len());
    let pooled = side.div_ceil(2);
    let cell = |r: usize, c: usize| raw.get(r * side + c).copied().unwrap_or(0.0);
    let mut out = Vec::with_capacity(pooled * pooled);
    for br in 0..pooled {
        for bc in 0..pooled {
            let mut sum = 0.0;
            let mut count = 0usize;
            for r in 2 * br..(2 * br + 2).min(side) {
                for c in 2 * bc..(2 * bc + 2).min(side) {
                    sum += cell(r, c);
                    count += 1;
                }
            }
            out.push(sum / count as f64);
        }
    }
    out
}
