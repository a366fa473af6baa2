//! The additive latency and energy equations: design rows, least-squares
//! fitting, prediction and hold-out evaluation.
//!
//! Latency uses `ln n` as its dataset-size term, energy uses `n`; every
//! other term is shared in form but each equation carries its own
//! coefficients.

mod design;
pub(crate) mod linalg;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use design::{design_row, design_row_with, size_term, TypeEncoding, NUMERIC_COLUMNS, SIZE_COLUMN};

use crate::classifiers::AlgorithmKind;
use crate::datasets::DataType;
use crate::error::invalid;
use crate::guardrails::GuardrailConfig;
use crate::measurement::{MeasurementRecord, RecordKey};
use crate::rng::seeded;
use crate::{Error, Result};
use linalg::{Matrix, Qr};

/// Bumped whenever the design-row layout changes.
pub const ENCODING_VERSION: u32 = 1;

/// Relative residual norm under which a column counts as collinear.
const RANK_TOLERANCE: f64 = 1e-9;
/// Largest accepted ratio of `|R_ii|` on the column-equilibrated design.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Latency,
    Energy,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Latency => "latency",
            Target::Energy => "energy",
        }
    }

    pub fn response(self, record: &MeasurementRecord) -> f64 {
        match self {
            Target::Latency => record.latency_ms,
            Target::Energy => record.energy_mj,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "latency" => Ok(Target::Latency),
            "energy" => Ok(Target::Energy),
            other => Err(invalid(format!("unknown target {other:?} (expected latency or energy)"))),
        }
    }
}

/// Inputs of one prediction: algorithm, dataset characteristics and
/// guardrail intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorInputs {
    pub algorithm: AlgorithmKind,
    pub n: u64,
    pub p: u64,
    pub t: DataType,
    pub g: GuardrailConfig,
}

impl PredictorInputs {
    pub fn new(algorithm: AlgorithmKind, n: u64, p: u64, t: DataType, g: GuardrailConfig) -> Result<Self> {
        if n < 1 || p < 1 {
            return Err(invalid(format!("n and p must be at least 1, got n={n}, p={p}")));
        }
        g.validate()?;
        Ok(PredictorInputs { algorithm, n, p, t, g })
    }

    pub fn from_record(r: &MeasurementRecord) -> Result<Self> {
        PredictorInputs::new(r.algo, r.n, r.p, r.t, r.guardrails())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    pub encoding: TypeEncoding,
    /// Leave out (fix at zero) non-intercept columns that are constant over
    /// the records instead of reporting them as collinear.
    pub drop_constant_columns: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub r_squared: f64,
    pub record_count: usize,
    pub condition_estimate: f64,
    /// Sum of training residuals.
    pub residual_sum: f64,
}

/// A fitted latency or energy equation.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedEquation {
    pub target: Target,
    pub encoding: TypeEncoding,
    /// One coefficient per design column.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Columns excluded from the fit; their coefficient is 0.
    pub fixed: Vec<bool>,
    /// Residual standard deviation.
    pub sigma_eps: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPrediction {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rmse: f64,
    pub mae: f64,
    pub r_squared: f64,
    pub count: usize,
}

impl FittedEquation {
    /// An equation with every coefficient but the intercept at zero.
    pub fn intercept_only(target: Target, alpha: f64, sigma_eps: f64) -> Self {
        let width = TypeEncoding::Numeric.width();
        let mut coefficients = vec![0.0; width];
        coefficients[0] = alpha;
        FittedEquation {
            target,
            encoding: TypeEncoding::Numeric,
            coefficients,
            std_errors: vec![0.0; width],
            fixed: (0..width).map(|j| j != 0).collect(),
            sigma_eps,
            diagnostics: Diagnostics { r_squared: 0.0, record_count: 0, condition_estimate: 1.0, residual_sum: 0.0 },
        }
    }

    pub fn column_names(&self) -> Vec<&'static str> {
        self.encoding.column_names()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.column_names().iter().position(|c| *c == name).map(|j| self.coefficients[j])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.column_names().iter().position(|c| *c == name).map(|j| self.std_errors[j])
    }

    pub fn alpha(&self) -> f64 {
        self.coefficients[0]
    }

    /// Contrasts for kNN, RF and NN against the SVM baseline.
    pub fn beta_a(&self) -> [f64; 3] {
        [self.coefficients[1], self.coefficients[2], self.coefficients[3]]
    }

    pub fn beta_d(&self) -> f64 {
        self.coefficients[SIZE_COLUMN]
    }

    pub fn gamma_d(&self) -> f64 {
        self.coefficients[5]
    }

    pub fn delta_d(&self) -> f64 {
        self.coefficients[6]
    }

    pub fn phi_g(&self) -> [f64; 5] {
        let o = self.encoding.guardrail_offset();
        let mut phi = [0.0; 5];
        phi.copy_from_slice(&self.coefficients[o..o + 5]);
        phi
    }

    /// Point estimate and `± 2 sigma_eps` interval.
    pub fn predict(&self, inputs: &PredictorInputs) -> PointPrediction {
        let row = design_row_with(inputs, self.target, self.encoding);
        let point = dot_ordered(&self.coefficients, &row);
        PointPrediction { point, lower: point - 2.0 * self.sigma_eps, upper: point + 2.0 * self.sigma_eps }
    }

    pub fn evaluate(&self, holdout: &[MeasurementRecord]) -> Result<Evaluation> {
        if holdout.is_empty() {
            return Err(invalid("hold-out set is empty"));
        }
        let mut errors = Vec::with_capacity(holdout.len());
        let mut ys = Vec::with_capacity(holdout.len());
        for r in holdout {
            let y = self.target.response(r);
            errors.push(y - self.predict(&PredictorInputs::from_record(r)?).point);
            ys.push(y);
        }
        let m = holdout.len() as f64;
        let sse: f64 = errors.iter().map(|e| e * e).sum();
        let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / m;
        Ok(Evaluation { rmse: (sse / m).sqrt(), mae, r_squared: r_squared(sse, &ys), count: holdout.len() })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&EquationDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        FittedEquation::try_from(serde_json::from_str::<EquationDocument>(s)?)
    }
}

fn dot_ordered(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `1 - SSE/SST`, defined as 0 when the responses have no variance.
fn r_squared(sse: f64, ys: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let sst: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let floor = (mean.abs() * f64::EPSILON).powi(2) * ys.len() as f64 * 16.0;
    if sst <= floor {
        0.0
    } else {
        1.0 - sse / sst
    }
}

pub fn fit(records: &[MeasurementRecord], target: Target) -> Result<FittedEquation> {
    fit_with(records, target, &FitOptions::default())
}

/// Ordinary least squares over the records in the given order, solved by
/// Householder QR of the column-equilibrated design matrix.
pub fn fit_with(records: &[MeasurementRecord], target: Target, opts: &FitOptions) -> Result<FittedEquation> {
    let encoding = opts.encoding;
    let width = encoding.width();
    let names = encoding.column_names();
    let rows: Vec<Vec<f64>> = records
        .iter()
        .map(|r| PredictorInputs::from_record(r).map(|i| design_row_with(&i, target, encoding)))
        .collect::<Result<_>>()?;
    let y: Vec<f64> = records.iter().map(|r| target.response(r)).collect();
    if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("record {bad} has a non-finite {target} response")));
    }

    let fixed: Vec<bool> = (0..width)
        .map(|j| {
            j != 0 && opts.drop_constant_columns && rows.iter().all(|r| rows.first().is_some_and(|f| r[j] == f[j]))
        })
        .collect();
    let active: Vec<usize> = (0..width).filter(|&j| !fixed[j]).collect();
    let params = active.len();
    if rows.len() < params + 1 {
        return Err(Error::Underdetermined { rows: rows.len(), params });
    }

    let mut x = Matrix::zeros(rows.len(), params);
    let mut scale = vec![1.0; params];
    for (c, &j) in active.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let norm = linalg::norm(&col);
        if norm > 0.0 {
            scale[c] = norm;
        }
        for (i, v) in col.iter().enumerate() {
            x.set(i, c, v / scale[c]);
        }
    }
    let qr = Qr::factor(x, RANK_TOLERANCE);
    let dependent = qr.dependent_columns();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient {
            columns: dependent.iter().map(|&c| describe_column(names[active[c]])).collect(),
        });
    }
    let diag = qr.diagonal();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let condition_estimate = max / min;
    if !(condition_estimate <= MAX_CONDITION) {
        return Err(Error::IllConditioned { estimate: condition_estimate });
    }

    let solved = qr.solve(&y);
    let mut coefficients = vec![0.0; width];
    for (c, &j) in active.iter().enumerate() {
        coefficients[j] = solved[c] / scale[c];
    }
    let residuals: Vec<f64> = rows.iter().zip(&y).map(|(r, yi)| yi - dot_ordered(&coefficients, r)).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let dof = (rows.len() - params) as f64;
    let sigma_eps = (rss / dof).sqrt();
    let inv_gram = qr.inverse_gram_diagonal();
    let mut std_errors = vec![0.0; width];
    for (c, &j) in active.iter().enumerate() {
        std_errors[j] = sigma_eps * inv_gram[c].sqrt() / scale[c];
    }
    Ok(FittedEquation {
        target,
        encoding,
        coefficients,
        std_errors,
        fixed,
        sigma_eps,
        diagnostics: Diagnostics {
            r_squared: r_squared(rss, &y),
            record_count: rows.len(),
            condition_estimate,
            residual_sum: residuals.iter().sum(),
        },
    })
}

fn describe_column(name: &str) -> String {
    let what = match name {
        "alpha" => "intercept",
        "beta_kNN" | "beta_RF" | "beta_NN" => "algorithm contrast",
        "beta_D" => "dataset size",
        "gamma_D" => "feature dimensionality",
        "delta_D" | "delta_D_image" => "data type",
        _ => "guardrail intensity",
    };
    format!("{name} ({what})")
}

/// Splits records into training and hold-out sets with disjoint keys.
/// Roughly `fraction` of the distinct keys go to the hold-out set.
pub fn split_holdout(
    records: &[MeasurementRecord],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<MeasurementRecord>, Vec<MeasurementRecord>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(invalid("hold-out fraction must lie in [0, 1)"));
    }
    let mut keys: Vec<RecordKey> = Vec::new();
    let mut seen = HashSet::new();
    for r in records {
        let k = r.key();
        if seen.insert(k.clone()) {
            keys.push(k);
        }
    }
    keys.shuffle(&mut seeded(seed));
    let take = (keys.len() as f64 * fraction).round() as usize;
    let holdout_keys: HashSet<&RecordKey> = keys[..take].iter().collect();
    let mut by_side: HashMap<bool, Vec<MeasurementRecord>> = HashMap::new();
    for r in records {
        by_side.entry(holdout_keys.contains(&r.key())).or_default().push(r.clone());
    }
    Ok((by_side.remove(&false).unwrap_or_default(), by_side.remove(&true).unwrap_or_default()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EquationDocument {
    target: Target,
    encoding_version: u32,
    type_encoding: TypeEncoding,
    coefficients: serde_json::Map<String, serde_json::Value>,
    std_errors: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    fixed_columns: Vec<String>,
    sigma_eps: f64,
    diagnostics: Diagnostics,
}

impl From<&FittedEquation> for EquationDocument {
    fn from(eq: &FittedEquation) -> Self {
        let names = eq.column_names();
        let map = |values: &[f64]| {
            names.iter().zip(values).map(|(n, v)| (n.to_string(), serde_json::Value::from(*v))).collect()
        };
        EquationDocument {
            target: eq.target,
            encoding_version: ENCODING_VERSION,
            type_encoding: eq.encoding,
            coefficients: map(&eq.coefficients),
            std_errors: map(&eq.std_errors),
            fixed_columns: names.iter().zip(&eq.fixed).filter(|(_, f)| **f).map(|(n, _)| n.to_string()).collect(),
            sigma_eps: eq.sigma_eps,
            diagnostics: eq.diagnostics.clone(),
        }
    }
}

impl TryFrom<EquationDocument> for FittedEquation {
    type Error = Error;
    fn try_from(doc: EquationDocument) -> Result<Self> {
        if doc.encoding_version != ENCODING_VERSION {
            return Err(invalid(format!("unsupported encoding version {}", doc.encoding_version)));
        }
        let names = doc.type_encoding.column_names();
        let read = |map: &serde_json::Map<String, serde_json::Value>, what: &str| -> Result<Vec<f64>> {
            names
                .iter()
                .map(|n| {
                    map.get(*n)
                        .and_then(serde_json::Value::as_f64)
                        .ok_or_else(|| invalid(format!("{what} missing numeric entry {n:?}")))
                })
                .collect()
        };
        let coefficients = read(&doc.coefficients, "coefficients")?;
        let std_errors = read(&doc.std_errors, "std_errors")?;
        if let Some(extra) = doc.coefficients.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(invalid(format!("unknown coefficient {extra:?}")));
        }
        if !(doc.sigma_eps >= 0.0) {
            return Err(invalid("sigma_eps must be non-negative"));
        }
        let fixed = names.iter().map(|n| doc.fixed_columns.iter().any(|f| f == n)).collect();
        Ok(FittedEquation {
            target: doc.target,
            encoding: doc.type_encoding,
            coefficients,
            std_errors,
            fixed,
            sigma_eps: doc.sigma_eps,
            diagnostics: doc.diagnostics,
        })
    }
}
