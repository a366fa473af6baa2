//! Summary tables over a record set: one row per configuration, an
//! algorithm by guardrail-configuration marginal table, latency/energy
//! scatter data and column totals.

use std::fmt::Write as _;

use crate::classifiers::AlgorithmKind;
use crate::guardrails::{GuardrailConfig, GUARDRAIL_NAMES};
use crate::measurement::MeasurementRecord;
use crate::Result;

/// `off`, or the active guardrails as `name=intensity` joined by `+`.
pub fn guardrail_label(g: &GuardrailConfig) -> String {
    let active: Vec<String> =
        GUARDRAIL_NAMES.iter().zip(g.as_array()).filter(|(_, v)| *v != 0.0).map(|(n, v)| format!("{n}={v}")).collect();
    if active.is_empty() {
        "off".into()
    } else {
        active.join("+")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalRow {
    pub algo: AlgorithmKind,
    pub guardrails: String,
    pub count: usize,
    pub mean_latency_ms: f64,
    pub mean_energy_mj: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<MeasurementRecord>,
    pub marginals: Vec<MarginalRow>,
    pub total_latency_ms: f64,
    pub total_energy_mj: f64,
}

impl Report {
    pub fn build(records: &[MeasurementRecord]) -> Self {
        let mut marginals: Vec<MarginalRow> = Vec::new();
        for r in records {
            let label = guardrail_label(&r.guardrails());
            let row = match marginals.iter_mut().find(|m| m.algo == r.algo && m.guardrails == label) {
                Some(m) => m,
                None => {
                    marginals.push(MarginalRow {
                        algo: r.algo,
                        guardrails: label,
                        count: 0,
                        mean_latency_ms: 0.0,
                        mean_energy_mj: 0.0,
                    });
                    marginals.last_mut().expect("just pushed")
                }
            };
            row.count += 1;
            row.mean_latency_ms += r.latency_ms;
            row.mean_energy_mj += r.energy_mj;
        }
        for m in &mut marginals {
            m.mean_latency_ms /= m.count as f64;
            m.mean_energy_mj /= m.count as f64;
        }
        marginals.sort_by_key(|m| AlgorithmKind::ALL.iter().position(|a| *a == m.algo));
        Report {
            rows: records.to_vec(),
            marginals,
            total_latency_ms: records.iter().map(|r| r.latency_ms).sum(),
            total_energy_mj: records.iter().map(|r| r.energy_mj).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-configuration rows followed by a `TOTAL` row.
    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["algo", "n", "p", "t", "guardrails", "seed", "latency_ms", "energy_mj", "provider"])?;
        for r in &self.rows {
            w.write_record([
                r.algo.to_string(),
                r.n.to_string(),
                r.p.to_string(),
                r.t.to_string(),
                guardrail_label(&r.guardrails()),
                r.seed.to_string(),
                r.latency_ms.to_string(),
                r.energy_mj.to_string(),
                r.provider.clone(),
            ])?;
        }
        let (l, e) = (self.total_latency_ms.to_string(), self.total_energy_mj.to_string());
        w.write_record(["TOTAL", "", "", "", "", "", l.as_str(), e.as_str(), ""])?;
        w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
    }

    pub fn marginal_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["algo", "guardrails", "count", "mean_latency_ms", "mean_energy_mj"])?;
        for m in &self.marginals {
            w.write_record([
                m.algo.to_string(),
                m.guardrails.clone(),
                m.count.to_string(),
                m.mean_latency_ms.to_string(),
                m.mean_energy_mj.to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
    }

    pub fn scatter_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["latency_ms", "energy_mj", "algo", "guardrails"])?;
        for r in &self.rows {
            w.write_record([
                r.latency_ms.to_string(),
                r.energy_mj.to_string(),
                r.algo.to_string(),
                guardrail_label(&r.guardrails()),
            ])?;
        }
        w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        if self.is_empty() {
            s.push_str("no records\n");
            return s;
        }
        let _ = writeln!(s, "{} records", self.rows.len());
        let _ = writeln!(
            s,
            "\n{:<5} {:>8} {:>6} {:>2} {:<28} {:>14} {:>14}",
            "algo", "n", "p", "t", "guardrails", "latency_ms", "energy_mj"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<5} {:>8} {:>6} {:>2} {:<28} {:>14.6e} {:>14.6e}",
                r.algo.to_string(),
                r.n,
                r.p,
                r.t,
                guardrail_label(&r.guardrails()),
                r.latency_ms,
                r.energy_mj
            );
        }
        let _ = writeln!(
            s,
            "{:<5} {:>8} {:>6} {:>2} {:<28} {:>14.6e} {:>14.6e}",
            "TOTAL", "", "", "", "", self.total_latency_ms, self.total_energy_mj
        );
        let _ = writeln!(
            s,
            "\n{:<5} {:<28} {:>5} {:>14} {:>14}",
            "algo", "guardrails", "count", "mean_lat_ms", "mean_en_mj"
        );
        for m in &self.marginals {
            let _ = writeln!(
                s,
                "{:<5} {:<28} {:>5} {:>14.6e} {:>14.6e}",
                m.algo.to_string(),
                m.guardrails,
                m.count,
                m.mean_latency_ms,
                m.mean_energy_mj
            );
        }
        s
    }
}
