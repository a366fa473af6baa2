//! The `infercost` command line: `gen`, `bench`, `fit`, `predict`, `report`.

mod config;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{ClockChoice, RunConfig};
pub use report::{guardrail_label, MarginalRow, Report};

use crate::classifiers::AlgorithmKind;
use crate::datasets::{generate, DataType};
use crate::error::invalid;
use crate::fsutil::write_atomic;
use crate::guardrails::GuardrailConfig;
use crate::measurement::{open_provider, run_grid, CsvRecordSink, MeasurementRecord, RunOptions};
use crate::model::{
    design_row_with, fit_with, split_holdout, FitOptions, FittedEquation, PredictorInputs, Target, TypeEncoding,
};
use crate::{Error, Result};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "infercost", version, about = "Benchmark classifier inference cost and fit latency/energy equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (CSV plus JSON sidecar).
    Gen(GenArgs),
    /// Run a benchmark grid, appending to a records CSV.
    Bench(BenchArgs),
    /// Fit the latency and/or energy equation to a records CSV.
    Fit(FitArgs),
    /// Evaluate a fitted equation.
    Predict(PredictArgs),
    /// Summarise a records CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// 0/tabular, 1/text or 2/image.
    #[arg(long, default_value = "0", value_parser = parse_data_type)]
    pub t: DataType,
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// auto, rapl or cost-model.
    #[arg(long)]
    pub provider: Option<String>,
    #[arg(long, value_enum)]
    pub clock: Option<ClockChoice>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub timestamp: Option<u64>,
    /// Stop after this many new records.
    #[arg(long)]
    pub max_new_records: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TargetChoice {
    Latency,
    Energy,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EncodingChoice {
    Numeric,
    OneHot,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub target: TargetChoice,
    /// Receives `latency.json` and/or `energy.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "numeric")]
    pub encoding: EncodingChoice,
    /// Fix columns that are constant over the records at zero.
    #[arg(long)]
    pub drop_constant: bool,
    /// Fraction of record keys held out for evaluation.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub holdout_seed: u64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub equation: PathBuf,
    #[arg(long, value_parser = parse_algorithm)]
    pub algo: AlgorithmKind,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p: u64,
    #[arg(long, default_value = "0", value_parser = parse_data_type)]
    pub t: DataType,
    #[arg(long, default_value_t = 0.0)]
    pub expl: f64,
    #[arg(long, default_value_t = 0.0)]
    pub fair: f64,
    #[arg(long, default_value_t = 0.0)]
    pub interp: f64,
    #[arg(long, default_value_t = 0.0)]
    pub safety: f64,
    #[arg(long, default_value_t = 0.0)]
    pub privacy: f64,
    /// Also write the prediction as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of the text line.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// Receives summary.csv, marginal.csv and scatter.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_data_type(s: &str) -> std::result::Result<DataType, String> {
    match s.to_ascii_lowercase().as_str() {
        "0" | "tabular" => Ok(DataType::Tabular),
        "1" | "text" => Ok(DataType::Text),
        "2" | "image" => Ok(DataType::Image),
        _ => Err(format!("unknown data type {s:?} (expected 0/tabular, 1/text or 2/image)")),
    }
}

fn parse_algorithm(s: &str) -> std::result::Result<AlgorithmKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Report(a) => cmd_report(&a, out),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
/// Usage errors print to stderr and return 2.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let ds = generate(a.n, a.p, a.t, a.separation, a.seed)?;
    ds.write(&a.out)?;
    writeln!(out, "wrote {} ({} rows, {} features)", a.out.display(), ds.n(), ds.p())?;
    Ok(())
}

fn source_date_epoch() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok())
}

/// Merges flags over the config file and validates the result.
pub fn resolve_config(a: &BenchArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(r) = &a.records {
        cfg.records = Some(r.clone());
    }
    if let Some(p) = &a.provider {
        cfg.provider = p.clone();
    }
    if let Some(c) = a.clock {
        cfg.clock = c;
    }
    if let Some(r) = a.reps {
        cfg.grid.reps = r;
    }
    if let Some(w) = a.warmup {
        cfg.grid.warmup = w;
    }
    if a.timestamp.is_some() {
        cfg.timestamp = a.timestamp;
    }
    if cfg.timestamp.is_none() {
        cfg.timestamp = source_date_epoch();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(a)?;
    let records = cfg.records.clone().expect("validated");
    let mut sink = CsvRecordSink::open(&records)?;
    let mut provider = open_provider(cfg.provider_choice()?, cfg.energy_constants)?;
    writeln!(out, "grid: {} cells, provider {}", cfg.grid.cell_count(), provider.tag())?;
    let opts = RunOptions { clock: cfg.latency_clock(), timestamp: cfg.timestamp, max_new_records: a.max_new_records };
    let summary = run_grid(&cfg.grid, provider.as_mut(), &mut sink, &opts)?;
    writeln!(
        out,
        "wrote {} records, skipped {} existing, {} failed -> {}",
        summary.written,
        summary.skipped,
        summary.failed.len(),
        records.display()
    )?;
    for (key, msg) in &summary.failed {
        writeln!(out, "  failed {key}: {msg}")?;
    }
    Ok(())
}

pub fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let records = MeasurementRecord::read_path(&a.records)?;
    let low = records.iter().filter(|r| !r.is_fit_grade()).count();
    if low > 0 {
        log::warn!("{low} records have fewer than {} timed repetitions", crate::measurement::FIT_GRADE_REPS);
    }
    let (train, holdout) = match a.holdout {
        Some(f) => split_holdout(&records, f, a.holdout_seed)?,
        None => (records, Vec::new()),
    };
    let opts = FitOptions {
        encoding: match a.encoding {
            EncodingChoice::Numeric => TypeEncoding::Numeric,
            EncodingChoice::OneHot => TypeEncoding::OneHot,
        },
        drop_constant_columns: a.drop_constant,
    };
    let targets: &[Target] = match a.target {
        TargetChoice::Latency => &[Target::Latency],
        TargetChoice::Energy => &[Target::Energy],
        TargetChoice::Both => &[Target::Latency, Target::Energy],
    };
    // Fit everything before writing anything.
    let fitted = targets.iter().map(|&t| fit_with(&train, t, &opts)).collect::<Result<Vec<_>>>().inspect_err(|e| {
        if matches!(e, Error::RankDeficient { .. }) && !a.drop_constant {
            eprintln!("hint: columns that never vary in the records can be fixed at zero with --drop-constant");
        }
    })?;
    for eq in &fitted {
        let path = a.out_dir.join(format!("{}.json", eq.target));
        write_atomic(&path, eq.to_json()?.as_bytes())?;
        writeln!(out, "{} equation ({} records) -> {}", eq.target, eq.diagnostics.record_count, path.display())?;
        for ((name, c), (se, fixed)) in
            eq.column_names().iter().zip(&eq.coefficients).zip(eq.std_errors.iter().zip(&eq.fixed))
        {
            if *fixed {
                writeln!(out, "  {name:<14} {:>14}", "fixed at 0")?;
            } else {
                writeln!(out, "  {name:<14} {c:>14.6e} +/- {se:.3e}")?;
            }
        }
        writeln!(out, "  sigma_eps {:.6e}  R^2 {:.6}", eq.sigma_eps, eq.diagnostics.r_squared)?;
        if !holdout.is_empty() {
            let ev = eq.evaluate(&holdout)?;
            writeln!(out, "  holdout ({}): rmse {:.6e} mae {:.6e} R^2 {:.6}", ev.count, ev.rmse, ev.mae, ev.r_squared)?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct PredictionOutput {
    pub target: Target,
    pub unit: &'static str,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub sigma_eps: f64,
    pub inputs: PredictorInputs,
    pub design_row: Vec<f64>,
}

fn unit(target: Target) -> &'static str {
    match target {
        Target::Latency => "ms",
        Target::Energy => "mJ",
    }
}

pub fn predict_output(eq: &FittedEquation, inputs: PredictorInputs) -> PredictionOutput {
    let pred = eq.predict(&inputs);
    PredictionOutput {
        target: eq.target,
        unit: unit(eq.target),
        point: pred.point,
        lower: pred.lower,
        upper: pred.upper,
        sigma_eps: eq.sigma_eps,
        inputs,
        design_row: design_row_with(&inputs, eq.target, eq.encoding),
    }
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let g = GuardrailConfig::new(a.expl, a.fair, a.interp, a.safety, a.privacy)?;
    let inputs = PredictorInputs::new(a.algo, a.n, a.p, a.t, g)?;
    let eq = FittedEquation::from_json(&read_text(&a.equation)?)?;
    let output = predict_output(&eq, inputs);
    let json = serde_json::to_string_pretty(&output)?;
    if let Some(path) = &a.out {
        write_atomic(path, format!("{json}\n").as_bytes())?;
    }
    if a.json {
        writeln!(out, "{json}")?;
    } else {
        writeln!(
            out,
            "{}: {} {} +/- {} (interval [{}, {}])",
            output.target,
            output.point,
            output.unit,
            2.0 * output.sigma_eps,
            output.lower,
            output.upper
        )?;
    }
    Ok(())
}

pub fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let records = MeasurementRecord::read_path(&a.records)?;
    let report = Report::build(&records);
    write!(out, "{}", report.render_text())?;
    if let Some(dir) = &a.out_dir {
        write_atomic(&dir.join("summary.csv"), &report.summary_csv()?)?;
        write_atomic(&dir.join("marginal.csv"), &report.marginal_csv()?)?;
        write_atomic(&dir.join("scatter.csv"), &report.scatter_csv()?)?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => invalid(format!("{} not found", path.display())),
        _ => Error::Io(e),
    })
}
