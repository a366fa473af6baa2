use std::path::Path;
use std::process::{Command, Output};

use infercost::model::design_row;
use infercost::{AlgorithmKind, DataType, FittedEquation, GuardrailConfig, MeasurementRecord, PredictorInputs, Target};

fn infercost(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infercost"))
        .args(args)
        .current_dir(dir)
        .env_remove("INFERCOST_ENERGY_PROVIDER")
        .env_remove("SOURCE_DATE_EPOCH")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const ONE_CELL: &str = r#"{
  "grid": {"algorithms": ["SVM"], "n": [40], "p": [3], "t": [0], "guardrails": [{}], "seeds": [5],
           "reps": 10, "warmup": 1, "queries": 4},
  "provider": "cost-model", "clock": "modeled", "records": "records.csv", "timestamp": 0
}"#;

#[test]
fn gen_writes_csv_and_sidecar_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let o = infercost(dir.path(), &["gen", "--n", "100", "--p", "10", "--t", "0", "--seed", "1", "--out", "a.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    infercost(dir.path(), &["gen", "--n", "100", "--p", "10", "--t", "tabular", "--seed", "1", "--out", "b.csv"]);
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 101);
    assert_eq!(std::fs::read(dir.path().join("a.json")).unwrap(), std::fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn gen_rejects_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = infercost(dir.path(), &["gen", "--n", "1", "--p", "3", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n must be at least 2"));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(infercost(dir.path(), &["gen", "--p", "3"]).status.code(), Some(2));
    assert_eq!(infercost(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(infercost(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn one_cell_bench_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), ONE_CELL).unwrap();
    let o = infercost(dir.path(), &["bench", "--config", "cfg.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], infercost::measurement::RECORD_HEADER);
    assert!(lines[1].starts_with("SVM,40,3,0,"));
}

#[test]
fn unknown_provider_fails_before_any_cell() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), ONE_CELL).unwrap();
    let o = infercost(dir.path(), &["bench", "--config", "cfg.json", "--provider", "wattmeter"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown energy provider"));
    assert!(!dir.path().join("records.csv").exists());
}

#[test]
fn env_override_forces_cost_model() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), ONE_CELL.replace("\"cost-model\"", "\"auto\"")).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_infercost"))
        .args(["bench", "--config", "cfg.json"])
        .current_dir(dir.path())
        .env("INFERCOST_ENERGY_PROVIDER", "cost-model")
        .output()
        .unwrap();
    assert!(o.status.success());
    let recs = MeasurementRecord::read_path(&dir.path().join("records.csv")).unwrap();
    assert_eq!(recs[0].provider, "cost-model");
}

fn sorted_rows(path: &Path) -> Vec<String> {
    let mut rows: Vec<String> = std::fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_string).collect();
    rows.sort();
    rows
}

#[test]
fn interrupted_then_resumed_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "grid": {"algorithms": ["SVM", "KNN", "RF"], "n": [30, 60], "p": [3], "t": [0, 2],
               "guardrails": [{}, {"safety": 0.5}], "seeds": [2], "reps": 6, "warmup": 1, "queries": 4,
               "hyperparameters": {"trees": 4, "max_depth": 3}},
      "provider": "cost-model", "clock": "modeled", "timestamp": 7
    }"#;
    std::fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    let full = infercost(dir.path(), &["bench", "--config", "cfg.json", "--records", "full.csv"]);
    assert!(full.status.success(), "{}", stderr(&full));
    let first =
        infercost(dir.path(), &["bench", "--config", "cfg.json", "--records", "part.csv", "--max-new-records", "5"]);
    assert!(first.status.success());
    assert_eq!(sorted_rows(&dir.path().join("part.csv")).len(), 5);
    let second = infercost(dir.path(), &["bench", "--config", "cfg.json", "--records", "part.csv"]);
    assert!(stdout(&second).contains("skipped 5 existing"), "{}", stdout(&second));
    let rows = sorted_rows(&dir.path().join("full.csv"));
    assert_eq!(rows.len(), 24);
    assert_eq!(rows, sorted_rows(&dir.path().join("part.csv")));
}

const LAT: [f64; 12] = [0.4, 0.3, 0.2, 0.5, 0.05, 0.01, 0.02, 1.5, 0.1, 0.8, 0.6, 0.05];
const EN: [f64; 12] = [2.0, 1.0, 0.5, 1.5, 0.001, 0.03, 0.1, 5.0, 0.2, 2.0, 1.5, 0.1];

fn synthetic_records(limit: usize) -> Vec<MeasurementRecord> {
    let mut out = Vec::new();
    let mut i = 0usize;
    for algo in AlgorithmKind::ALL {
        for n in [10u64, 100, 1000] {
            for p in [2u64, 8] {
                for t in DataType::ALL {
                    let mut g = [0.0; 5];
                    g[i % 5] = [0.25, 0.5, 1.0][i % 3];
                    if i.is_multiple_of(7) {
                        g = [0.0; 5];
                    }
                    i += 1;
                    let inputs = PredictorInputs::new(algo, n, p, t, GuardrailConfig::from_array(g).unwrap()).unwrap();
                    let eval = |c: &[f64; 12], target| {
                        design_row(&inputs, target).iter().zip(c).map(|(x, b)| x * b).sum::<f64>()
                    };
                    out.push(MeasurementRecord {
                        algo,
                        n,
                        p,
                        t,
                        g_expl: g[0],
                        g_fair: g[1],
                        g_interp: g[2],
                        g_safety: g[3],
                        g_privacy: g[4],
                        latency_ms: eval(&LAT, Target::Latency),
                        energy_mj: eval(&EN, Target::Energy),
                        reps: 200,
                        warmup: 50,
                        provider: "synthetic".into(),
                        seed: 0,
                        timestamp: 0,
                    });
                }
            }
        }
    }
    out.truncate(limit);
    out
}

#[test]
fn fit_recovers_generator_and_writes_both() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r.csv"), MeasurementRecord::write_csv(&synthetic_records(usize::MAX)).unwrap())
        .unwrap();
    let o = infercost(dir.path(), &["fit", "--records", "r.csv", "--target", "both", "--out-dir", "eq"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for (name, truth) in [("latency", LAT), ("energy", EN)] {
        let eq = FittedEquation::from_json(
            &std::fs::read_to_string(dir.path().join("eq").join(format!("{name}.json"))).unwrap(),
        )
        .unwrap();
        for (got, want) in eq.coefficients.iter().zip(truth) {
            assert!(((got - want) / want).abs() <= 1e-8, "{name}: {got} vs {want}");
        }
    }
}

#[test]
fn fit_single_target_writes_one_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r.csv"), MeasurementRecord::write_csv(&synthetic_records(usize::MAX)).unwrap())
        .unwrap();
    assert!(infercost(dir.path(), &["fit", "--records", "r.csv", "--target", "energy", "--out-dir", "eq"])
        .status
        .success());
    assert!(dir.path().join("eq/energy.json").exists());
    assert!(!dir.path().join("eq/latency.json").exists());
}

#[test]
fn fit_with_too_few_rows_is_underdetermined() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r.csv"), MeasurementRecord::write_csv(&synthetic_records(12)).unwrap()).unwrap();
    let o = infercost(dir.path(), &["fit", "--records", "r.csv", "--target", "latency", "--out-dir", "eq"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("underdetermined"), "{}", stderr(&o));
    assert!(!dir.path().join("eq").exists());
}

#[test]
fn predict_intercept_only_and_expl_slot() {
    let dir = tempfile::tempdir().unwrap();
    let eq = FittedEquation::intercept_only(Target::Latency, 1.25, 0.0);
    std::fs::write(dir.path().join("eq.json"), eq.to_json().unwrap()).unwrap();
    let o = infercost(
        dir.path(),
        &[
            "predict",
            "--equation",
            "eq.json",
            "--algo",
            "RF",
            "--n",
            "500",
            "--p",
            "10",
            "--t",
            "2",
            "--expl",
            "0.7",
            "--json",
            "--out",
            "pred.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["point"], 1.25);
    assert_eq!(v["design_row"][7], 0.7);
    assert_eq!(v["design_row"][2], 1.0);
    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pred.json")).unwrap()).unwrap();
    assert_eq!(saved, v);
    let text = infercost(dir.path(), &["predict", "--equation", "eq.json", "--algo", "svm", "--n", "3", "--p", "1"]);
    assert!(stdout(&text).starts_with("latency: 1.25 ms"), "{}", stdout(&text));
}

#[test]
fn predict_rejects_out_of_range_guardrail() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("eq.json"),
        FittedEquation::intercept_only(Target::Energy, 1.0, 0.0).to_json().unwrap(),
    )
    .unwrap();
    let o = infercost(
        dir.path(),
        &["predict", "--equation", "eq.json", "--algo", "NN", "--n", "10", "--p", "2", "--fair", "1.5"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_on_empty_records() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    std::fs::write(dir.path().join("header.csv"), format!("{}\n", infercost::measurement::RECORD_HEADER)).unwrap();
    for f in ["empty.csv", "header.csv"] {
        let o = infercost(dir.path(), &["report", "--records", f, "--out-dir", "rep"]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("no records"));
    }
}

#[test]
fn report_rows_and_totals() {
    let dir = tempfile::tempdir().unwrap();
    let recs = synthetic_records(12);
    std::fs::write(dir.path().join("r.csv"), MeasurementRecord::write_csv(&recs).unwrap()).unwrap();
    let input_before = std::fs::read(dir.path().join("r.csv")).unwrap();
    let o = infercost(dir.path(), &["report", "--records", "r.csv", "--out-dir", "rep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(dir.path().join("r.csv")).unwrap(), input_before);

    // Recompute the column sums straight from the input text.
    let input = String::from_utf8(input_before).unwrap();
    let (mut lat, mut en) = (0.0, 0.0);
    for line in input.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        lat += cols[9].parse::<f64>().unwrap();
        en += cols[10].parse::<f64>().unwrap();
    }
    let summary = std::fs::read_to_string(dir.path().join("rep/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 1 + 12 + 1);
    let total: Vec<&str> = lines.last().unwrap().split(',').collect();
    assert_eq!(total[0], "TOTAL");
    assert!((total[6].parse::<f64>().unwrap() - lat).abs() <= 1e-12 * lat.abs());
    assert!((total[7].parse::<f64>().unwrap() - en).abs() <= 1e-12 * en.abs());
    let scatter = std::fs::read_to_string(dir.path().join("rep/scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 13);
    assert!(dir.path().join("rep/marginal.csv").exists());
}
