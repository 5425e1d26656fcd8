use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use qipf_cli::args::{Calibration, QipfArgs};
use qipf_cli::output::read_numeric_csv;
use qipf_cli::pipeline::{fit_qipf, sine_table};
use qipf_core::{save_predictions, GridSpec, PredictionSet, RowMatrix};

fn qipf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qipf")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = qipf(args);
    assert!(
        out.status.success(),
        "qipf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small trained model with a two-member ensemble, shared by the tests.
fn fixture() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-fixture");
        let _ = fs::remove_dir_all(&dir);
        ok(&[
            "train", "--n", "120", "--epochs", "40", "--ensemble", "2", "--seed", "3", "--out",
            s(&dir),
        ]);
        dir
    })
}

fn random_preds(n: usize, seed: u64) -> PredictionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let label = rng.random_range(0..3);
        let mut row: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        // most rows predict their label; a few do not
        let boost = if rng.random_bool(0.8) { label } else { (label + 1) % 3 };
        row[boost] += 3.0;
        rows.push(row);
        labels.push(label);
    }
    PredictionSet::new(RowMatrix::from_rows(&rows).unwrap(), labels).unwrap()
}

#[test]
fn usage_errors_exit_2_with_one_line() {
    let out = qipf(&["demo-sine", "--modes", "many", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.starts_with("error: usage: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn run_errors_exit_1_with_category() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = qipf(&["score", "--train", s(&missing), "--test", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error: io: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn demo_sine_writes_one_csv_and_svg_per_width() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["demo-sine", "--widths", "0.15,0.3", "--grid=-2:2:40", "--out", s(dir.path())]);
    for w in ["0.15", "0.3"] {
        let csv = fs::read_to_string(dir.path().join(format!("sine_sigma_{w}.csv"))).unwrap();
        // comment, header, 40 rows
        assert_eq!(csv.lines().count(), 42);
        assert!(csv.lines().nth(1).unwrap().ends_with("mode_8"));
        assert!(dir.path().join(format!("sine_sigma_{w}.svg")).exists());
    }
    assert!(dir.path().join("config.json").exists());
}

#[test]
fn demo_sine_single_step_grid() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["demo-sine", "--widths", "0.3", "--grid", "1:1:1", "--out", s(dir.path())]);
    let (_, rows) = read_numeric_csv(&dir.path().join("sine_sigma_0.3.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 1.0);
}

#[test]
fn demo_sine_csv_round_trips_and_replots_identically() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["demo-sine", "--widths", "0.3", "--modes", "5", "--grid=-1.5:1.5:31", "--out", s(dir.path())]);
    let csv = dir.path().join("sine_sigma_0.3.csv");
    let (header, rows) = read_numeric_csv(&csv).unwrap();
    let grid = GridSpec::new(-1.5, 1.5, 31).unwrap();
    let table = sine_table(0.3, 5, &grid, 512, Calibration::Inducing).unwrap();
    assert_eq!(header.len(), 3 + 5);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], table.x[i]);
        assert_eq!(row[1], table.ipf[i]);
        assert_eq!(row[2], table.spectrum.base_qipf[i]);
        assert_eq!(&row[3..], table.spectrum.modes.row(i));
    }
    let replot = dir.path().join("again.svg");
    qipf_cli::plot::sine_from_csv(&csv, &replot, 10.0).unwrap();
    assert_eq!(
        fs::read(&replot).unwrap(),
        fs::read(dir.path().join("sine_sigma_0.3.svg")).unwrap()
    );
}

#[test]
fn score_matches_library_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (random_preds(150, 1), random_preds(40, 2));
    let (train_csv, test_csv) = (dir.path().join("train.csv"), dir.path().join("test.csv"));
    save_predictions(&train, &train_csv).unwrap();
    save_predictions(&test, &test_csv).unwrap();
    let out = dir.path().join("out");
    ok(&[
        "score", "--train", s(&train_csv), "--test", s(&test_csv), "--downsample-n", "100",
        "--seed", "5", "--out", s(&out),
    ]);

    let opts = QipfArgs {
        downsample_n: 100,
        seed: 5,
        ..QipfArgs::default()
    };
    let fit = fit_qipf(&train, &opts).unwrap();
    let spectrum = fit.scorer.decompose(test.logits()).unwrap();
    let (header, rows) = read_numeric_csv(&out.join("scores.csv")).unwrap();
    assert_eq!(header.first().unwrap(), "base_qipf");
    assert_eq!(header.last().unwrap(), "score");
    assert_eq!(rows.len(), 40);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], spectrum.base_qipf[i]);
        assert_eq!(&row[1..5], spectrum.modes.row(i));
        assert_eq!(row[5], spectrum.score[i]);
    }

    let config: Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    let derived = &config["derived"];
    assert_eq!(config["command"], "score");
    assert_eq!(derived["silverman_sigma"].as_f64().unwrap(), fit.bandwidth.silverman_sigma);
    assert_eq!(derived["chosen_factor"].as_f64().unwrap(), fit.bandwidth.chosen_factor);
    assert_eq!(derived["inducing_rows"], 100);
}

#[test]
fn score_single_row_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    fs::write(&one, "0.5,2.0,1\n").unwrap();
    let out = dir.path().join("out");
    ok(&["score", "--train", s(&one), "--test", s(&one), "--out", s(&out)]);
    let (_, rows) = read_numeric_csv(&out.join("scores.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].iter().all(|v| *v == 0.0), "{:?}", rows[0]);
    let config = fs::read_to_string(out.join("config.json")).unwrap();
    assert!(config.contains("\"unit_base_width\": true"));
}

#[test]
fn score_fixed_factor_skips_cross_validation() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    save_predictions(&random_preds(60, 9), &csv).unwrap();
    ok(&["score", "--train", s(&csv), "--test", s(&csv), "--sigma-factor", "2", "--out", s(dir.path())]);
    let config: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(config["derived"]["chosen_factor"], 2.0);
    assert!(config["derived"]["cross_validation_roc_auc"].is_null());
    assert_eq!(config["args"]["qipf"]["sigma_factor"]["factor"], 2.0);
}

#[test]
fn score_rejects_mismatched_class_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    fs::write(&a, "0.1,0.2,0\n0.3,0.1,1\n0.5,0.0,1\n").unwrap();
    fs::write(&b, "0.1,0.2,0.3,0\n").unwrap();
    let out = qipf(&["score", "--train", s(&a), "--test", s(&b), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: shape: "));
}

#[test]
fn train_rejects_single_member_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let out = qipf(&["train", "--ensemble", "1", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: invalid-parameter: "));
}

#[test]
fn train_writes_model_dataset_and_predictions() {
    let dir = fixture();
    for f in ["dataset.json", "model.json", "train_preds.csv", "test_preds.csv", "config.json"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    assert!(dir.join("ensemble/member_00.json").exists());
    assert!(dir.join("ensemble/member_01.json").exists());
}

#[test]
fn score_then_evaluate() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let scored = dir.path().join("scored");
    ok(&[
        "score", "--train", s(&fx.join("train_preds.csv")), "--test", s(&fx.join("test_preds.csv")),
        "--out", s(&scored),
    ]);
    let eval = dir.path().join("eval");
    ok(&[
        "evaluate", "--scores", s(&scored.join("scores.csv")), "--predictions",
        s(&fx.join("test_preds.csv")), "--out", s(&eval),
    ]);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["samples"], 60);
    assert!(eval.join("curves.csv").exists());
}

#[test]
fn evaluate_rejects_length_mismatch() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    fs::write(&scores, "score\n0.1\n0.2\n").unwrap();
    let out = qipf(&[
        "evaluate", "--scores", s(&scores), "--predictions", s(&fx.join("test_preds.csv")), "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: shape: "));
}

#[test]
fn corrupt_and_baselines() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let corrupted = dir.path().join("corrupted");
    ok(&[
        "corrupt", "--dataset", s(&fx.join("dataset.json")), "--corruption", "rotation", "--severity",
        "3", "--model", s(&fx.join("model.json")), "--out", s(&corrupted),
    ]);
    assert!(corrupted.join("test_preds.csv").exists());

    let mc = dir.path().join("mc");
    ok(&[
        "baseline", "--method", "mc-dropout", "--dataset", s(&fx.join("dataset.json")), "--model",
        s(&fx.join("model.json")), "--rate", "0", "--runs", "5", "--out", s(&mc),
    ]);
    let (_, rows) = read_numeric_csv(&mc.join("scores.csv")).unwrap();
    assert_eq!(rows.len(), 60);
    assert!(rows.iter().all(|r| r[0] == 0.0));

    let ens = dir.path().join("ens");
    ok(&[
        "baseline", "--method", "ensemble", "--dataset", s(&fx.join("dataset.json")), "--model",
        s(&fx.join("model.json")), "--ensemble-dir", s(&fx.join("ensemble")), "--corruption",
        "rotation", "--severity", "5", "--out", s(&ens),
    ]);
    let (_, rows) = read_numeric_csv(&ens.join("scores.csv")).unwrap();
    assert!(rows.iter().all(|r| r[0] >= 0.0 && r[0] <= 0.5));
}

#[test]
fn ensemble_baseline_needs_two_members() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = qipf(&[
        "baseline", "--method", "ensemble", "--dataset", s(&fx.join("dataset.json")), "--model",
        s(&fx.join("model.json")), "--ensemble", s(&fx.join("ensemble/member_00.json")), "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: invalid-parameter: "), "{}", stderr(&out));
}

#[test]
fn sweep_without_members_is_a_parameter_error() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = qipf(&[
        "sweep", "--dataset", s(&fx.join("dataset.json")), "--model", s(&fx.join("model.json")),
        "--severities", "0", "--out", s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error: invalid-parameter: "), "{}", stderr(&out));
}

#[test]
fn sweep_at_severity_zero_uses_the_clean_test_set() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "sweep", "--dataset", s(&fx.join("dataset.json")), "--model", s(&fx.join("model.json")),
        "--ensemble-dir", s(&fx.join("ensemble")), "--severities", "0", "--mc-runs", "10", "--out",
        s(dir.path()),
    ]);
    let clean = qipf_core::load_predictions(fx.join("test_preds.csv")).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("severity_metrics.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(&row[1], "0");
        assert_eq!(row[4].parse::<f64>().unwrap(), clean.accuracy());
    }

    let mut table = csv::Reader::from_path(dir.path().join("table.csv")).unwrap();
    // a method label plus mean and std of three metrics
    assert_eq!(table.headers().unwrap().len(), 7);
    assert_eq!(table.records().count(), 3);
    for m in ["qipf", "mc-dropout", "ensemble"] {
        assert!(dir.path().join(format!("reports/{m}_severity_0.json")).exists());
    }
    for svg in ["roc_auc.svg", "pr_auc.svg", "point_biserial.svg"] {
        assert!(dir.path().join(svg).exists());
    }
}

#[test]
fn sweep_single_method_table_has_one_row() {
    let fx = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "sweep", "--dataset", s(&fx.join("dataset.json")), "--model", s(&fx.join("model.json")),
        "--methods", "qipf,qipf", "--severities", "0,5", "--out", s(dir.path()),
    ]);
    let mut table = csv::Reader::from_path(dir.path().join("table.csv")).unwrap();
    assert_eq!(table.records().count(), 1);
}
