//! One function per subcommand: read inputs, call the pipeline, write files.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use qipf_core::network::{ensemble_scores, mc_dropout_scores, train_ensemble};
use qipf_core::{
    load_predictions, make_blobs, make_moons, save_predictions, train, CorruptionSpec, Dataset,
    Error, EvalReport, Result, Split, ToyModel, TrainConfig,
};
use qipf_core::metrics::ReportMeta;

use crate::args::{
    BaselineArgs, BaselineMethod, CorruptArgs, DemoSineArgs, EnsembleArgs, EvaluateArgs,
    Generator, ScoreArgs, SweepArgs, TrainArgs,
};
use crate::output::{
    column, ensure_dir, read_numeric_csv, report_path, sine_csv_name, write_config, write_json,
    write_scores_csv, write_severity_csv, write_sine_csv, write_single_scores_csv,
    write_table_csv, SEVERITY_METRICS_FILE, TABLE_FILE,
};
use crate::pipeline::{
    check_ensemble, check_model, corrupted_test, fit_qipf, run_sweep, sine_table, summary_table,
    SweepSettings,
};
use crate::plot;

pub const SWEEP_METRICS: [&str; 3] = ["roc_auc", "pr_auc", "point_biserial"];

pub fn demo_sine(args: &DemoSineArgs) -> Result<()> {
    if args.widths.is_empty() {
        return Err(Error::InvalidParameter("--widths is empty".into()));
    }
    ensure_dir(&args.out)?;
    let mut derived = Vec::new();
    for &sigma in &args.widths {
        let table = sine_table(sigma, args.modes, &args.grid, args.samples, args.calibration)?;
        let csv = args.out.join(sine_csv_name(sigma));
        write_sine_csv(&csv, &table, args.samples)?;
        plot::sine_from_csv(&csv, &csv.with_extension("svg"), args.plot_cap)?;
        derived.push(json!({ "sigma": sigma, "energies": table.spectrum.energies }));
    }
    write_config(&args.out, "demo-sine", args, json!({ "widths": derived }))
}

fn generate(args: &TrainArgs) -> Result<Dataset> {
    let ds = match args.generator {
        Generator::Blobs => make_blobs(args.n, args.classes, args.spread, args.seed)?,
        Generator::Moons => make_moons(args.n, args.noise, args.seed)?,
    };
    ds.with_test_split(args.test_frac, args.seed)
}

pub fn member_path(dir: &Path, j: usize) -> PathBuf {
    dir.join("ensemble").join(format!("member_{j:02}.json"))
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    if args.ensemble == 1 {
        return Err(Error::InvalidParameter(
            "--ensemble must be 0 or at least 2 members".into(),
        ));
    }
    let dataset = match &args.dataset {
        Some(path) => Dataset::load_json(path)?,
        None => generate(args)?,
    };
    let config = TrainConfig {
        hidden: args.hidden.clone(),
        epochs: args.epochs,
        learning_rate: args.lr,
        dropout_rate: args.dropout,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let model = train(&dataset, &config)?;
    ensure_dir(&args.out)?;
    dataset.save_json(args.out.join("dataset.json"))?;
    model.save_json(args.out.join("model.json"))?;
    for (split, name) in [(Split::Train, "train_preds.csv"), (Split::Test, "test_preds.csv")] {
        let (x, y) = dataset.part(split);
        if !y.is_empty() {
            save_predictions(&model.predict_raw(&x, &y)?, args.out.join(name))?;
        }
    }
    let mut member_accuracy = Vec::new();
    if args.ensemble > 0 {
        let member_config = TrainConfig {
            seed: args.seed.wrapping_add(1),
            ..config.clone()
        };
        fs::create_dir_all(args.out.join("ensemble"))?;
        for (j, m) in train_ensemble(&dataset, &member_config, args.ensemble)?.iter().enumerate() {
            m.save_json(member_path(&args.out, j))?;
            member_accuracy.push(m.training.as_ref().map(|t| t.train_accuracy));
        }
    }
    write_config(
        &args.out,
        "train",
        args,
        json!({
            "train_rows": dataset.indices(Split::Train).len(),
            "test_rows": dataset.indices(Split::Test).len(),
            "training": model.training,
            "ensemble_train_accuracy": member_accuracy,
        }),
    )
}

pub fn corrupt_cmd(args: &CorruptArgs) -> Result<()> {
    let dataset = Dataset::load_json(&args.dataset)?;
    let spec = CorruptionSpec::new(args.corruption, args.severity)?;
    let features = corrupted_test(&dataset, args.corruption, args.severity)?;
    let corrupted = dataset.with_part_features(Split::Test, &features)?;
    ensure_dir(&args.out)?;
    corrupted.save_json(args.out.join("dataset.json"))?;
    let mut accuracy = None;
    if let Some(path) = &args.model {
        let model = ToyModel::load_json(path)?;
        check_model(&model, &dataset)?;
        let (_, labels) = dataset.part(Split::Test);
        let preds = model.predict_raw(&features, &labels)?;
        accuracy = Some(preds.accuracy());
        save_predictions(&preds, args.out.join("test_preds.csv"))?;
    }
    write_config(
        &args.out,
        "corrupt",
        args,
        json!({ "parameter": spec.parameter(), "test_accuracy": accuracy }),
    )
}

pub fn score_cmd(args: &ScoreArgs) -> Result<()> {
    let train_set = load_predictions(&args.train)?;
    let test_set = load_predictions(&args.test)?;
    if train_set.classes() != test_set.classes() {
        return Err(Error::Shape {
            expected: train_set.classes(),
            found: test_set.classes(),
        });
    }
    let fit = fit_qipf(&train_set, &args.qipf)?;
    let spectrum = fit.scorer.decompose(test_set.logits())?;
    ensure_dir(&args.out)?;
    write_scores_csv(&args.out.join("scores.csv"), &spectrum)?;
    write_config(&args.out, "score", args, json!(fit.summary()))
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let (header, rows) = read_numeric_csv(&args.scores)?;
    let col = column(&header, &args.column, &args.scores)?;
    let scores: Vec<f64> = rows.iter().map(|r| r[col]).collect();
    let preds = load_predictions(&args.predictions)?;
    if scores.len() != preds.len() {
        return Err(Error::Shape {
            expected: preds.len(),
            found: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Data {
            line: i + 1,
            message: format!("score column `{}` is not finite", args.column),
        });
    }
    let meta = ReportMeta {
        method: args.method.clone(),
        ..ReportMeta::default()
    };
    let report = EvalReport::evaluate(&scores, &preds.errors(), args.bins, meta)?;
    ensure_dir(&args.out)?;
    write_json(&args.out.join("report.json"), &report)?;
    let curves = args.out.join("curves.csv");
    report.write_curves_csv(fs::File::create(&curves)?)?;
    if report.roc_auc.is_some() {
        plot::curves_from_csv(&curves, &args.out.join("roc.svg"), &args.out.join("pr.svg"))?;
    }
    write_config(
        &args.out,
        "evaluate",
        args,
        json!({
            "samples": report.samples,
            "wrong": report.wrong,
            "roc_auc": report.roc_auc,
            "pr_auc": report.pr_auc,
            "point_biserial": report.point_biserial,
        }),
    )
}

/// Members from `--ensemble` files, then `*.json` in `--ensemble-dir` by name.
pub fn load_members(args: &EnsembleArgs) -> Result<Vec<ToyModel>> {
    let mut paths = args.ensemble.clone();
    if let Some(dir) = &args.ensemble_dir {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        found.retain(|p| p.extension().is_some_and(|e| e == "json"));
        found.sort();
        paths.extend(found);
    }
    paths.iter().map(ToyModel::load_json).collect()
}

pub fn baseline_cmd(args: &BaselineArgs) -> Result<()> {
    let dataset = Dataset::load_json(&args.dataset)?;
    let model = ToyModel::load_json(&args.model)?;
    check_model(&model, &dataset)?;
    let features = match args.corruption {
        Some(kind) => corrupted_test(&dataset, kind, args.severity)?,
        None => dataset.part(Split::Test).0,
    };
    if features.is_empty() {
        return Err(Error::InvalidParameter("dataset has no test split".into()));
    }
    let (_, labels) = dataset.part(Split::Test);
    let preds = model.predict_raw(&features, &labels)?;
    let (scores, members) = match args.method {
        BaselineMethod::McDropout => (
            mc_dropout_scores(&model, &features, args.rate, args.runs, args.seed)?,
            0,
        ),
        BaselineMethod::Ensemble => {
            let members = load_members(&args.members)?;
            check_ensemble(&members)?;
            for m in &members {
                check_model(m, &dataset)?;
            }
            (ensemble_scores(&members, &features)?, members.len())
        }
    };
    ensure_dir(&args.out)?;
    write_single_scores_csv(&args.out.join("scores.csv"), &scores)?;
    save_predictions(&preds, args.out.join("test_preds.csv"))?;
    write_config(
        &args.out,
        "baseline",
        args,
        json!({ "test_accuracy": preds.accuracy(), "ensemble_members": members }),
    )
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let dataset = Dataset::load_json(&args.dataset)?;
    let model = ToyModel::load_json(&args.model)?;
    let mut methods = Vec::new();
    for m in &args.methods {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    let members = if methods.contains(&crate::args::Method::Ensemble) {
        load_members(&args.members)?
    } else {
        Vec::new()
    };
    let settings = SweepSettings {
        corruption: args.corruption,
        severities: args.severities.clone(),
        methods: methods.clone(),
        qipf: args.qipf.clone(),
        mc_rate: args.mc_rate,
        mc_runs: args.mc_runs,
        bins: args.bins,
    };
    let outcome = run_sweep(&dataset, &model, &members, &settings)?;

    ensure_dir(&args.out.join("reports"))?;
    for row in &outcome.rows {
        write_json(&report_path(&args.out, row.method.name(), row.severity), &row.report)?;
    }
    let severity_csv = args.out.join(SEVERITY_METRICS_FILE);
    write_severity_csv(&severity_csv, &outcome.rows)?;
    write_table_csv(&args.out.join(TABLE_FILE), &summary_table(&outcome.rows, &methods))?;
    for metric in SWEEP_METRICS {
        plot::severity_from_csv(&severity_csv, metric, &args.out.join(format!("{metric}.svg")))?;
    }
    write_config(
        &args.out,
        "sweep",
        args,
        json!({
            "qipf": outcome.fit.as_ref().map(|f| f.summary()),
            "ensemble_members": members.len(),
        }),
    )
}
