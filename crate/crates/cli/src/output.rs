//! File writers shared by the subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use qipf_core::{Error, Result};

use crate::pipeline::{SineTable, SweepRow, TableRow};

pub const CONFIG_FILE: &str = "config.json";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Shortest round-trip decimal, empty for undefined values.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Writes `config.json`: the subcommand, its arguments and anything the run
/// derived (chosen widths, energies, accuracies).
pub fn write_config<A: Serialize>(dir: &Path, command: &str, args: &A, derived: Value) -> Result<()> {
    let echo = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
        "derived": derived,
    });
    write_json(&dir.join(CONFIG_FILE), &echo)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

pub fn sine_csv_name(sigma: f64) -> String {
    format!("sine_sigma_{sigma}.csv")
}

/// `# sigma=..,samples=..` comment line, then `x,ipf,qipf,mode_1..mode_m`.
pub fn write_sine_csv(path: &Path, table: &SineTable, samples: usize) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# sigma={},samples={}", table.sigma, samples)?;
    let mut w = csv::Writer::from_writer(file);
    let m = table.spectrum.mode_count();
    let mut header = vec!["x".to_string(), "ipf".into(), "qipf".into()];
    header.extend((1..=m).map(|p| format!("mode_{p}")));
    w.write_record(&header)?;
    for (i, x) in table.x.iter().enumerate() {
        let mut rec = vec![x.to_string(), table.ipf[i].to_string(), table.spectrum.base_qipf[i].to_string()];
        rec.extend(table.spectrum.modes.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV with a header row (skipping `#` comment lines) into column
/// names and numeric rows. Empty fields become NaN.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, f)| {
                if f.is_empty() {
                    return Ok(f64::NAN);
                }
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("column {col}: `{f}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| {
        Error::InvalidParameter(format!("{} has no column `{name}`", path.display()))
    })
}

/// `base_qipf,mode_1..mode_m,score`, one row per query.
pub fn write_scores_csv(path: &Path, spectrum: &qipf_core::ModeSpectrum) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["base_qipf".to_string()];
    header.extend((1..=spectrum.mode_count()).map(|p| format!("mode_{p}")));
    header.push("score".into());
    w.write_record(&header)?;
    for i in 0..spectrum.len() {
        let mut rec = vec![spectrum.base_qipf[i].to_string()];
        rec.extend(spectrum.modes.row(i).iter().map(|v| v.to_string()));
        rec.push(spectrum.score[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_single_scores_csv(path: &Path, scores: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["score"])?;
    for s in scores {
        w.write_record([s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub const SEVERITY_METRICS_FILE: &str = "severity_metrics.csv";
pub const TABLE_FILE: &str = "table.csv";

pub fn write_severity_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "method",
        "severity",
        "samples",
        "wrong",
        "accuracy",
        "mean_score",
        "roc_auc",
        "pr_auc",
        "point_biserial",
    ])?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.severity.to_string(),
            r.report.samples.to_string(),
            r.report.wrong.to_string(),
            r.accuracy.to_string(),
            r.report.mean_score.to_string(),
            fmt_opt(r.report.roc_auc),
            fmt_opt(r.report.pr_auc),
            fmt_opt(r.report.point_biserial),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per method: mean and population std of each metric across
/// severities (severities where a metric is undefined are skipped).
pub fn write_table_csv(path: &Path, table: &[TableRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "method",
        "roc_auc_mean",
        "roc_auc_std",
        "pr_auc_mean",
        "pr_auc_std",
        "point_biserial_mean",
        "point_biserial_std",
    ])?;
    for row in table {
        let mut rec = vec![row.method.name().to_string()];
        for stat in [row.roc_auc, row.pr_auc, row.point_biserial] {
            rec.push(fmt_opt(stat.map(|s| s.0)));
            rec.push(fmt_opt(stat.map(|s| s.1)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn report_path(dir: &Path, method: &str, severity: u8) -> PathBuf {
    dir.join("reports").join(format!("{method}_severity_{severity}.json"))
}
