//! SVG line charts. Every chart is drawn from a CSV written earlier in the
//! same run, never from in-memory results.

use std::path::Path;

use plotters::prelude::*;

use qipf_core::{Error, Result};

use crate::output::{column, read_numeric_csv};

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(format!("plot: {e}")))
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<()> {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (x0, x1) = padded_range(xs);
    let (y0, y1) = padded_range(ys);

    let root = SVGBackend::new(path, (800, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    for (i, s) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let mut labelled = false;
        // NaN marks an undefined value; break the line there
        for segment in s.points.split(|p| !p.1.is_finite()).filter(|seg| !seg.is_empty()) {
            let drawn = chart
                .draw_series(LineSeries::new(segment.iter().cloned(), color.stroke_width(2)))
                .map_err(plot_err)?;
            if !labelled {
                labelled = true;
                drawn
                    .label(s.name.clone())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
            }
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// IPF, base QIPF and every mode against x, values clipped to `±cap`.
pub fn sine_from_csv(csv: &Path, svg: &Path, cap: f64) -> Result<()> {
    let (header, rows) = read_numeric_csv(csv)?;
    let x = column(&header, "x", csv)?;
    let series = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != x)
        .map(|(i, name)| Series {
            name: name.clone(),
            points: rows.iter().map(|r| (r[x], r[i].clamp(-cap, cap))).collect(),
        })
        .collect::<Vec<_>>();
    let title = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    line_chart(svg, &title, "x", &format!("value (clipped to ±{cap})"), &series)
}

/// One line per method of `metric` against severity, from the long-format
/// severity CSV.
pub fn severity_from_csv(csv: &Path, metric: &str, svg: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(csv)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let m = column(&header, "method", csv)?;
    let s = column(&header, "severity", csv)?;
    let v = column(&header, metric, csv)?;
    let mut series: Vec<Series> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let parse = |f: &str| f.parse::<f64>().unwrap_or(f64::NAN);
        let point = (parse(&rec[s]), parse(&rec[v]));
        match series.iter_mut().find(|x| x.name == rec[m]) {
            Some(existing) => existing.points.push(point),
            None => series.push(Series {
                name: rec[m].to_string(),
                points: vec![point],
            }),
        }
    }
    line_chart(svg, &format!("{metric} vs severity"), "severity", metric, &series)
}

/// ROC and PR curves from a `curve,x,y` CSV.
pub fn curves_from_csv(csv: &Path, roc_svg: &Path, pr_svg: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(csv)?;
    let mut roc = Vec::new();
    let mut pr = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let point = (
            rec[1].parse::<f64>().unwrap_or(f64::NAN),
            rec[2].parse::<f64>().unwrap_or(f64::NAN),
        );
        match &rec[0] {
            "roc" => roc.push(point),
            _ => pr.push(point),
        }
    }
    line_chart(
        roc_svg,
        "ROC",
        "false positive rate",
        "true positive rate",
        &[Series { name: "roc".into(), points: roc }],
    )?;
    line_chart(
        pr_svg,
        "precision-recall",
        "recall",
        "precision",
        &[Series { name: "pr".into(), points: pr }],
    )
}
