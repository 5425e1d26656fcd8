//! Error-detection metrics.
//!
//! Every metric treats a higher score as "more likely an error". `errors[i]`
//! is true when the classifier got sample `i` wrong.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

fn validate(scores: &[f64], errors: &[bool]) -> Result<(usize, usize)> {
    check_dim(scores.len(), errors.len())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let pos = errors.iter().filter(|&&e| e).count();
    Ok((pos, errors.len() - pos))
}

/// Indices sorted by descending score.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    idx
}

/// Blocks of equal score in descending order, as `(errors, correct)` counts.
fn tie_blocks(scores: &[f64], errors: &[bool]) -> Vec<(usize, usize)> {
    let order = descending(scores);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut tp, mut fp) = (0, 0);
        while i < order.len() && scores[order[i]] == s {
            if errors[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        blocks.push((tp, fp));
    }
    blocks
}

/// Area under the ROC curve as the Mann–Whitney statistic
/// `P(score_err > score_ok) + ½·P(tie)`.
pub fn roc_auc(scores: &[f64], errors: &[bool]) -> Result<f64> {
    let (pos, neg) = validate(scores, errors)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC-AUC needs both correct and wrong predictions".into(),
        ));
    }
    // Ascending average ranks; sum over positives gives U + P(P+1)/2.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j share their average
        let avg = (i + 1 + j) as f64 / 2.0;
        let hits = order[i..j].iter().filter(|&&k| errors[k]).count();
        rank_sum += avg * hits as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * n))
}

/// ROC curve vertices `(false positive rate, true positive rate)` from `(0,0)`
/// to `(1,1)`, one vertex per tie block.
pub fn roc_curve(scores: &[f64], errors: &[bool]) -> Result<Vec<[f64; 2]>> {
    let (pos, neg) = validate(scores, errors)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC curve needs both correct and wrong predictions".into(),
        ));
    }
    let mut points = vec![[0.0, 0.0]];
    let (mut tp, mut fp) = (0, 0);
    for (t, f) in tie_blocks(scores, errors) {
        tp += t;
        fp += f;
        points.push([fp as f64 / neg as f64, tp as f64 / pos as f64]);
    }
    Ok(points)
}

/// Average precision `Σ_j (R_j − R_{j−1})·P_j` over the descending-score
/// sweep, with tied scores entering as one block.
pub fn pr_auc(scores: &[f64], errors: &[bool]) -> Result<f64> {
    Ok(pr_sweep(scores, errors)?.0)
}

/// `(recall, precision)` at each tie block of the descending sweep.
pub fn pr_curve(scores: &[f64], errors: &[bool]) -> Result<Vec<[f64; 2]>> {
    Ok(pr_sweep(scores, errors)?.1)
}

fn pr_sweep(scores: &[f64], errors: &[bool]) -> Result<(f64, Vec<[f64; 2]>)> {
    let (pos, _) = validate(scores, errors)?;
    if pos == 0 {
        return Err(Error::UndefinedMetric(
            "PR-AUC needs at least one wrong prediction".into(),
        ));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut points = Vec::new();
    for (t, f) in tie_blocks(scores, errors) {
        tp += t;
        fp += f;
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        points.push([recall, precision]);
    }
    Ok((ap, points))
}

/// Point-biserial correlation `(M₁ − M₀)/s_n · √(pq)` between the scores and
/// the error indicator, with `s_n` the population standard deviation.
pub fn point_biserial(scores: &[f64], errors: &[bool]) -> Result<f64> {
    let (pos, neg) = validate(scores, errors)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "point-biserial correlation needs both classes".into(),
        ));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::UndefinedMetric("scores have zero variance".into()));
    }
    let (mut m1, mut m0) = (0.0, 0.0);
    for (s, &e) in scores.iter().zip(errors) {
        if e {
            m1 += s;
        } else {
            m0 += s;
        }
    }
    m1 /= pos as f64;
    m0 /= neg as f64;
    let (p, q) = (pos as f64 / n, neg as f64 / n);
    Ok((m1 - m0) / var.sqrt() * (p * q).sqrt())
}

/// Score counts per bin for correct and wrong predictions over shared edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges spanning `[min, max]` of all scores.
    pub edges: Vec<f64>,
    pub correct: Vec<usize>,
    pub wrong: Vec<usize>,
}

/// Bins are right-open except the last, which is closed.
pub fn histogram(scores: &[f64], errors: &[bool], bins: usize) -> Result<Histogram> {
    validate(scores, errors)?;
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let (lo, hi) = if scores.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut correct = vec![0; bins];
    let mut wrong = vec![0; bins];
    for (&s, &e) in scores.iter().zip(errors) {
        let bin = if width > 0.0 {
            (((s - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        if e {
            wrong[bin] += 1;
        } else {
            correct[bin] += 1;
        }
    }
    Ok(Histogram {
        edges,
        correct,
        wrong,
    })
}

/// Identifies what an [`EvalReport`] was computed on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub method: String,
    pub corruption: Option<String>,
    pub severity: Option<u8>,
    pub seed: Option<u64>,
}

/// Error-detection summary for one method on one test set.
///
/// Metrics that are undefined for the data (for example ROC-AUC with no wrong
/// predictions) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub meta: ReportMeta,
    pub samples: usize,
    pub wrong: usize,
    pub mean_score: f64,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub point_biserial: Option<f64>,
    pub roc_points: Vec<[f64; 2]>,
    pub pr_points: Vec<[f64; 2]>,
    pub histogram: Histogram,
}

pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

impl EvalReport {
    pub fn evaluate(
        scores: &[f64],
        errors: &[bool],
        bins: usize,
        meta: ReportMeta,
    ) -> Result<EvalReport> {
        let (pos, _) = validate(scores, errors)?;
        if scores.is_empty() {
            return Err(Error::invalid("cannot evaluate an empty score set"));
        }
        let defined = |r: Result<f64>| -> Result<Option<f64>> {
            match r {
                Ok(v) => Ok(Some(v)),
                Err(Error::UndefinedMetric(_)) => Ok(None),
                Err(e) => Err(e),
            }
        };
        Ok(EvalReport {
            meta,
            samples: scores.len(),
            wrong: pos,
            mean_score: scores.iter().sum::<f64>() / scores.len() as f64,
            roc_auc: defined(roc_auc(scores, errors))?,
            pr_auc: defined(pr_auc(scores, errors))?,
            point_biserial: defined(point_biserial(scores, errors))?,
            roc_points: roc_curve(scores, errors).unwrap_or_default(),
            pr_points: pr_curve(scores, errors).unwrap_or_default(),
            histogram: histogram(scores, errors, bins)?,
        })
    }

    /// Writes `curve,x,y` rows for the ROC (`fpr,tpr`) and PR
    /// (`recall,precision`) curves.
    pub fn write_curves_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["curve", "x", "y"])?;
        for p in &self.roc_points {
            w.write_record(["roc", &p[0].to_string(), &p[1].to_string()])?;
        }
        for p in &self.pr_points {
            w.write_record(["pr", &p[0].to_string(), &p[1].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
