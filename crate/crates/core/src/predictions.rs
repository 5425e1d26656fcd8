//! Raw prediction sets and their CSV exchange format.
//!
//! File layout: an optional header `y0,y1,...,y{k-1},label`, then one row per
//! sample holding `k` decimal logits and the integer true label. Values are
//! written in shortest round-trip form, so save then load is value-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::matrix::RowMatrix;

/// Logit vectors with true labels; predicted labels and correctness are
/// derived by argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    logits: RowMatrix,
    labels: Vec<usize>,
    predicted: Vec<usize>,
}

/// Index of the largest entry, first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl PredictionSet {
    pub fn new(logits: RowMatrix, labels: Vec<usize>) -> Result<Self> {
        check_dim(logits.rows(), labels.len())?;
        let predicted = logits.iter_rows().map(argmax).collect();
        Ok(PredictionSet {
            logits,
            labels,
            predicted,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of classes, i.e. logit dimension.
    pub fn classes(&self) -> usize {
        self.logits.cols()
    }

    pub fn logits(&self) -> &RowMatrix {
        &self.logits
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn predicted(&self) -> &[usize] {
        &self.predicted
    }

    pub fn correct(&self) -> Vec<bool> {
        self.predicted
            .iter()
            .zip(&self.labels)
            .map(|(p, l)| p == l)
            .collect()
    }

    /// `true` where the prediction is wrong.
    pub fn errors(&self) -> Vec<bool> {
        self.correct().into_iter().map(|c| !c).collect()
    }

    pub fn accuracy(&self) -> f64 {
        let ok = self.correct().iter().filter(|c| **c).count();
        ok as f64 / self.len().max(1) as f64
    }

    /// Subset with the given rows, in the order given.
    pub fn select(&self, rows: &[usize]) -> PredictionSet {
        PredictionSet {
            logits: self.logits.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            predicted: rows.iter().map(|&i| self.predicted[i]).collect(),
        }
    }

    /// Max-logit scalar projection, one value per row.
    pub fn max_logit_projection(&self) -> RowMatrix {
        let data = self
            .logits
            .iter_rows()
            .map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        RowMatrix::from_flat(data, 1).expect("one column")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.classes()).map(|j| format!("y{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.classes() + 1);
        for (row, label) in self.logits.iter_rows().zip(&self.labels) {
            record.clear();
            record.extend(row.iter().map(|v| v.to_string()));
            record.push(label.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the CSV format. Line numbers in errors count data rows from 1.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let mut k: Option<usize> = None;
        let mut line = 0;
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                line: line + 1,
                message: e.to_string(),
            })?;
            if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                let last = record.get(record.len() - 1).unwrap_or("");
                if last != "label" {
                    return Err(Error::Parse {
                        line: 0,
                        message: format!("unrecognized header: expected y0,...,label, got `{last}` last"),
                    });
                }
                k = Some(record.len() - 1);
                continue;
            }
            line += 1;
            if record.len() < 2 {
                return Err(Error::Parse {
                    line,
                    message: "a row needs at least one logit and a label".into(),
                });
            }
            let width = record.len() - 1;
            match k {
                None => k = Some(width),
                Some(k) if k != width => {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected {k} logits, found {width}"),
                    })
                }
                _ => {}
            }
            for (col, field) in record.iter().take(width).enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {col}: `{field}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Data {
                        line,
                        message: format!("column {col}: non-finite logit `{field}`"),
                    });
                }
                data.push(v);
            }
            let label_field = &record[width];
            let label: usize = label_field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("label `{label_field}` is not a non-negative integer"),
            })?;
            if label >= width {
                return Err(Error::Data {
                    line,
                    message: format!("label {label} out of range for {width} classes"),
                });
            }
            labels.push(label);
        }
        let k = k.ok_or_else(|| Error::Parse {
            line: 0,
            message: "empty prediction file".into(),
        })?;
        PredictionSet::new(RowMatrix::from_flat(data, k)?, labels)
    }
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionSet> {
    PredictionSet::read_csv(BufReader::new(File::open(path)?))
}

pub fn save_predictions(set: &PredictionSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    set.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Indices of a seeded uniform sample of `target` rows out of `n`, without
/// replacement, in ascending order.
pub fn sample_rows(n: usize, target: usize, seed: u64) -> Result<Vec<usize>> {
    if target > n {
        return Err(Error::invalid(format!(
            "cannot draw {target} rows from {n}"
        )));
    }
    if target == n {
        return Ok((0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = index::sample(&mut rng, n, target).into_vec();
    rows.sort_unstable();
    Ok(rows)
}

/// Seeded uniform subsample keeping the survivors' original order.
pub fn downsample(set: &PredictionSet, target_n: usize, seed: u64) -> Result<PredictionSet> {
    let rows = sample_rows(set.len(), target_n, seed)?;
    Ok(set.select(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn parse(text: &str) -> Result<PredictionSet> {
        PredictionSet::read_csv(text.as_bytes())
    }

    #[test]
    fn single_row_without_header() {
        let set = parse("0.1,0.9,1\n").unwrap();
        assert_eq!(set.classes(), 2);
        assert_eq!(set.predicted(), &[1]);
        assert_eq!(set.correct(), vec![true]);
    }

    #[test]
    fn header_is_accepted() {
        let set = parse("y0,y1,y2,label\n1,2,3,0\n3,2,1,0\n").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.errors(), vec![true, false]);
        assert_eq!(set.accuracy(), 0.5);
    }

    #[test]
    fn nan_is_a_data_error_on_its_line() {
        match parse("y0,y1,label\nnan,0.2,1\n") {
            Err(Error::Data { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match parse("0.1,0.2,0\n0.3,inf,1\n") {
            Err(Error::Data { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_report_line() {
        assert!(matches!(parse("0.1,0.2,0\n0.1,x,0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("0.1,0.2,0\n0.1,0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("0.1,0.2,5\n"), Err(Error::Data { line: 1, .. })));
        assert!(matches!(parse("0.1,0.2,-1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse("").is_err());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = 4;
        let data: Vec<f64> = (0..1000 * k)
            .map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-8..8)) - 0.5)
            .collect();
        let labels = (0..1000).map(|_| rng.random_range(0..k)).collect();
        let set = PredictionSet::new(RowMatrix::from_flat(data, k).unwrap(), labels).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.csv");
        save_predictions(&set, &path).unwrap();
        let back = load_predictions(&path).unwrap();
        assert_eq!(back, set);
        for (a, b) in back.logits().as_slice().iter().zip(set.logits().as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn argmax_ignores_constant_shift() {
        let row = [0.3, 2.0, -1.0];
        let shifted: Vec<f64> = row.iter().map(|v| v + 100.0).collect();
        assert_eq!(argmax(&row), argmax(&shifted));
    }

    fn toy_set(n: usize) -> PredictionSet {
        let data: Vec<f64> = (0..n * 2).map(|i| i as f64).collect();
        PredictionSet::new(RowMatrix::from_flat(data, 2).unwrap(), vec![0; n]).unwrap()
    }

    #[test]
    fn downsample_edges() {
        let set = toy_set(10);
        assert_eq!(downsample(&set, 10, 3).unwrap(), set);
        let one = downsample(&set, 1, 42).unwrap();
        assert_eq!(one, downsample(&set, 1, 42).unwrap());
        assert_eq!(one.len(), 1);
        assert!(matches!(downsample(&set, 11, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn downsample_preserves_order() {
        let set = toy_set(50);
        let sub = downsample(&set, 20, 5).unwrap();
        let firsts: Vec<f64> = sub.logits().iter_rows().map(|r| r[0]).collect();
        assert!(firsts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn downsample_is_uniform() {
        let mut hits = [0usize; 10];
        let seeds = 2000;
        for seed in 0..seeds {
            for i in sample_rows(10, 5, seed).unwrap() {
                hits[i] += 1;
            }
        }
        for h in hits {
            let freq = h as f64 / seeds as f64;
            assert!((freq - 0.5).abs() <= 0.05, "{freq}");
        }
    }
}
