//! Seeded synthetic classification datasets.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::matrix::RowMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub generator: String,
    pub seed: u64,
    pub classes: usize,
    pub features: RowMatrix,
    pub labels: Vec<usize>,
    pub split: Vec<Split>,
}

impl Dataset {
    pub fn new(
        generator: impl Into<String>,
        seed: u64,
        classes: usize,
        features: RowMatrix,
        labels: Vec<usize>,
    ) -> Result<Self> {
        check_dim(features.rows(), labels.len())?;
        if let Some(bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateData("features must be finite".into()));
        }
        let split = vec![Split::Train; labels.len()];
        Ok(Dataset {
            generator: generator.into(),
            seed,
            classes,
            features,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }

    /// Tags a seeded random `test_fraction` of the rows as test data.
    pub fn with_test_split(mut self, test_fraction: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::invalid(format!(
                "test fraction must be in [0, 1), got {test_fraction}"
            )));
        }
        let n_test = (self.len() as f64 * test_fraction).round() as usize;
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.split = vec![Split::Train; self.len()];
        for &i in &order[..n_test] {
            self.split[i] = Split::Test;
        }
        Ok(self)
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }

    /// Features and labels of one split, in dataset order.
    pub fn part(&self, split: Split) -> (RowMatrix, Vec<usize>) {
        let idx = self.indices(split);
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        (self.features.select_rows(&idx), labels)
    }

    pub fn train(&self) -> (RowMatrix, Vec<usize>) {
        self.part(Split::Train)
    }

    pub fn test(&self) -> (RowMatrix, Vec<usize>) {
        self.part(Split::Test)
    }

    /// Replaces the features of one split, keeping everything else.
    pub fn with_part_features(&self, split: Split, features: &RowMatrix) -> Result<Self> {
        let idx = self.indices(split);
        check_dim(idx.len(), features.rows())?;
        check_dim(self.input_dim(), features.cols())?;
        let mut out = self.clone();
        for (row, &i) in idx.iter().enumerate() {
            out.features.row_mut(i).copy_from_slice(features.row(row));
        }
        Ok(out)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.flush()?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let ds: Dataset = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        check_dim(ds.features.rows(), ds.labels.len())?;
        check_dim(ds.labels.len(), ds.split.len())?;
        Ok(ds)
    }
}

/// Class centers for [`make_blobs`]: `k` points evenly spaced on the unit
/// circle, starting at `(1, 0)`.
pub fn blob_centers(k: usize) -> Vec<[f64; 2]> {
    (0..k)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / k as f64;
            [a.cos(), a.sin()]
        })
        .collect()
}

/// `n` points in `k` isotropic Gaussian blobs of standard deviation `spread`;
/// sample `i` belongs to class `i mod k`.
pub fn make_blobs(n: usize, k: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if k == 0 || n < 2 * k {
        return Err(Error::invalid(format!(
            "blobs need k >= 1 and n >= 2k, got n={n}, k={k}"
        )));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::invalid(format!("spread must be >= 0, got {spread}")));
    }
    let centers = blob_centers(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = centers[i % k];
        data.push(c[0] + spread * normal.sample(&mut rng));
        data.push(c[1] + spread * normal.sample(&mut rng));
        labels.push(i % k);
    }
    Dataset::new("blobs", seed, k, RowMatrix::from_flat(data, 2)?, labels)
}

/// Two interleaving half circles with Gaussian noise; class 0 is the upper
/// moon.
pub fn make_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::invalid(format!("moons need n >= 4, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!("noise must be >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_outer {
        let t = PI * i as f64 / (n_outer - 1).max(1) as f64;
        data.push(t.cos() + noise * normal.sample(&mut rng));
        data.push(t.sin() + noise * normal.sample(&mut rng));
        labels.push(0);
    }
    for i in 0..n_inner {
        let t = PI * i as f64 / (n_inner - 1).max(1) as f64;
        data.push(1.0 - t.cos() + noise * normal.sample(&mut rng));
        data.push(0.5 - t.sin() + noise * normal.sample(&mut rng));
        labels.push(1);
    }
    Dataset::new("moons", seed, 2, RowMatrix::from_flat(data, 2)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(make_blobs(100, 3, 0.2, 1).unwrap(), make_blobs(100, 3, 0.2, 1).unwrap());
        assert_eq!(make_moons(50, 0.1, 1).unwrap(), make_moons(50, 0.1, 1).unwrap());
        assert_ne!(make_blobs(100, 3, 0.2, 1).unwrap(), make_blobs(100, 3, 0.2, 2).unwrap());
    }

    #[test]
    fn zero_spread_collapses_classes() {
        let ds = make_blobs(40, 4, 0.0, 3).unwrap();
        let centers = blob_centers(4);
        for (row, &l) in ds.features.iter_rows().zip(&ds.labels) {
            assert_eq!(row, &centers[l]);
        }
    }

    #[test]
    fn blob_class_means_near_centers() {
        let ds = make_blobs(400, 2, 0.3, 7).unwrap();
        let centers = blob_centers(2);
        for (c, center) in centers.iter().enumerate() {
            let rows: Vec<&[f64]> = ds
                .features
                .iter_rows()
                .zip(&ds.labels)
                .filter(|(_, &l)| l == c)
                .map(|(r, _)| r)
                .collect();
            for axis in 0..2 {
                let mean = rows.iter().map(|r| r[axis]).sum::<f64>() / rows.len() as f64;
                assert!((mean - center[axis]).abs() < 0.05, "class {c} axis {axis}: {mean}");
            }
        }
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(make_blobs(3, 2, 0.1, 0).is_err());
        assert!(make_blobs(10, 0, 0.1, 0).is_err());
        assert!(make_blobs(10, 2, -1.0, 0).is_err());
        assert!(make_moons(3, 0.1, 0).is_err());
    }

    #[test]
    fn splits_are_disjoint_and_sized() {
        let ds = make_blobs(400, 2, 0.3, 7).unwrap().with_test_split(0.5, 7).unwrap();
        let (train, _) = ds.train();
        let (test, test_labels) = ds.test();
        assert_eq!(train.rows() + test.rows(), 400);
        assert_eq!(test.rows(), 200);
        assert_eq!(test_labels.len(), 200);
        let tr = ds.indices(Split::Train);
        assert!(ds.indices(Split::Test).iter().all(|i| !tr.contains(i)));
    }

    #[test]
    fn json_round_trip() {
        let ds = make_moons(30, 0.05, 4).unwrap().with_test_split(0.3, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.json");
        ds.save_json(&path).unwrap();
        assert_eq!(Dataset::load_json(&path).unwrap(), ds);
    }
}
