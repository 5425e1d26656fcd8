//! Kernel width selection: Silverman's rule times a cross-validated factor.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{default_orders, QipfScorer, DEFAULT_MODES};
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;
use crate::metrics::roc_auc;
use crate::predictions::{sample_rows, PredictionSet};

pub const DEFAULT_FACTOR_GRID: [f64; 7] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.2;
pub const DEFAULT_INDUCING_CAP: usize = 6000;

/// `σ̄ · (4 / ((d + 2) N))^{1/(d+4)}` with `σ̄` the mean of the per-dimension
/// sample standard deviations.
pub fn silverman(points: &RowMatrix) -> Result<f64> {
    let n = points.rows();
    let d = points.cols();
    if n < 2 {
        return Err(Error::DegenerateData(
            "Silverman's rule needs at least two points".into(),
        ));
    }
    let mut std_sum = 0.0;
    for axis in 0..d {
        let mean = points.iter_rows().map(|r| r[axis]).sum::<f64>() / n as f64;
        let ss: f64 = points.iter_rows().map(|r| (r[axis] - mean).powi(2)).sum();
        std_sum += (ss / (n - 1) as f64).sqrt();
    }
    let mean_std = std_sum / d as f64;
    if !(mean_std > 0.0) || !mean_std.is_finite() {
        return Err(Error::DegenerateData(
            "points have zero variance in every dimension".into(),
        ));
    }
    let dn = d as f64;
    Ok(mean_std * (4.0 / ((dn + 2.0) * n as f64)).powf(1.0 / (dn + 4.0)))
}

/// How the effective kernel width is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaPolicy {
    /// Silverman width times a cross-validated factor.
    Auto,
    /// Silverman width times a fixed factor.
    Factor(f64),
}

impl fmt::Display for SigmaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaPolicy::Auto => f.write_str("auto"),
            SigmaPolicy::Factor(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for SigmaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(SigmaPolicy::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(SigmaPolicy::Factor(v)),
            _ => Err(Error::invalid(format!(
                "sigma factor must be `auto` or a positive number, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub silverman_sigma: f64,
    pub factor_grid: Vec<f64>,
    pub chosen_factor: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Mode orders scored during selection.
    pub orders: Vec<usize>,
    /// Largest inducing set built from the retained split.
    pub inducing_cap: usize,
}

impl BandwidthConfig {
    pub fn new(silverman_sigma: f64, seed: u64) -> Self {
        BandwidthConfig {
            silverman_sigma,
            factor_grid: DEFAULT_FACTOR_GRID.to_vec(),
            chosen_factor: 1.0,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
            seed,
            orders: default_orders(DEFAULT_MODES),
            inducing_cap: DEFAULT_INDUCING_CAP,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.silverman_sigma * self.chosen_factor
    }
}

/// Per-factor outcome of [`cross_validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub chosen_factor: f64,
    /// Held-out error-detection ROC-AUC for each grid factor, in grid order.
    pub roc_auc: Vec<Option<f64>>,
    /// Set when the held-out split had only one class and no AUC was defined.
    pub fallback: bool,
}

/// Grid factor used when selection is undefined: the one closest to 1 on a
/// log scale (1 itself for the default grid).
fn fallback_factor(grid: &[f64]) -> f64 {
    grid.iter()
        .cloned()
        .min_by(|a, b| a.ln().abs().total_cmp(&b.ln().abs()))
        .expect("grid checked non-empty")
}

/// Splits `train_preds` (seeded), builds a field on the retained part for each
/// grid factor, and keeps the factor whose scores best detect errors on the
/// held-out part. Ties go to the smaller factor.
pub fn cross_validate(train_preds: &PredictionSet, config: &BandwidthConfig) -> Result<CrossValidation> {
    let grid = &config.factor_grid;
    if grid.is_empty() {
        return Err(Error::invalid("factor grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(Error::invalid(format!("grid factors must be positive, got {bad}")));
    }
    if !(config.validation_fraction > 0.0 && config.validation_fraction < 1.0) {
        return Err(Error::invalid("validation fraction must be in (0, 1)"));
    }
    if grid.len() == 1 {
        return Ok(CrossValidation {
            chosen_factor: grid[0],
            roc_auc: vec![None],
            fallback: false,
        });
    }

    let n = train_preds.len();
    if n < 2 {
        return Err(Error::invalid("cross-validation needs at least two predictions"));
    }
    let n_val = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1);
    let held_out = sample_rows(n, n_val, config.seed)?;
    let mut is_held = vec![false; n];
    for &i in &held_out {
        is_held[i] = true;
    }
    let retained: Vec<usize> = (0..n).filter(|&i| !is_held[i]).collect();
    let retained = if retained.len() > config.inducing_cap {
        let keep = sample_rows(retained.len(), config.inducing_cap, config.seed ^ 0x9e37_79b9)?;
        keep.into_iter().map(|i| retained[i]).collect()
    } else {
        retained
    };

    let val = train_preds.select(&held_out);
    let errors = val.errors();
    let wrong = errors.iter().filter(|e| **e).count();
    if wrong == 0 || wrong == errors.len() {
        return Ok(CrossValidation {
            chosen_factor: fallback_factor(grid),
            roc_auc: vec![None; grid.len()],
            fallback: true,
        });
    }

    let inducing = train_preds.logits().select_rows(&retained);
    let aucs: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&factor| -> Result<Option<f64>> {
            let scorer = QipfScorer::fit(
                inducing.clone(),
                config.silverman_sigma * factor,
                &config.orders,
            )?;
            let scores = scorer.scores(val.logits())?;
            Ok(roc_auc(&scores, &errors).ok())
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, f64)> = None;
    for (&factor, auc) in grid.iter().zip(&aucs) {
        let Some(auc) = *auc else { continue };
        best = match best {
            Some((bf, ba)) if ba > auc || (ba == auc && bf <= factor) => Some((bf, ba)),
            _ => Some((factor, auc)),
        };
    }
    Ok(match best {
        Some((factor, _)) => CrossValidation {
            chosen_factor: factor,
            roc_auc: aucs,
            fallback: false,
        },
        None => CrossValidation {
            chosen_factor: fallback_factor(grid),
            roc_auc: aucs,
            fallback: true,
        },
    })
}

pub fn cross_validate_factor(train_preds: &PredictionSet, config: &BandwidthConfig) -> Result<f64> {
    Ok(cross_validate(train_preds, config)?.chosen_factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn standardized_1d(n: usize, seed: u64) -> RowMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = raw.iter().sum::<f64>() / n as f64;
        let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        RowMatrix::from_flat(raw.iter().map(|v| (v - mean) / sd).collect(), 1).unwrap()
    }

    #[test]
    fn silverman_one_dimension() {
        let s = silverman(&standardized_1d(100, 1)).unwrap();
        assert!((s - (4.0f64 / 300.0).powf(0.2)).abs() < 1e-12);
        assert!((s - 0.421685).abs() < 1e-6);
    }

    #[test]
    fn silverman_two_dimensions() {
        let a = standardized_1d(1000, 2);
        let b = standardized_1d(1000, 3);
        let data: Vec<f64> = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .flat_map(|(x, y)| [*x, 3.0 * y])
            .collect();
        let s = silverman(&RowMatrix::from_flat(data, 2).unwrap()).unwrap();
        let expected = 2.0 * (4.0f64 / 4000.0).powf(1.0 / 6.0);
        assert!((s - expected).abs() < 1e-12);
        assert!((s - 0.632456).abs() < 1e-6);
    }

    #[test]
    fn silverman_is_homogeneous() {
        let pts = standardized_1d(50, 4);
        let base = silverman(&pts).unwrap();
        let scaled = silverman(&pts.map(|v| v * 3.5)).unwrap();
        assert!((scaled - 3.5 * base).abs() < 1e-12);
    }

    #[test]
    fn silverman_rejects_degenerate_data() {
        let same = RowMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(matches!(silverman(&same), Err(Error::DegenerateData(_))));
        let single = RowMatrix::from_rows(&[[1.0]]).unwrap();
        assert!(silverman(&single).is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("auto".parse::<SigmaPolicy>().unwrap(), SigmaPolicy::Auto);
        assert_eq!("2.5".parse::<SigmaPolicy>().unwrap(), SigmaPolicy::Factor(2.5));
        assert!("-1".parse::<SigmaPolicy>().is_err());
        assert!("wide".parse::<SigmaPolicy>().is_err());
    }

    fn all_correct_set(n: usize) -> PredictionSet {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<f64> = (0..n).flat_map(|_| [1.0 + rng.random::<f64>(), 0.0]).collect();
        PredictionSet::new(RowMatrix::from_flat(data, 2).unwrap(), vec![0; n]).unwrap()
    }

    #[test]
    fn singleton_grid_is_returned() {
        let set = all_correct_set(30);
        let mut cfg = BandwidthConfig::new(0.3, 1);
        cfg.factor_grid = vec![1.0];
        assert_eq!(cross_validate_factor(&set, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn no_validation_errors_falls_back_to_one() {
        let set = all_correct_set(50);
        let cfg = BandwidthConfig::new(0.3, 1);
        let cv = cross_validate(&set, &cfg).unwrap();
        assert!(cv.fallback);
        assert_eq!(cv.chosen_factor, 1.0);
    }

    #[test]
    fn empty_grid_rejected() {
        let mut cfg = BandwidthConfig::new(0.3, 1);
        cfg.factor_grid.clear();
        assert!(matches!(
            cross_validate_factor(&all_correct_set(10), &cfg),
            Err(Error::InvalidParameter(_))
        ));
    }
}
