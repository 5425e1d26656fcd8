//! Kernel-based predictive uncertainty for trained classifiers.
//!
//! A classifier's raw predictions (logits) on its training data are turned
//! into a Gaussian kernel field. Test predictions are scored by decomposing
//! the local gradient flow of that field into Hermite-projected modes; the mean
//! of the modes is the uncertainty score, and it is evaluated by how well it
//! detects the classifier's own errors.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`kernel`] | Kernel field: IPF, wavefunction, analytic derivatives |
//! | [`hermite`] | Physicists' Hermite polynomials, oscillator normalization |
//! | [`decomposition`] | QIPF, mode extraction, energy calibration, scores |
//! | [`bandwidth`] | Silverman width and cross-validated factor |
//! | [`network`] | Toy MLP with Adam, MC-Dropout and ensemble baselines |
//! | [`dataset`], [`corruption`], [`predictions`] | Synthetic data, shifts, logit files |
//! | [`metrics`] | ROC-AUC, PR-AUC, point-biserial correlation, histograms |
//! | [`signal`] | Sampled sine waves and grid helpers for 1-D studies |

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod corruption;
pub mod dataset;
pub mod decomposition;
pub mod error;
pub mod hermite;
pub mod kernel;
pub mod matrix;
pub mod metrics;
pub mod network;
pub mod predictions;
pub mod signal;

#[cfg(test)]
pub(crate) mod testing;

pub use bandwidth::{cross_validate_factor, silverman, BandwidthConfig, SigmaPolicy};
pub use corruption::{corrupt, CorruptionKind, CorruptionSpec};
pub use dataset::{make_blobs, make_moons, Dataset, Split};
pub use decomposition::{
    calibrate_energies, decompose, Energies, ModeSpectrum, QipfScorer, DEFAULT_MODES,
};
pub use error::{Error, Result};
pub use kernel::{gaussian_kernel, FieldValue, KernelField, LocalDensity};
pub use matrix::RowMatrix;
pub use metrics::{histogram, point_biserial, pr_auc, roc_auc, EvalReport};
pub use network::{ensemble_score, mc_dropout_score, train, ToyModel, TrainConfig};
pub use predictions::{downsample, load_predictions, save_predictions, PredictionSet};
pub use signal::{sine_period, GridSpec};
