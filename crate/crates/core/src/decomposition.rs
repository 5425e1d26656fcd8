//! Schrödinger moment decomposition of the kernel field.
//!
//! The base QIPF at `x` is `V(x) = E + (σ²/2)·∇²ψ/ψ` with `ψ = √f`. Mode `p`
//! replaces `ψ` with its Hermite projection `ψ_p = H*_p(ψ)`:
//!
//! ```text
//! V_p(x) = E_p + (σ²/2)·∇²ψ_p / ψ_p
//! ∇²ψ_p  = H*_p''(ψ)·‖∇ψ‖² + H*_p'(ψ)·∇²ψ
//! ```
//!
//! Each energy is fixed so that the minimum of its mode over a calibration set
//! is exactly zero. The uncertainty score of a query is the mean of its modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::hermite::hermite_normalized_jet;
use crate::kernel::{FieldValue, KernelField, LocalDensity};
use crate::matrix::RowMatrix;

pub const DEFAULT_MODES: usize = 4;

/// Smallest magnitude allowed for `ψ_p` in the mode ratio denominator.
pub const DENOMINATOR_GUARD: f64 = 1e-10;

/// Below this ψ a vanishing `ψ_p` is the zero of odd `H_p` at the origin.
/// Every other zero of `H_p` lies much further out for any usable order.
const ORIGIN_ZERO_BAND: f64 = 1e-3;

fn check_order(p: usize) -> Result<()> {
    if p == 0 {
        Err(Error::invalid(
            "mode order must be at least 1 (H*_0 is constant)",
        ))
    } else {
        Ok(())
    }
}

/// `∇²ψ_p` at a precomputed local density.
pub fn mode_laplacian_at(p: usize, local: &LocalDensity) -> Result<FieldValue> {
    check_order(p)?;
    let lap_psi = match local.wavefunction_laplacian() {
        FieldValue::Finite(v) => v,
        far => return Ok(far),
    };
    let jet = hermite_normalized_jet(p, local.wavefunction());
    Ok(FieldValue::Finite(
        jet.second * local.wavefunction_grad_sq() + jet.first * lap_psi,
    ))
}

/// `∇²H*_p(ψ(query))`.
pub fn mode_laplacian(p: usize, query: &[f64], field: &KernelField) -> Result<FieldValue> {
    mode_laplacian_at(p, &field.local(query)?)
}

#[inline]
fn guard(v: f64) -> f64 {
    if v.abs() < DENOMINATOR_GUARD {
        if v < 0.0 {
            -DENOMINATOR_GUARD
        } else {
            DENOMINATOR_GUARD
        }
    } else {
        v
    }
}

fn raw_ratio_unchecked(p: usize, local: &LocalDensity) -> f64 {
    if local.is_far_field() {
        return local.ratio_asymptote();
    }
    let psi = local.wavefunction();
    let jet = hermite_normalized_jet(p, psi);
    let half_sq = 0.5 * local.sigma * local.sigma;
    if jet.value.abs() < DENOMINATOR_GUARD && psi < ORIGIN_ZERO_BAND {
        // removable zero: ψ_p and ∇²ψ_p both carry a factor ψ, so divide it
        // out using ∇²ψ/ψ and ‖∇ψ‖²/ψ², which stay finite in the tails
        let grad_ratio = local.log_grad_sq() / 4.0;
        let num = half_sq * jet.second * psi * grad_ratio + jet.first * local.qipf_ratio();
        return num / (jet.value / psi);
    }
    let lap_psi = local
        .wavefunction_laplacian()
        .finite()
        .expect("checked above");
    let lap = jet.second * local.wavefunction_grad_sq() + jet.first * lap_psi;
    half_sq * lap / guard(jet.value)
}

/// `(σ²/2)·∇²ψ_p/ψ_p` at a precomputed local density, before the energy
/// shift. Near interior zeros of `H*_p` the denominator is clamped to
/// `±DENOMINATOR_GUARD`; the zero of odd orders at ψ = 0 is divided out
/// instead. Far-field queries report the base asymptote.
pub fn raw_mode_ratio_at(p: usize, local: &LocalDensity) -> Result<f64> {
    check_order(p)?;
    Ok(raw_ratio_unchecked(p, local))
}

pub fn raw_mode_ratio(p: usize, query: &[f64], field: &KernelField) -> Result<f64> {
    raw_mode_ratio_at(p, &field.local(query)?)
}

/// Ground-state energy `E` and per-mode energies `E_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Energies {
    pub base: f64,
    /// Hermite order of each mode, in reporting order.
    pub orders: Vec<usize>,
    pub modes: Vec<f64>,
}

impl Energies {
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

/// Orders `1..=m`.
pub fn default_orders(m: usize) -> Vec<usize> {
    (1..=m).collect()
}

/// Energies for modes `1..=m`, each the negated minimum of its raw ratio over
/// `calibration`.
pub fn calibrate_energies(
    field: &KernelField,
    calibration: &RowMatrix,
    m: usize,
) -> Result<Energies> {
    if m == 0 {
        return Err(Error::invalid("at least one mode is required"));
    }
    calibrate_energies_for_orders(field, calibration, &default_orders(m))
}

pub fn calibrate_energies_for_orders(
    field: &KernelField,
    calibration: &RowMatrix,
    orders: &[usize],
) -> Result<Energies> {
    if calibration.is_empty() {
        return Err(Error::invalid("calibration set is empty"));
    }
    if orders.is_empty() {
        return Err(Error::invalid("at least one mode is required"));
    }
    for &p in orders {
        check_order(p)?;
    }
    let locals = field.local_batch(calibration)?;
    let raw: Vec<(f64, Vec<f64>)> = locals
        .par_iter()
        .map(|local| {
            let modes = orders.iter().map(|&p| raw_ratio_unchecked(p, local)).collect();
            (local.qipf_ratio(), modes)
        })
        .collect();

    let mut base_min = f64::INFINITY;
    let mut mode_min = vec![f64::INFINITY; orders.len()];
    for (base, modes) in &raw {
        base_min = base_min.min(*base);
        for (slot, v) in mode_min.iter_mut().zip(modes) {
            *slot = slot.min(*v);
        }
    }
    Ok(Energies {
        base: -base_min,
        orders: orders.to_vec(),
        modes: mode_min.into_iter().map(|v| -v).collect(),
    })
}

/// Base QIPF and mode values at a set of queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub base_qipf: Vec<f64>,
    /// `[query × mode]`, columns in the order of `energies.orders`.
    pub modes: RowMatrix,
    pub energies: Energies,
    /// Mean of the mode values per query.
    pub score: Vec<f64>,
}

impl ModeSpectrum {
    pub fn len(&self) -> usize {
        self.base_qipf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_qipf.is_empty()
    }

    pub fn mode_count(&self) -> usize {
        self.energies.len()
    }

    /// Values of one mode column across queries.
    pub fn mode(&self, column: usize) -> Vec<f64> {
        self.modes.iter_rows().map(|r| r[column]).collect()
    }

    /// Copy with every base and mode value clamped to `[-cap, cap]`, for
    /// display. Scores are recomputed from the clipped modes.
    pub fn clipped(&self, cap: f64) -> ModeSpectrum {
        let modes = self.modes.map(|v| v.clamp(-cap, cap));
        let score = modes.iter_rows().map(mean).collect();
        ModeSpectrum {
            base_qipf: self.base_qipf.iter().map(|v| v.clamp(-cap, cap)).collect(),
            modes,
            energies: self.energies.clone(),
            score,
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Evaluates the base QIPF, every calibrated mode, and the score at each row
/// of `queries`.
pub fn decompose(
    queries: &RowMatrix,
    field: &KernelField,
    energies: &Energies,
) -> Result<ModeSpectrum> {
    check_dim(field.dim(), queries.cols())?;
    if energies.orders.len() != energies.modes.len() || energies.is_empty() {
        return Err(Error::invalid("energies must list one value per mode"));
    }
    let locals = field.local_batch(queries)?;
    let rows: Vec<(f64, Vec<f64>)> = locals
        .par_iter()
        .map(|local| {
            let base = local.qipf_ratio() + energies.base;
            let modes = energies
                .orders
                .iter()
                .zip(&energies.modes)
                .map(|(&p, &e)| raw_ratio_unchecked(p, local) + e)
                .collect();
            (base, modes)
        })
        .collect();

    let m = energies.len();
    let mut base_qipf = Vec::with_capacity(rows.len());
    let mut modes = RowMatrix::empty(m);
    let mut score = Vec::with_capacity(rows.len());
    for (base, values) in rows {
        base_qipf.push(base);
        score.push(mean(&values));
        modes.push_row(&values)?;
    }
    Ok(ModeSpectrum {
        base_qipf,
        modes,
        energies: energies.clone(),
        score,
    })
}

/// A kernel field with energies calibrated on its own inducing set.
#[derive(Debug, Clone)]
pub struct QipfScorer {
    field: KernelField,
    energies: Energies,
}

impl QipfScorer {
    /// Builds the field on `inducing` and calibrates modes `orders` against it.
    pub fn fit(inducing: RowMatrix, sigma: f64, orders: &[usize]) -> Result<Self> {
        let field = KernelField::new(inducing, sigma)?;
        let energies = calibrate_energies_for_orders(&field, field.points(), orders)?;
        Ok(QipfScorer { field, energies })
    }

    pub fn with_energies(field: KernelField, energies: Energies) -> Self {
        QipfScorer { field, energies }
    }

    pub fn field(&self) -> &KernelField {
        &self.field
    }

    pub fn energies(&self) -> &Energies {
        &self.energies
    }

    pub fn decompose(&self, queries: &RowMatrix) -> Result<ModeSpectrum> {
        decompose(queries, &self.field, &self.energies)
    }

    pub fn scores(&self, queries: &RowMatrix) -> Result<Vec<f64>> {
        Ok(self.decompose(queries)?.score)
    }
}
