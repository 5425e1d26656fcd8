//! Gaussian kernel field over a set of inducing points.
//!
//! The field value at a query `x` is the information potential
//! `f(x) = (1/N) Σ_i exp(-‖x - y_i‖² / (2σ²))`, a localized density estimate
//! in the Gaussian RKHS. The wavefunction is `ψ = √f`. Everything the mode
//! decomposition needs (f, ∇f, ∇²f) comes out of a single pass over the
//! inducing set, see [`KernelField::local`].
//!
//! The kernel is unnormalized, so `f ∈ (0, 1]`. Every quantity downstream is a
//! ratio in which the normalization constant cancels.

use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::matrix::RowMatrix;

/// Below this field value a query is treated as far-field.
pub const FAR_FIELD_THRESHOLD: f64 = 1e-300;

/// Compensated summation in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    #[inline]
    pub(crate) fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub(crate) fn total(&self) -> f64 {
        self.sum
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "kernel width must be positive and finite, got {sigma}"
        )))
    }
}

/// `exp(-‖u‖² / (2σ²))`.
pub fn gaussian_kernel(u: &[f64], sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let sq: f64 = u.iter().map(|v| v * v).sum();
    Ok((-sq / (2.0 * sigma * sigma)).exp())
}

/// A value that is either finite or lies beyond the far-field cutoff, where
/// only the quadratic asymptote of the QIPF ratio is reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Finite(f64),
    /// Query is so far from every inducing point that `f` underflowed.
    /// Carries `r²_min/(8σ²) - d/4`, the single-Gaussian ratio for the
    /// nearest inducing point.
    FarField { ratio_asymptote: f64 },
}

impl FieldValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            FieldValue::Finite(v) => Some(v),
            FieldValue::FarField { .. } => None,
        }
    }

    pub fn is_far_field(self) -> bool {
        matches!(self, FieldValue::FarField { .. })
    }
}

/// Field value and its first and second derivatives at one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDensity {
    /// `f(x)`, the information potential.
    pub value: f64,
    /// `∇f(x)`.
    pub gradient: Vec<f64>,
    /// `∇²f(x)`.
    pub laplacian: f64,
    /// Squared distance to the nearest inducing point.
    pub nearest_sq_dist: f64,
    pub sigma: f64,
}

impl LocalDensity {
    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn is_far_field(&self) -> bool {
        !(self.value >= FAR_FIELD_THRESHOLD)
    }

    /// `r²_min/(8σ²) - d/4`.
    pub fn ratio_asymptote(&self) -> f64 {
        self.nearest_sq_dist / (8.0 * self.sigma * self.sigma) - self.dim() as f64 / 4.0
    }

    /// `ψ = √f`.
    pub fn wavefunction(&self) -> f64 {
        self.value.sqrt()
    }

    /// `∇ψ = ∇f / (2√f)`.
    pub fn wavefunction_gradient(&self) -> Vec<f64> {
        let denom = 2.0 * self.value.sqrt();
        self.gradient.iter().map(|g| g / denom).collect()
    }

    /// `‖∇f / f‖²`, formed without squaring f so tiny densities don't underflow.
    pub fn log_grad_sq(&self) -> f64 {
        self.gradient.iter().map(|g| (g / self.value).powi(2)).sum()
    }

    /// `∇²ψ = ∇²f/(2√f) - ‖∇f‖²/(4 f^{3/2})`.
    pub fn wavefunction_laplacian(&self) -> FieldValue {
        if self.is_far_field() {
            return FieldValue::FarField {
                ratio_asymptote: self.ratio_asymptote(),
            };
        }
        let f = self.value;
        let sqrt_f = f.sqrt();
        FieldValue::Finite(self.laplacian / (2.0 * sqrt_f) - self.log_grad_sq() * sqrt_f / 4.0)
    }

    /// `‖∇ψ‖² = ‖∇f‖² / (4f)`.
    pub fn wavefunction_grad_sq(&self) -> f64 {
        self.log_grad_sq() * self.value / 4.0
    }

    /// `(σ²/2)·∇²ψ/ψ`, the QIPF before the energy shift.
    ///
    /// Evaluated as `(σ²/2)·(∇²f/(2f) - ‖∇f‖²/(4f²))`, which never forms ψ.
    /// Far-field queries report the quadratic asymptote.
    pub fn qipf_ratio(&self) -> f64 {
        if self.is_far_field() {
            return self.ratio_asymptote();
        }
        let f = self.value;
        let ratio = self.laplacian / (2.0 * f) - self.log_grad_sq() / 4.0;
        0.5 * self.sigma * self.sigma * ratio
    }

    /// Same local quantities with every kernel contribution multiplied by `c`.
    pub fn scaled(&self, c: f64) -> LocalDensity {
        LocalDensity {
            value: self.value * c,
            gradient: self.gradient.iter().map(|g| g * c).collect(),
            laplacian: self.laplacian * c,
            nearest_sq_dist: self.nearest_sq_dist,
            sigma: self.sigma,
        }
    }
}

/// Inducing point set plus a single isotropic kernel width.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    points: RowMatrix,
    sigma: f64,
}

impl KernelField {
    pub fn new(points: RowMatrix, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if points.is_empty() {
            return Err(Error::invalid("kernel field needs at least one inducing point"));
        }
        if points.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateData(
                "inducing points must be finite".to_string(),
            ));
        }
        Ok(KernelField { points, sigma })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], sigma: f64) -> Result<Self> {
        KernelField::new(RowMatrix::from_rows(rows)?, sigma)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &RowMatrix {
        &self.points
    }

    /// Same inducing set, different width.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(KernelField {
            points: self.points.clone(),
            sigma,
        })
    }

    /// `f(x) = (1/N) Σ_i G_σ(y_i - x)`.
    pub fn ipf(&self, query: &[f64]) -> Result<f64> {
        check_dim(self.dim(), query.len())?;
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        let mut acc = KahanSum::default();
        for point in self.points.iter_rows() {
            acc.add((-sq_dist(point, query) * inv).exp());
        }
        Ok(acc.total() / self.len() as f64)
    }

    pub fn wavefunction(&self, query: &[f64]) -> Result<f64> {
        self.ipf(query).map(f64::sqrt)
    }

    /// `∇f(x) = (1/N) Σ_i -(x - y_i)/σ² · G_σ(x - y_i)`.
    pub fn ipf_gradient(&self, query: &[f64]) -> Result<Vec<f64>> {
        Ok(self.local(query)?.gradient)
    }

    pub fn wavefunction_laplacian(&self, query: &[f64]) -> Result<FieldValue> {
        Ok(self.local(query)?.wavefunction_laplacian())
    }

    /// One pass over the inducing set computing f, ∇f and ∇²f at `query`.
    ///
    /// Sums run over the stored order with compensated accumulation, so the
    /// result for a query never depends on how a batch was scheduled.
    pub fn local(&self, query: &[f64]) -> Result<LocalDensity> {
        let d = self.dim();
        check_dim(d, query.len())?;
        let s2 = self.sigma * self.sigma;
        let inv_two_s2 = 1.0 / (2.0 * s2);
        let inv_s2 = 1.0 / s2;
        let inv_s4 = inv_s2 * inv_s2;
        let dim_term = d as f64 * inv_s2;

        let mut value = KahanSum::default();
        let mut lap = KahanSum::default();
        let mut grad = vec![KahanSum::default(); d];
        let mut nearest = f64::INFINITY;
        let mut diff = vec![0.0; d];

        for point in self.points.iter_rows() {
            let mut r2 = 0.0;
            for ((slot, &q), &y) in diff.iter_mut().zip(query).zip(point) {
                *slot = q - y;
                r2 += *slot * *slot;
            }
            nearest = nearest.min(r2);
            let g = (-r2 * inv_two_s2).exp();
            value.add(g);
            lap.add((r2 * inv_s4 - dim_term) * g);
            for (acc, &delta) in grad.iter_mut().zip(&diff) {
                acc.add(-delta * inv_s2 * g);
            }
        }

        let n = self.len() as f64;
        Ok(LocalDensity {
            value: value.total() / n,
            gradient: grad.iter().map(|a| a.total() / n).collect(),
            laplacian: lap.total() / n,
            nearest_sq_dist: nearest,
            sigma: self.sigma,
        })
    }

    /// [`KernelField::local`] over every row of `queries`, in row order.
    pub fn local_batch(&self, queries: &RowMatrix) -> Result<Vec<LocalDensity>> {
        check_dim(self.dim(), queries.cols())?;
        (0..queries.rows())
            .into_par_iter()
            .map(|i| self.local(queries.row(i)))
            .collect()
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
