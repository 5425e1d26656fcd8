//! Shared oracles for unit tests.

use rand::Rng;

use crate::kernel::KernelField;
use crate::matrix::RowMatrix;

pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], axis: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[axis] += h;
    minus[axis] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

pub fn central_second_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], axis: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[axis] += h;
    minus[axis] -= h;
    (f(&plus) - 2.0 * f(x) + f(&minus)) / (h * h)
}

/// Mixture field with `n` points uniform in [-1, 1]^d and σ in [0.3, 1).
pub fn random_field(rng: &mut impl Rng, n: usize, d: usize) -> KernelField {
    let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let sigma = rng.random_range(0.3..1.0);
    KernelField::new(RowMatrix::from_flat(data, d).unwrap(), sigma).unwrap()
}
