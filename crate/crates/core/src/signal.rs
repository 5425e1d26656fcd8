//! One-dimensional helpers for the sine-wave demonstration: the sampled
//! signal, evaluation grids and peak finding.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

pub const SINE_FREQUENCY_HZ: f64 = 50.0;
pub const SINE_SAMPLES: usize = 512;

/// `n` samples of a unit-amplitude sine at `freq` Hz taken at `sample_rate` Hz,
/// starting at phase 0.
pub fn sine_samples(n: usize, freq: f64, sample_rate: f64) -> Result<Vec<f64>> {
    if n == 0 || !(freq > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::invalid(
            "sine needs n > 0 and positive frequency and sample rate",
        ));
    }
    Ok((0..n)
        .map(|i| (2.0 * PI * freq * i as f64 / sample_rate).sin())
        .collect())
}

/// `n` samples spanning exactly one period of a 50 Hz sine.
pub fn sine_period(n: usize) -> Result<RowMatrix> {
    let samples = sine_samples(n, SINE_FREQUENCY_HZ, SINE_FREQUENCY_HZ * n as f64)?;
    RowMatrix::from_flat(samples, 1)
}

/// Closed interval `[lo, hi]` with `steps` evenly spaced points; one step
/// gives `[lo]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || steps == 0 || (steps > 1 && !(hi > lo)) {
            return Err(Error::invalid(format!(
                "grid needs finite lo < hi and steps >= 1, got {lo}:{hi}:{steps}"
            )));
        }
        Ok(GridSpec { lo, hi, steps })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.steps)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("grid must look like lo:hi:steps, got `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse().map_err(|_| bad())?;
        let hi = parts[1].trim().parse().map_err(|_| bad())?;
        let steps = parts[2].trim().parse().map_err(|_| bad())?;
        GridSpec::new(lo, hi, steps)
    }
}

/// Interior indices `i` with `v[i-1] < v[i] >= v[i+1]`; a plateau counts once,
/// at its left end.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .collect()
}
