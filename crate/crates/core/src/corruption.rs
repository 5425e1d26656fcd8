//! Severity-graded affine corruptions of feature vectors.
//!
//! | severity | rotation (deg) | shear `s` | zoom `z` | brightness `b` |
//! |---|---|---|---|---|
//! | 0 | 0  | 0.0 | 1.0 | 0.0 |
//! | 1 | 15 | 0.2 | 1.2 | 0.2 |
//! | 2 | 30 | 0.4 | 1.4 | 0.4 |
//! | 3 | 45 | 0.6 | 1.6 | 0.6 |
//! | 4 | 60 | 0.8 | 1.8 | 0.8 |
//! | 5 | 75 | 1.0 | 2.0 | 1.0 |
//!
//! Rotation and shear act on the first two coordinates; zoom multiplies every
//! coordinate by `z`; brightness adds `b` to every coordinate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

pub const MAX_SEVERITY: u8 = 5;

const ROTATION_DEG: [f64; 6] = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0];
const SHEAR: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
const ZOOM: [f64; 6] = [1.0, 1.2, 1.4, 1.6, 1.8, 2.0];
const BRIGHTNESS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionKind {
    Rotation,
    Shear,
    Zoom,
    Brightness,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 4] = [
        CorruptionKind::Rotation,
        CorruptionKind::Shear,
        CorruptionKind::Zoom,
        CorruptionKind::Brightness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::Rotation => "rotation",
            CorruptionKind::Shear => "shear",
            CorruptionKind::Zoom => "zoom",
            CorruptionKind::Brightness => "brightness",
        }
    }

    /// Transform parameter at `severity` (degrees for rotation).
    pub fn parameter(self, severity: u8) -> Result<f64> {
        if severity > MAX_SEVERITY {
            return Err(Error::invalid(format!(
                "severity must be in 0..={MAX_SEVERITY}, got {severity}"
            )));
        }
        let table = match self {
            CorruptionKind::Rotation => &ROTATION_DEG,
            CorruptionKind::Shear => &SHEAR,
            CorruptionKind::Zoom => &ZOOM,
            CorruptionKind::Brightness => &BRIGHTNESS,
        };
        Ok(table[severity as usize])
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown corruption `{s}` (expected rotation, shear, zoom or brightness)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8) -> Result<Self> {
        kind.parameter(severity)?;
        Ok(CorruptionSpec { kind, severity })
    }

    pub fn parameter(&self) -> f64 {
        self.kind
            .parameter(self.severity)
            .expect("severity validated on construction")
    }
}

/// Applies `spec`; severity 0 returns the input unchanged.
pub fn corrupt(features: &RowMatrix, spec: CorruptionSpec) -> Result<RowMatrix> {
    check_kind_dim(spec.kind, features.cols())?;
    if spec.severity == 0 {
        return Ok(features.clone());
    }
    apply(features, spec.kind, spec.parameter())
}

fn check_kind_dim(kind: CorruptionKind, d: usize) -> Result<()> {
    if matches!(kind, CorruptionKind::Rotation | CorruptionKind::Shear) && d < 2 {
        return Err(Error::invalid(format!(
            "{kind} needs at least two feature dimensions, got {d}"
        )));
    }
    Ok(())
}

/// Applies one transform with an explicit parameter (degrees for rotation).
pub fn apply(features: &RowMatrix, kind: CorruptionKind, parameter: f64) -> Result<RowMatrix> {
    check_kind_dim(kind, features.cols())?;
    let mut out = features.clone();
    match kind {
        CorruptionKind::Rotation => {
            let (sin, cos) = parameter.to_radians().sin_cos();
            for i in 0..out.rows() {
                let row = out.row_mut(i);
                let (x, y) = (row[0], row[1]);
                row[0] = cos * x - sin * y;
                row[1] = sin * x + cos * y;
            }
        }
        CorruptionKind::Shear => {
            for i in 0..out.rows() {
                let row = out.row_mut(i);
                row[0] += parameter * row[1];
            }
        }
        CorruptionKind::Zoom => out = out.map(|v| v * parameter),
        CorruptionKind::Brightness => out = out.map(|v| v + parameter),
    }
    Ok(out)
}
