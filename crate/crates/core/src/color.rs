//! Color states, sRGB transfer functions, 3x3 color matrices and illuminants.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which space the samples of an [`Image`](crate::Image) live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColorState {
    LinearDevice,
    LinearSRGB,
    GammaSRGB,
}

impl ColorState {
    pub fn is_linear(self) -> bool {
        !matches!(self, ColorState::GammaSRGB)
    }
}

impl fmt::Display for ColorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColorState::LinearDevice => "linear-device",
            ColorState::LinearSRGB => "linear-sRGB",
            ColorState::GammaSRGB => "gamma-sRGB",
        };
        f.write_str(s)
    }
}

/// sRGB electro-optical transfer: encoded value to linear light.
#[inline]
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse of [`srgb_to_linear`].
#[inline]
pub fn linear_to_srgb(l: f64) -> f64 {
    if l <= 0.0031308 {
        l * 12.92
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

/// Row-major 3x3 matrix acting on column RGB vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix3(pub [[f64; 3]; 3]);

impl Matrix3 {
    pub const IDENTITY: Matrix3 = Matrix3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn diagonal(d: [f64; 3]) -> Self {
        Matrix3([[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by the adjugate; fails when `|det| <= 1e-9`.
    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        if !(d.abs() > 1e-9) {
            return Err(Error::SingularMatrix(d));
        }
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let mut out = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                out[r][c] = adj[r][c] / d;
            }
        }
        Ok(Matrix3(out))
    }

    #[inline]
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn mul(&self, rhs: &Matrix3) -> Matrix3 {
        let mut out = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                out[r][c] = (0..3).map(|k| self.0[r][k] * rhs.0[k][c]).sum();
            }
        }
        Matrix3(out)
    }

    /// Default sRGB-to-device matrix of the simulated sensor: rows sum to one
    /// so neutral surfaces stay neutral, with moderate channel crosstalk.
    pub fn default_device() -> Self {
        Matrix3([
            [0.82, 0.14, 0.04],
            [0.08, 0.84, 0.08],
            [0.03, 0.15, 0.82],
        ])
    }
}

/// A light-source color direction with unit Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Illuminant {
    rgb: [f64; 3],
}

impl Illuminant {
    /// Normalizes `rgb` to unit length. All components must be finite and > 0.
    pub fn new(rgb: [f64; 3]) -> Result<Self> {
        if rgb.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(Error::InvalidIlluminant(rgb));
        }
        let n = (rgb[0] * rgb[0] + rgb[1] * rgb[1] + rgb[2] * rgb[2]).sqrt();
        // Already-unit vectors are kept bit-exact so serialization round-trips.
        if (n - 1.0).abs() < 1e-12 {
            return Ok(Illuminant { rgb });
        }
        Ok(Illuminant {
            rgb: [rgb[0] / n, rgb[1] / n, rgb[2] / n],
        })
    }

    pub fn neutral() -> Self {
        let c = 1.0 / 3f64.sqrt();
        Illuminant { rgb: [c, c, c] }
    }

    pub fn rgb(&self) -> [f64; 3] {
        self.rgb
    }

    /// Channel gains relative to green: `rgb_c / rgb_G`.
    pub fn green_relative(&self) -> [f64; 3] {
        let g = self.rgb[1];
        [self.rgb[0] / g, 1.0, self.rgb[2] / g]
    }

    /// The same light as seen through a linear transform (e.g. into device space).
    pub fn transformed(&self, m: &Matrix3) -> Result<Self> {
        Illuminant::new(m.apply(self.rgb))
    }
}

impl TryFrom<[f64; 3]> for Illuminant {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        Illuminant::new(v)
    }
}

impl From<Illuminant> for [f64; 3] {
    fn from(i: Illuminant) -> [f64; 3] {
        i.rgb
    }
}
