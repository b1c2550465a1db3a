//! Illuminant estimators built on the Minkowski p-mean of channel statistics.
//!
//! `p = 1` is gray world, `p = 6` shades of gray, `p = inf` white patch; the
//! gray-edge variant applies the same norm to gradient magnitudes.

use serde::{Deserialize, Serialize};

use crate::color::Illuminant;
use crate::error::{Error, Result};
use crate::filter::{gaussian_blur, reflect};
use crate::image::Image;

/// Minkowski p-mean of non-negative samples; `p = inf` is the maximum.
pub fn minkowski_mean(values: impl Iterator<Item = f64> + Clone, p: f64) -> f64 {
    let max = values.clone().fold(0.0f64, f64::max);
    if p.is_infinite() || max == 0.0 {
        return max;
    }
    // Scale by the maximum so large orders do not underflow.
    let (mut acc, mut n) = (0.0f64, 0usize);
    for v in values {
        acc += (v / max).powf(p);
        n += 1;
    }
    max * (acc / n as f64).powf(1.0 / p)
}

fn check_order(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "Minkowski order must be >= 1, got {p}"
        )));
    }
    Ok(())
}

fn to_illuminant(e: [f64; 3], what: &str) -> Result<Illuminant> {
    if e.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Degenerate(format!(
            "{what} estimate has a zero channel: {e:?}"
        )));
    }
    Illuminant::new(e)
}

fn require_linear(img: &Image) -> Result<()> {
    if !img.state().is_linear() {
        return Err(Error::StateMismatch {
            expected: "a linear state",
            found: img.state(),
        });
    }
    Ok(())
}

/// Per-channel Minkowski p-mean of pixel values, normalized.
pub fn estimate_illuminant_minkowski(img: &Image, p: f64) -> Result<Illuminant> {
    require_linear(img)?;
    check_order(p)?;
    let e = [0, 1, 2].map(|c| {
        minkowski_mean(
            img.plane(c).iter().map(|&v| (v as f64).max(0.0)),
            p,
        )
    });
    to_illuminant(e, "Minkowski")
}

/// Per-channel gradient magnitudes (central differences, reflective
/// borders) after Gaussian smoothing with `sigma`.
pub fn gradient_magnitudes(img: &Image, sigma: f64) -> [Vec<f64>; 3] {
    let (w, h) = (img.width(), img.height());
    [0, 1, 2].map(|c| {
        let plane: Vec<f64> = img.plane(c).iter().map(|&v| v as f64).collect();
        let s = gaussian_blur(&plane, w, h, sigma);
        let mut g = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let at = |xx: isize, yy: isize| s[reflect(yy, h) * w + reflect(xx, w)];
                let (xi, yi) = (x as isize, y as isize);
                let gx = 0.5 * (at(xi + 1, yi) - at(xi - 1, yi));
                let gy = 0.5 * (at(xi, yi + 1) - at(xi, yi - 1));
                g[y * w + x] = (gx * gx + gy * gy).sqrt();
            }
        }
        g
    })
}

/// Gray-edge estimate: Minkowski p-mean of per-channel gradient magnitude.
pub fn estimate_illuminant_gray_edge(img: &Image, p: f64, sigma: f64) -> Result<Illuminant> {
    require_linear(img)?;
    check_order(p)?;
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative sigma {sigma}")));
    }
    let g = gradient_magnitudes(img, sigma);
    let e = [0, 1, 2].map(|c| minkowski_mean(g[c].iter().copied(), p));
    to_illuminant(e, "gray-edge")
}

/// A named estimator, as selected in pipeline configs and evaluation runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum Estimator {
    GrayWorld,
    ShadesOfGray {
        #[serde(default = "default_sog_p")]
        p: f64,
    },
    WhitePatch,
    GrayEdge {
        #[serde(default = "one")]
        p: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
}

fn default_sog_p() -> f64 {
    6.0
}

fn one() -> f64 {
    1.0
}

impl Estimator {
    pub fn estimate(&self, img: &Image) -> Result<Illuminant> {
        match *self {
            Estimator::GrayWorld => estimate_illuminant_minkowski(img, 1.0),
            Estimator::ShadesOfGray { p } => estimate_illuminant_minkowski(img, p),
            Estimator::WhitePatch => estimate_illuminant_minkowski(img, f64::INFINITY),
            Estimator::GrayEdge { p, sigma } => estimate_illuminant_gray_edge(img, p, sigma),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::GrayWorld => "grayworld",
            Estimator::ShadesOfGray { .. } => "shadesofgray",
            Estimator::WhitePatch => "whitepatch",
            Estimator::GrayEdge { .. } => "grayedge",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "grayworld" => Ok(Estimator::GrayWorld),
            "shadesofgray" => Ok(Estimator::ShadesOfGray { p: 6.0 }),
            "whitepatch" | "maxrgb" => Ok(Estimator::WhitePatch),
            "grayedge" => Ok(Estimator::GrayEdge { p: 1.0, sigma: 1.0 }),
            _ => Err(Error::InvalidParameter(format!("unknown estimator {s:?}"))),
        }
    }
}
