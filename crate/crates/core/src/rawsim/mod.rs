//! Inverse-ISP simulation: clean sRGB frames to noisy raw CFA mosaics.

mod dataset;
mod noise;
mod simulate;

use serde::{Deserialize, Serialize};

use crate::cfa::CfaPattern;
use crate::color::{Illuminant, Matrix3};
use crate::error::{Error, Result};

pub use dataset::{
    build_dataset, derive_seed, split_counts, DatasetConfig, FrameRecord, Manifest, Split,
};
pub use noise::{add_shot_noise, apply_exposure, make_fpn_field, shot_noise_sigma};
pub use simulate::{add_field, inject_defects, mosaic, simulate_raw};

/// Row/column sinusoidal fixed-pattern noise with a Gaussian overlay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpnParams {
    pub row_amp: f64,
    pub col_amp: f64,
    pub row_freq: f64,
    pub col_freq: f64,
    pub row_phase: f64,
    pub col_phase: f64,
    pub gauss_sigma: f64,
    pub seed: u64,
}

impl Default for FpnParams {
    fn default() -> Self {
        FpnParams {
            row_amp: 0.005,
            col_amp: 0.005,
            row_freq: 1.0 / 32.0,
            col_freq: 1.0 / 48.0,
            row_phase: 0.0,
            col_phase: 0.0,
            gauss_sigma: 0.003,
            seed: 0x5eed_f9a0,
        }
    }
}

impl FpnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.row_amp >= 0.0 && self.col_amp >= 0.0 && self.gauss_sigma >= 0.0) {
            return Err(Error::InvalidParameter(
                "FPN amplitudes and sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Variance of the field averaged over a full period.
    pub fn variance(&self) -> f64 {
        0.5 * (self.row_amp * self.row_amp + self.col_amp * self.col_amp)
            + self.gauss_sigma * self.gauss_sigma
    }
}

/// Everything needed to regenerate a simulated frame, plus what the
/// simulation produced (the defect map).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMeta {
    /// Ground-truth scene illuminant, in linear sRGB.
    pub illuminant: Illuminant,
    pub exposure_gain: f64,
    pub shot_snr_db: Option<f64>,
    pub fpn: Option<FpnParams>,
    /// Apply FPN before exposure scaling instead of after shot noise.
    #[serde(default)]
    pub fpn_before_exposure: bool,
    pub noise_seed: u64,
    pub defect_seed: Option<u64>,
    pub defect_fraction: f64,
    /// sRGB-to-device transform of the simulated sensor.
    pub device_matrix: Matrix3,
    /// Flat indices of sites stuck at 0 or full scale.
    #[serde(default)]
    pub defect_sites: Vec<u32>,
}

impl Default for SimMeta {
    fn default() -> Self {
        SimMeta {
            illuminant: Illuminant::neutral(),
            exposure_gain: 1.0,
            shot_snr_db: None,
            fpn: None,
            fpn_before_exposure: false,
            noise_seed: 0,
            defect_seed: None,
            defect_fraction: 0.0,
            device_matrix: Matrix3::IDENTITY,
            defect_sites: Vec::new(),
        }
    }
}

impl SimMeta {
    pub fn validate(&self) -> Result<()> {
        if !(self.exposure_gain > 0.0 && self.exposure_gain.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exposure gain must be positive, got {}",
                self.exposure_gain
            )));
        }
        if let Some(s) = self.shot_snr_db {
            if s.is_nan() || s == f64::NEG_INFINITY {
                return Err(Error::InvalidParameter(format!("bad shot-noise SNR {s}")));
            }
        }
        if !(0.0..=1.0).contains(&self.defect_fraction) {
            return Err(Error::InvalidParameter(format!(
                "defect fraction {} outside [0, 1]",
                self.defect_fraction
            )));
        }
        if let Some(f) = &self.fpn {
            f.validate()?;
        }
        Ok(())
    }

    /// The scene illuminant as recorded by the sensor (device space).
    pub fn device_illuminant(&self) -> Result<Illuminant> {
        self.illuminant.transformed(&self.device_matrix)
    }
}

/// A single-channel CFA mosaic with its simulation record.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    width: usize,
    height: usize,
    mosaic: Vec<f32>,
    cfa: CfaPattern,
    pub meta: SimMeta,
}

impl RawFrame {
    pub fn new(
        width: usize,
        height: usize,
        mosaic: Vec<f32>,
        cfa: CfaPattern,
        meta: SimMeta,
    ) -> Result<Self> {
        if mosaic.len() != width * height {
            return Err(Error::shape(format!(
                "mosaic has {} samples, expected {width}x{height}",
                mosaic.len()
            )));
        }
        if width % cfa.tile_w() != 0 || height % cfa.tile_h() != 0 {
            return Err(Error::shape(format!(
                "{width}x{height} is not a multiple of the {} tile",
                cfa.kind()
            )));
        }
        Ok(RawFrame {
            width,
            height,
            mosaic,
            cfa,
            meta,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cfa(&self) -> CfaPattern {
        self.cfa
    }

    pub fn mosaic(&self) -> &[f32] {
        &self.mosaic
    }

    pub fn mosaic_mut(&mut self) -> &mut [f32] {
        &mut self.mosaic
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.mosaic[y * self.width + x]
    }

    /// A copy with a different mosaic of the same size.
    pub fn with_mosaic(&self, mosaic: Vec<f32>) -> Result<Self> {
        RawFrame::new(self.width, self.height, mosaic, self.cfa, self.meta.clone())
    }
}
