use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::FpnParams;
use crate::color::ColorState;
use crate::error::{Error, Result};
use crate::image::{clip01, Image};

/// Scale every sample by `gain` and clip, simulating integration time.
pub fn apply_exposure(img: &Image, gain: f64) -> Result<Image> {
    if img.state() != ColorState::LinearDevice {
        return Err(Error::StateMismatch {
            expected: "linear-device",
            found: img.state(),
        });
    }
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "exposure gain must be positive, got {gain}"
        )));
    }
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = clip01((*v as f64 * gain) as f32);
    }
    Ok(out)
}

/// Relative standard deviation of multiplicative noise giving `snr_db`.
pub fn shot_noise_sigma(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// Multiplicative Gaussian noise `s -> clip(s * (1 + n))`, `n ~ N(0, sigma^2)`.
pub fn add_shot_noise(img: &Image, snr_db: f64, seed: u64) -> Result<Image> {
    if !img.state().is_linear() {
        return Err(Error::StateMismatch {
            expected: "a linear state",
            found: img.state(),
        });
    }
    let sigma = shot_noise_sigma(snr_db);
    let mut out = img.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in out.data_mut() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v = clip01((*v as f64 * (1.0 + sigma * n)) as f32);
    }
    Ok(out)
}

/// Additive fixed-pattern offset field, row-major `h x w`.
///
/// The field depends only on `(w, h, params)`, so every frame from the same
/// simulated sensor sees the same pattern.
pub fn make_fpn_field(w: usize, h: usize, params: &FpnParams) -> Vec<f32> {
    use std::f64::consts::TAU;
    let rows: Vec<f64> = (0..h)
        .map(|y| params.row_amp * (TAU * params.row_freq * y as f64 + params.row_phase).sin())
        .collect();
    let cols: Vec<f64> = (0..w)
        .map(|x| params.col_amp * (TAU * params.col_freq * x as f64 + params.col_phase).sin())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut field = Vec::with_capacity(w * h);
    for r in &rows {
        for c in &cols {
            let g = if params.gauss_sigma > 0.0 {
                let n: f64 = StandardNormal.sample(&mut rng);
                params.gauss_sigma * n
            } else {
                0.0
            };
            field.push((r + c + g) as f32);
        }
    }
    field
}
