//! Planar RGB frames and the pure per-pixel transforms defined on them.

use crate::cfa::CfaPattern;
use crate::color::{linear_to_srgb, srgb_to_linear, ColorState, Illuminant, Matrix3};
use crate::error::{Error, Result};

/// A three-channel image stored channel-major (`R` plane, then `G`, then `B`).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
    state: ColorState,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f32>, state: ColorState) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::shape(format!(
                "image data has {} samples, expected {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        Ok(Image {
            width,
            height,
            data,
            state,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3], state: ColorState) -> Self {
        let n = width * height;
        let mut data = Vec::with_capacity(n * 3);
        for c in rgb {
            data.extend(std::iter::repeat_n(c, n));
        }
        Image {
            width,
            height,
            data,
            state,
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        state: ColorState,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Self {
        let n = width * height;
        let mut data = vec![0.0; n * 3];
        for y in 0..height {
            for x in 0..width {
                let p = f(x, y);
                let i = y * width + x;
                data[i] = p[0];
                data[n + i] = p[1];
                data[2 * n + i] = p[2];
            }
        }
        Image {
            width,
            height,
            data,
            state,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn state(&self) -> ColorState {
        self.state
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let n = self.width * self.height;
        let i = y * self.width + x;
        [self.data[i], self.data[n + i], self.data[2 * n + i]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, p: [f32; 3]) {
        let n = self.width * self.height;
        let i = y * self.width + x;
        self.data[i] = p[0];
        self.data[n + i] = p[1];
        self.data[2 * n + i] = p[2];
    }

    /// Relabel the color state without touching samples.
    pub fn with_state(mut self, state: ColorState) -> Self {
        self.state = state;
        self
    }

    pub fn clipped(mut self) -> Self {
        for v in &mut self.data {
            *v = clip01(*v);
        }
        self
    }

    fn map_samples(&self, state: ColorState, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v as f64) as f32).collect(),
            state,
        }
    }

    fn map_pixels(&self, state: ColorState, f: impl Fn([f64; 3]) -> [f64; 3]) -> Image {
        let n = self.width * self.height;
        let mut data = vec![0.0f32; n * 3];
        for i in 0..n {
            let p = f([
                self.data[i] as f64,
                self.data[n + i] as f64,
                self.data[2 * n + i] as f64,
            ]);
            data[i] = p[0] as f32;
            data[n + i] = p[1] as f32;
            data[2 * n + i] = p[2] as f32;
        }
        Image {
            width: self.width,
            height: self.height,
            data,
            state,
        }
    }

    fn require(&self, state: ColorState) -> Result<()> {
        if self.state != state {
            return Err(Error::StateMismatch {
                expected: state_name(state),
                found: self.state,
            });
        }
        Ok(())
    }

    fn require_linear(&self) -> Result<()> {
        if !self.state.is_linear() {
            return Err(Error::StateMismatch {
                expected: "a linear state",
                found: self.state,
            });
        }
        Ok(())
    }
}

fn state_name(s: ColorState) -> &'static str {
    match s {
        ColorState::LinearDevice => "linear-device",
        ColorState::LinearSRGB => "linear-sRGB",
        ColorState::GammaSRGB => "gamma-sRGB",
    }
}

#[inline]
pub(crate) fn clip01(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[inline]
fn clip01_f64(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Remove the sRGB transfer curve.
pub fn srgb_degamma(img: &Image) -> Result<Image> {
    img.require(ColorState::GammaSRGB)?;
    Ok(img.map_samples(ColorState::LinearSRGB, srgb_to_linear))
}

/// Apply the sRGB transfer curve.
pub fn srgb_gamma(img: &Image) -> Result<Image> {
    img.require(ColorState::LinearSRGB)?;
    Ok(img.map_samples(ColorState::GammaSRGB, linear_to_srgb))
}

/// Left-multiply every pixel by `m` and clip to `[0, 1]`.
pub fn apply_color_matrix(img: &Image, m: &Matrix3, out_state: ColorState) -> Result<Image> {
    img.require_linear()?;
    let det = m.det();
    if !(det.abs() > 1e-9) {
        return Err(Error::SingularMatrix(det));
    }
    Ok(img.map_pixels(out_state, |p| m.apply(p).map(clip01_f64)))
}

/// Multiply each channel by `gains` and clip. The state is preserved.
pub fn apply_channel_gains(img: &Image, gains: [f64; 3]) -> Result<Image> {
    img.require_linear()?;
    Ok(img.map_pixels(img.state, |p| {
        [p[0] * gains[0], p[1] * gains[1], p[2] * gains[2]].map(clip01_f64)
    }))
}

/// Green-anchored white-balance gains `illum_G / illum_c`.
pub fn white_balance_gains(illum: &Illuminant) -> [f64; 3] {
    let rel = illum.green_relative();
    [1.0 / rel[0], 1.0, 1.0 / rel[2]]
}

/// Von Kries correction: divide by the illuminant, anchored so green has gain 1.
pub fn white_balance(img: &Image, illum: &Illuminant) -> Result<Image> {
    apply_channel_gains(img, white_balance_gains(illum))
}

/// Exact sub-image.
pub fn crop(img: &Image, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
    if x0.checked_add(w).is_none_or(|e| e > img.width)
        || y0.checked_add(h).is_none_or(|e| e > img.height)
    {
        return Err(Error::OutOfBounds {
            x0,
            y0,
            w,
            h,
            width: img.width,
            height: img.height,
        });
    }
    let (sw, sn) = (img.width, img.width * img.height);
    let mut data = Vec::with_capacity(w * h * 3);
    for c in 0..3 {
        for y in y0..y0 + h {
            let row = c * sn + y * sw;
            data.extend_from_slice(&img.data[row + x0..row + x0 + w]);
        }
    }
    Image::new(w, h, data, img.state)
}

/// Crop destined for mosaicing: the origin must sit on a CFA tile boundary
/// so the pattern phase is preserved.
pub fn crop_for_cfa(
    img: &Image,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    cfa: &CfaPattern,
) -> Result<Image> {
    if x0 % cfa.tile_w() != 0 || y0 % cfa.tile_h() != 0 {
        return Err(Error::PhaseMisaligned {
            x0,
            y0,
            tile_w: cfa.tile_w(),
            tile_h: cfa.tile_h(),
        });
    }
    crop(img, x0, y0, w, h)
}
