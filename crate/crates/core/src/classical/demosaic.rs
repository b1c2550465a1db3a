//! Bayer demosaicing: bilinear and Malvar-He-Cutler gradient-corrected
//! linear interpolation. Both use reflective borders, which keep the RGGB
//! phase intact.

use serde::{Deserialize, Serialize};

use crate::cfa::Channel;
use crate::color::ColorState;
use crate::error::{Error, Result};
use crate::filter::{correlate, reflect};
use crate::image::Image;
use crate::rawsim::RawFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Demosaic {
    Bilinear,
    Malvar,
}

impl Demosaic {
    pub fn run(self, raw: &RawFrame) -> Result<Image> {
        match self {
            Demosaic::Bilinear => demosaic_bilinear(raw),
            Demosaic::Malvar => demosaic_malvar(raw),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bilinear" => Ok(Demosaic::Bilinear),
            "malvar" | "mhc" => Ok(Demosaic::Malvar),
            _ => Err(Error::InvalidParameter(format!("unknown demosaic {s:?}"))),
        }
    }
}

fn require_bayer(raw: &RawFrame, what: &'static str) -> Result<()> {
    if !raw.cfa().is_bayer() {
        return Err(Error::UnsupportedCfa(what, raw.cfa().kind().name()));
    }
    Ok(())
}

#[rustfmt::skip]
const BILINEAR_G: [f64; 9] = [
    0.0,  0.25, 0.0,
    0.25, 1.0,  0.25,
    0.0,  0.25, 0.0,
];

#[rustfmt::skip]
const BILINEAR_RB: [f64; 9] = [
    0.25, 0.5, 0.25,
    0.5,  1.0, 0.5,
    0.25, 0.5, 0.25,
];

/// Average of the nearest same-channel neighbors for every missing sample.
pub fn demosaic_bilinear(raw: &RawFrame) -> Result<Image> {
    require_bayer(raw, "bilinear demosaic")?;
    let (w, h) = (raw.width(), raw.height());
    let cfa = raw.cfa();
    let mut data = Vec::with_capacity(3 * w * h);
    for c in [Channel::R, Channel::G, Channel::B] {
        let mut masked = vec![0.0f64; w * h];
        for y in 0..h {
            for x in 0..w {
                if cfa.channel_at(x, y) == c {
                    masked[y * w + x] = raw.at(x, y) as f64;
                }
            }
        }
        let k = if c == Channel::G {
            &BILINEAR_G
        } else {
            &BILINEAR_RB
        };
        data.extend(correlate(&masked, w, h, k, 3).into_iter().map(|v| v as f32));
    }
    Image::new(w, h, data, ColorState::LinearDevice)
}

// Malvar-He-Cutler filters, scaled by 8.

/// G at an R or B site.
#[rustfmt::skip]
pub const MHC_G_AT_RB: [f64; 25] = [
     0.0, 0.0, -1.0, 0.0,  0.0,
     0.0, 0.0,  2.0, 0.0,  0.0,
    -1.0, 2.0,  4.0, 2.0, -1.0,
     0.0, 0.0,  2.0, 0.0,  0.0,
     0.0, 0.0, -1.0, 0.0,  0.0,
];

/// R (or B) at a G site whose row holds R (or B) samples.
#[rustfmt::skip]
pub const MHC_ROW: [f64; 25] = [
     0.0,  0.0, 0.5,  0.0,  0.0,
     0.0, -1.0, 0.0, -1.0,  0.0,
    -1.0,  4.0, 5.0,  4.0, -1.0,
     0.0, -1.0, 0.0, -1.0,  0.0,
     0.0,  0.0, 0.5,  0.0,  0.0,
];

/// R (or B) at a G site whose column holds R (or B) samples.
#[rustfmt::skip]
pub const MHC_COL: [f64; 25] = [
     0.0,  0.0, -1.0,  0.0, 0.0,
     0.0, -1.0,  4.0, -1.0, 0.0,
     0.5,  0.0,  5.0,  0.0, 0.5,
     0.0, -1.0,  4.0, -1.0, 0.0,
     0.0,  0.0, -1.0,  0.0, 0.0,
];

/// R at a B site, or B at an R site.
#[rustfmt::skip]
pub const MHC_DIAG: [f64; 25] = [
     0.0, 0.0, -1.5, 0.0,  0.0,
     0.0, 2.0,  0.0, 2.0,  0.0,
    -1.5, 0.0,  6.0, 0.0, -1.5,
     0.0, 2.0,  0.0, 2.0,  0.0,
     0.0, 0.0, -1.5, 0.0,  0.0,
];

#[inline]
fn apply5(raw: &RawFrame, x: usize, y: usize, k: &[f64; 25]) -> f64 {
    let (w, h) = (raw.width(), raw.height());
    let mut acc = 0.0;
    for ky in 0..5 {
        let sy = reflect(y as isize + ky as isize - 2, h);
        for kx in 0..5 {
            let kv = k[ky * 5 + kx];
            if kv != 0.0 {
                acc += kv * raw.at(reflect(x as isize + kx as isize - 2, w), sy) as f64;
            }
        }
    }
    acc / 8.0
}

/// Gradient-corrected bilinear interpolation with the fixed 5x5 kernels.
pub fn demosaic_malvar(raw: &RawFrame) -> Result<Image> {
    require_bayer(raw, "Malvar demosaic")?;
    let (w, h) = (raw.width(), raw.height());
    if w < 6 || h < 6 {
        return Err(Error::shape(format!(
            "Malvar demosaic needs at least 6x6, got {w}x{h}"
        )));
    }
    let cfa = raw.cfa();
    let mut img = Image::filled(w, h, [0.0; 3], ColorState::LinearDevice);
    for y in 0..h {
        for x in 0..w {
            let v = raw.at(x, y) as f64;
            let row_has_red = cfa.channel_at(x ^ 1, y) == Channel::R
                || cfa.channel_at(x, y) == Channel::R;
            let rgb = match cfa.channel_at(x, y) {
                Channel::R => [v, apply5(raw, x, y, &MHC_G_AT_RB), apply5(raw, x, y, &MHC_DIAG)],
                Channel::B => [apply5(raw, x, y, &MHC_DIAG), apply5(raw, x, y, &MHC_G_AT_RB), v],
                Channel::G if row_has_red => {
                    [apply5(raw, x, y, &MHC_ROW), v, apply5(raw, x, y, &MHC_COL)]
                }
                Channel::G => [apply5(raw, x, y, &MHC_COL), v, apply5(raw, x, y, &MHC_ROW)],
            };
            img.set_pixel(x, y, rgb.map(|c| c.clamp(0.0, 1.0) as f32));
        }
    }
    Ok(img)
}
