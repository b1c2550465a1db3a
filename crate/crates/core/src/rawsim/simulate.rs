use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{add_shot_noise, apply_exposure, make_fpn_field, RawFrame, SimMeta};
use crate::cfa::CfaPattern;
use crate::color::ColorState;
use crate::error::{Error, Result};
use crate::image::{
    apply_channel_gains, apply_color_matrix, clip01, srgb_degamma, srgb_gamma, white_balance,
    Image,
};

/// Sample one channel per site according to the CFA tile.
pub fn mosaic(img: &Image, cfa: &CfaPattern) -> Result<RawFrame> {
    if !img.state().is_linear() {
        return Err(Error::StateMismatch {
            expected: "a linear state",
            found: img.state(),
        });
    }
    let (w, h) = (img.width(), img.height());
    if w % cfa.tile_w() != 0 || h % cfa.tile_h() != 0 {
        return Err(Error::shape(format!(
            "{w}x{h} image is not a multiple of the {} tile",
            cfa.kind()
        )));
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let c = cfa.channel_at(x, y).index();
            out.push(img.plane(c)[y * w + x]);
        }
    }
    RawFrame::new(w, h, out, *cfa, SimMeta::default())
}

/// Add a single-channel offset field to every channel and clip.
pub fn add_field(img: &Image, field: &[f32]) -> Result<Image> {
    let n = img.width() * img.height();
    if field.len() != n {
        return Err(Error::shape("offset field size does not match image"));
    }
    let mut out = img.clone();
    for c in 0..3 {
        for (v, f) in out.plane_mut(c).iter_mut().zip(field) {
            *v = clip01(*v + *f);
        }
    }
    Ok(out)
}

/// Stick `round(fraction * N)` distinct sites at 0 or full scale.
pub fn inject_defects(raw: &RawFrame, fraction: f64, seed: u64) -> Result<RawFrame> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "defect fraction {fraction} outside [0, 1]"
        )));
    }
    let n = raw.mosaic().len();
    // Round half up.
    let count = ((fraction * n as f64) + 0.5).floor() as usize;
    let count = count.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites: Vec<usize> = index::sample(&mut rng, n, count).into_vec();
    sites.sort_unstable();
    let mut out = raw.clone();
    for &i in &sites {
        out.mosaic_mut()[i] = if rng.random::<bool>() { 1.0 } else { 0.0 };
    }
    out.meta.defect_seed = Some(seed);
    out.meta.defect_fraction = fraction;
    out.meta.defect_sites = sites.into_iter().map(|i| i as u32).collect();
    Ok(out)
}

/// Full forward simulation of one frame.
///
/// Returns the raw mosaic and the ground-truth target: the illuminated
/// linear image corrected with the ground-truth illuminant and gamma encoded.
pub fn simulate_raw(clean: &Image, meta: &SimMeta, cfa: &CfaPattern) -> Result<(RawFrame, Image)> {
    if clean.state() != ColorState::GammaSRGB {
        return Err(Error::StateMismatch {
            expected: "gamma-sRGB",
            found: clean.state(),
        });
    }
    meta.validate()?;
    let (w, h) = (clean.width(), clean.height());

    let linear = srgb_degamma(clean)?;
    let lit = apply_channel_gains(&linear, meta.illuminant.green_relative())?;
    let truth = srgb_gamma(&white_balance(&lit, &meta.illuminant)?)?;

    let mut dev = apply_color_matrix(&lit, &meta.device_matrix, ColorState::LinearDevice)?;
    let field = meta.fpn.as_ref().map(|p| make_fpn_field(w, h, p));
    if meta.fpn_before_exposure {
        if let Some(f) = &field {
            dev = add_field(&dev, f)?;
        }
    }
    dev = apply_exposure(&dev, meta.exposure_gain)?;
    if let Some(snr) = meta.shot_snr_db {
        dev = add_shot_noise(&dev, snr, meta.noise_seed)?;
    }
    if !meta.fpn_before_exposure {
        if let Some(f) = &field {
            dev = add_field(&dev, f)?;
        }
    }

    let mut raw = mosaic(&dev, cfa)?;
    raw.meta = meta.clone();
    raw.meta.defect_sites.clear();
    if let Some(seed) = meta.defect_seed {
        if meta.defect_fraction > 0.0 {
            raw = inject_defects(&raw, meta.defect_fraction, seed)?;
        }
    }
    Ok((raw, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::{Illuminant, Matrix3};
    use crate::rawsim::FpnParams;

    fn scene(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, ColorState::GammaSRGB, |x, y| {
            let u = x as f32 / w as f32;
            let v = y as f32 / h as f32;
            [0.2 + 0.6 * u, 0.3 + 0.4 * v, 0.7 - 0.5 * u * v]
        })
    }

    #[test]
    fn bayer_mosaic_picks_tile_channels() {
        let img = Image::from_fn(4, 4, ColorState::LinearDevice, |x, y| {
            let b = (y * 4 + x) as f32 / 100.0;
            [b, b + 0.3, b + 0.6]
        });
        let raw = mosaic(&img, &CfaPattern::bayer_rggb()).unwrap();
        assert_eq!(raw.at(0, 0), img.pixel(0, 0)[0]);
        assert_eq!(raw.at(1, 0), img.pixel(1, 0)[1]);
        assert_eq!(raw.at(1, 1), img.pixel(1, 1)[2]);
        assert!(mosaic(&img, &CfaPattern::xtrans()).is_err());
    }

    #[test]
    fn achromatic_mosaic_equals_any_channel() {
        let img = Image::from_fn(12, 6, ColorState::LinearDevice, |x, y| {
            [(x + y) as f32 / 20.0; 3]
        });
        for cfa in [CfaPattern::bayer_rggb(), CfaPattern::xtrans()] {
            let raw = mosaic(&img, &cfa).unwrap();
            assert_eq!(raw.mosaic(), img.plane(0));
        }
    }

    #[test]
    fn xtrans_mosaic_matches_tile_table_exhaustively() {
        // Hand-written copy of the X-Trans tile, independent of the cfa module.
        const T: [&str; 6] = ["GGRGGB", "GGBGGR", "BRGRBG", "GGBGGR", "GGRGGB", "RBGBRG"];
        let img = Image::from_fn(6, 6, ColorState::LinearDevice, |x, y| {
            let i = (y * 6 + x) as f32;
            [i, 100.0 + i, 200.0 + i]
        });
        let raw = mosaic(&img, &CfaPattern::xtrans()).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                let c = match T[y].as_bytes()[x] {
                    b'R' => 0,
                    b'G' => 1,
                    _ => 2,
                };
                assert_eq!(raw.at(x, y), img.pixel(x, y)[c]);
            }
        }
    }

    #[test]
    fn defect_counts() {
        let img = Image::filled(240, 220, [0.5; 3], ColorState::LinearDevice);
        let raw = mosaic(&img, &CfaPattern::bayer_rggb()).unwrap();
        assert_eq!(inject_defects(&raw, 0.0, 1).unwrap().mosaic(), raw.mosaic());

        let d = inject_defects(&raw, 1e-4, 9).unwrap();
        let changed = d
            .mosaic()
            .iter()
            .zip(raw.mosaic())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, 5);
        assert_eq!(d.meta.defect_sites.len(), 5);

        let all = inject_defects(&raw, 1.0, 2).unwrap();
        assert!(all.mosaic().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(inject_defects(&raw, 1.5, 2).is_err());
    }

    #[test]
    fn degenerate_pipeline_is_plain_mosaic() {
        let clean = scene(8, 8);
        let cfa = CfaPattern::bayer_rggb();
        let (raw, truth) = simulate_raw(&clean, &SimMeta::default(), &cfa).unwrap();
        let expect = mosaic(&srgb_degamma(&clean).unwrap(), &cfa).unwrap();
        assert_eq!(raw.mosaic(), expect.mosaic());
        for (a, b) in truth.data().iter().zip(clean.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn exposure_only_is_linear() {
        let clean = scene(8, 8);
        let cfa = CfaPattern::bayer_rggb();
        let (base, _) = simulate_raw(&clean, &SimMeta::default(), &cfa).unwrap();
        let half = SimMeta {
            exposure_gain: 0.5,
            ..SimMeta::default()
        };
        let (raw, _) = simulate_raw(&clean, &half, &cfa).unwrap();
        for (a, b) in raw.mosaic().iter().zip(base.mosaic()) {
            assert_eq!(*a, (*b as f64 * 0.5) as f32);
        }
    }

    #[test]
    fn full_pipeline_is_deterministic() {
        let clean = scene(24, 24);
        let meta = SimMeta {
            illuminant: Illuminant::new([1.2, 1.0, 0.7]).unwrap(),
            exposure_gain: 2.0,
            shot_snr_db: Some(25.0),
            fpn: Some(FpnParams::default()),
            noise_seed: 77,
            defect_seed: Some(78),
            defect_fraction: 0.01,
            device_matrix: Matrix3::default_device(),
            ..SimMeta::default()
        };
        for cfa in [CfaPattern::bayer_rggb(), CfaPattern::xtrans()] {
            let a = simulate_raw(&clean, &meta, &cfa).unwrap();
            let b = simulate_raw(&clean, &meta, &cfa).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.0.meta.defect_sites.len(), 6);
            assert!(a.0.mosaic().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn fpn_order_flag_changes_result() {
        let clean = scene(16, 16);
        let mut meta = SimMeta {
            exposure_gain: 0.5,
            fpn: Some(FpnParams::default()),
            ..SimMeta::default()
        };
        let cfa = CfaPattern::bayer_rggb();
        let after = simulate_raw(&clean, &meta, &cfa).unwrap().0;
        meta.fpn_before_exposure = true;
        let before = simulate_raw(&clean, &meta, &cfa).unwrap().0;
        assert_ne!(after.mosaic(), before.mosaic());
    }

    #[test]
    fn rejects_non_gamma_input() {
        let img = scene(4, 4).with_state(ColorState::LinearSRGB);
        assert!(simulate_raw(&img, &SimMeta::default(), &CfaPattern::bayer_rggb()).is_err());
    }
}
