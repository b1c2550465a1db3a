use crate::error::{Error, Result};
use crate::rawsim::RawFrame;

const VAR_FLOOR: f64 = 1e-12;

/// Local mean and variance of the same-channel samples (center included)
/// inside a `window x window` neighborhood, for every site.
pub fn local_stats(raw: &RawFrame, window: usize) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (raw.width(), raw.height());
    let cfa = raw.cfa();
    let r = (window / 2) as isize;
    let mut mean = vec![0.0; w * h];
    let mut var = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let c = cfa.channel_at(x, y);
            let (mut s, mut s2, mut n) = (0.0f64, 0.0f64, 0usize);
            for sy in (y as isize - r).max(0)..=(y as isize + r).min(h as isize - 1) {
                for sx in (x as isize - r).max(0)..=(x as isize + r).min(w as isize - 1) {
                    let (sx, sy) = (sx as usize, sy as usize);
                    if cfa.channel_at(sx, sy) == c {
                        let v = raw.at(sx, sy) as f64;
                        s += v;
                        s2 += v * v;
                        n += 1;
                    }
                }
            }
            let m = s / n as f64;
            mean[y * w + x] = m;
            var[y * w + x] = (s2 / n as f64 - m * m).max(0.0);
        }
    }
    (mean, var)
}

/// Per-channel locally adaptive Wiener filter on the mosaic.
///
/// `noise_var = None` estimates the noise variance as the mean local variance.
pub fn wiener_denoise(raw: &RawFrame, window: usize, noise_var: Option<f64>) -> Result<RawFrame> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "Wiener window must be odd and >= 3, got {window}"
        )));
    }
    let (mean, var) = local_stats(raw, window);
    let nv = noise_var.unwrap_or_else(|| var.iter().sum::<f64>() / var.len().max(1) as f64);
    let out = raw
        .mosaic()
        .iter()
        .zip(mean.iter().zip(&var))
        .map(|(&v, (&m, &s2))| {
            let gain = (s2 - nv).max(0.0) / s2.max(VAR_FLOOR);
            (m + gain * (v as f64 - m)) as f32
        })
        .collect();
    raw.with_mosaic(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfa::CfaPattern;
    use crate::rawsim::SimMeta;

    fn frame(vals: Vec<f32>, w: usize, h: usize) -> RawFrame {
        RawFrame::new(w, h, vals, CfaPattern::bayer_rggb(), SimMeta::default()).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let vals: Vec<f32> = (0..64).map(|i| ((i * 37) % 17) as f32 / 17.0).collect();
        let raw = frame(vals, 8, 8);
        let out = wiener_denoise(&raw, 5, Some(0.0)).unwrap();
        for (a, b) in out.mosaic().iter().zip(raw.mosaic()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_frame_unchanged() {
        let raw = frame(vec![0.4; 36], 6, 6);
        assert_eq!(wiener_denoise(&raw, 3, None).unwrap(), raw);
        assert_eq!(wiener_denoise(&raw, 5, Some(0.1)).unwrap(), raw);
    }

    #[test]
    fn bad_window() {
        let raw = frame(vec![0.4; 36], 6, 6);
        assert!(wiener_denoise(&raw, 4, None).is_err());
        assert!(wiener_denoise(&raw, 1, None).is_err());
    }

    #[test]
    fn center_of_known_patch() {
        // RGGB frame; the site (2,2) is red and its 5x5 window holds the
        // nine red sites at even coordinates 0..=4.
        let mut vals = vec![0.5f32; 36];
        let reds = [0.1f32, 0.2, 0.3, 0.4, 0.9, 0.5, 0.6, 0.7, 0.8];
        let mut k = 0;
        for y in (0..5).step_by(2) {
            for x in (0..5).step_by(2) {
                vals[y * 6 + x] = reds[k];
                k += 1;
            }
        }
        let raw = frame(vals, 6, 6);
        // Hand arithmetic: sum = 4.5, mean = 0.5; sum of squares = 2.85,
        // var = 2.85/9 - 0.25 = 0.0666...; with noise_var = 0.02 the gain is
        // (0.06667 - 0.02)/0.06667 = 0.7, so out = 0.5 + 0.7 * 0.4 = 0.78.
        let out = wiener_denoise(&raw, 5, Some(0.02)).unwrap();
        assert!((out.at(2, 2) - 0.78).abs() < 1e-5, "{}", out.at(2, 2));
    }
}
