//! Seeded synthetic scenes for tests, benchmarks and desk-scale datasets.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::ColorState;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::write_ppm;

/// Low-frequency gamma-encoded scene: a shared luminance field of a few
/// sinusoids (periods of at least `w / 2`) and soft Gaussian blobs, plus
/// weaker per-channel chroma waves, kept in `[0.05, 0.95]`. Channels are
/// strongly correlated, as in natural images.
pub fn smooth_scene(w: usize, h: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = w.max(h) as f64;
    let mut wave = |amp: std::ops::Range<f64>| {
        let fx = rng.random_range(-2.0..2.0) / scale;
        let fy = rng.random_range(-2.0..2.0) / scale;
        let ph = rng.random_range(0.0..std::f64::consts::TAU);
        (fx, fy, ph, rng.random_range(amp))
    };
    let luma: Vec<_> = (0..3).map(|_| wave(0.04..0.12)).collect();
    let chroma: Vec<Vec<_>> = (0..3).map(|_| (0..2).map(|_| wave(0.01..0.04)).collect()).collect();
    let base = [0, 1, 2].map(|_| rng.random_range(0.35..0.65));
    let blobs: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(0.15..0.35) * scale,
                rng.random_range(-0.15..0.15),
            )
        })
        .collect();
    let eval = |waves: &[(f64, f64, f64, f64)], xf: f64, yf: f64| -> f64 {
        waves
            .iter()
            .map(|&(fx, fy, ph, amp)| amp * (std::f64::consts::TAU * (fx * xf + fy * yf) + ph).sin())
            .sum()
    };
    Image::from_fn(w, h, ColorState::GammaSRGB, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let mut l = eval(&luma, xf, yf);
        for &(bx, by, r, a) in &blobs {
            let d2 = (xf - bx).powi(2) + (yf - by).powi(2);
            l += a * (-d2 / (2.0 * r * r)).exp();
        }
        [0, 1, 2].map(|c| (base[c] + l + eval(&chroma[c], xf, yf)).clamp(0.05, 0.95) as f32)
    })
}

/// A smooth scene overlaid with a few flat-colored rectangles and discs
/// with slightly softened borders, for training data with edges.
pub fn textured_scene(w: usize, h: usize, seed: u64) -> Image {
    let mut img = smooth_scene(w, h, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e57_u64.rotate_left(32));
    let shapes = rng.random_range(3..7);
    for _ in 0..shapes {
        let color = [
            rng.random_range(0.05..0.95f32),
            rng.random_range(0.05..0.95f32),
            rng.random_range(0.05..0.95f32),
        ];
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(0.0..h as f64);
        let rx = rng.random_range(0.06..0.25) * w as f64;
        let ry = rng.random_range(0.06..0.25) * h as f64;
        let disc = rng.random_bool(0.5);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                let d = if disc {
                    (dx * dx + dy * dy).sqrt()
                } else {
                    dx.abs().max(dy.abs())
                };
                // Coverage ramps from 1 to 0 across about one pixel.
                let edge = 1.0 / rx.min(ry);
                let cov = ((1.0 - d) / edge + 0.5).clamp(0.0, 1.0) as f32;
                if cov > 0.0 {
                    let p = img.pixel(x, y);
                    img.set_pixel(x, y, [0, 1, 2].map(|c| p[c] * (1.0 - cov) + color[c] * cov));
                }
            }
        }
    }
    img
}

/// Write `n` textured scenes as 16-bit PPMs named `scene_000.ppm`, ...
pub fn write_scene_corpus(dir: &Path, n: usize, w: usize, h: usize, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..n)
        .map(|i| {
            let path = dir.join(format!("scene_{i:03}.ppm"));
            let img = textured_scene(w, h, seed.wrapping_add(i as u64));
            write_ppm(&path, &img, 16)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_seeded_and_in_range() {
        let a = smooth_scene(32, 24, 4);
        assert_eq!(a, smooth_scene(32, 24, 4));
        assert_ne!(a, smooth_scene(32, 24, 5));
        assert!(a.data().iter().all(|&v| (0.05..=0.95).contains(&v)));
        let t = textured_scene(32, 24, 4);
        assert_eq!(t, textured_scene(32, 24, 4));
        assert!(t.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn smooth_scene_has_small_neighbor_differences() {
        let s = smooth_scene(64, 64, 1);
        let mut max = 0.0f32;
        for c in 0..3 {
            let p = s.plane(c);
            for y in 0..64 {
                for x in 1..64 {
                    max = max.max((p[y * 64 + x] - p[y * 64 + x - 1]).abs());
                }
            }
        }
        assert!(max < 0.05, "{max}");
    }
}
