use crate::rawsim::RawFrame;

pub const DEFAULT_DEFECT_THRESHOLD: f64 = 0.2;

/// Median of the same-channel neighbors within the 5x5 window around
/// `(x, y)`, excluding the center. Out-of-frame neighbors are skipped.
pub fn same_channel_median(raw: &RawFrame, x: usize, y: usize) -> Option<f32> {
    let (w, h) = (raw.width(), raw.height());
    let cfa = raw.cfa();
    let c = cfa.channel_at(x, y);
    let mut vals = [0f32; 24];
    let mut n = 0;
    for dy in -2isize..=2 {
        for dx in -2isize..=2 {
            if dx == 0 && dy == 0 {
                continue;
            }
            let (sx, sy) = (x as isize + dx, y as isize + dy);
            if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                continue;
            }
            let (sx, sy) = (sx as usize, sy as usize);
            if cfa.channel_at(sx, sy) == c {
                vals[n] = raw.at(sx, sy);
                n += 1;
            }
        }
    }
    if n == 0 {
        return None;
    }
    let v = &mut vals[..n];
    v.sort_unstable_by(f32::total_cmp);
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Replace pixels that deviate from their same-channel 5x5 median by more
/// than `threshold` with that median.
pub fn correct_defects(raw: &RawFrame, threshold: f64) -> RawFrame {
    let (w, h) = (raw.width(), raw.height());
    let mut out = raw.mosaic().to_vec();
    for y in 0..h {
        for x in 0..w {
            let v = raw.at(x, y);
            if let Some(m) = same_channel_median(raw, x, y) {
                if (v as f64 - m as f64).abs() > threshold {
                    out[y * w + x] = m;
                }
            }
        }
    }
    raw.with_mosaic(out).expect("same dimensions")
}
