//! Binary PPM (P6) reading and writing, 8- and 16-bit.

use std::fs;
use std::path::Path;

use crate::color::ColorState;
use crate::error::{Error, Result};
use crate::image::Image;

/// Decode a P6 (or ASCII P3) pixmap into an image tagged `state`.
pub fn decode_ppm(bytes: &[u8], state: ColorState) -> Result<Image> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos).ok_or(Error::Truncated("PPM header"))?;
    let ascii = match magic.as_slice() {
        b"P6" => false,
        b"P3" => true,
        _ => return Err(Error::Malformed("not a P6/P3 pixmap".into())),
    };
    let mut header = [0usize; 3];
    for h in &mut header {
        let tok = next_token(bytes, &mut pos).ok_or(Error::Truncated("PPM header"))?;
        *h = std::str::from_utf8(&tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Malformed("bad PPM header field".into()))?;
    }
    let [w, h, maxval] = header;
    if maxval == 0 || maxval > 65535 || w == 0 || h == 0 {
        return Err(Error::Malformed(format!("unsupported PPM {w}x{h} max {maxval}")));
    }
    let n = w * h;
    let scale = 1.0 / maxval as f64;
    let mut data = vec![0.0f32; 3 * n];
    if ascii {
        for i in 0..3 * n {
            let tok = next_token(bytes, &mut pos).ok_or(Error::Truncated("PPM samples"))?;
            let v: usize = std::str::from_utf8(&tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Malformed("bad PPM sample".into()))?;
            data[(i % 3) * n + i / 3] = (v.min(maxval) as f64 * scale) as f32;
        }
    } else {
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let bps = if maxval < 256 { 1 } else { 2 };
        let body = bytes
            .get(pos..pos + 3 * n * bps)
            .ok_or(Error::Truncated("PPM raster"))?;
        for i in 0..3 * n {
            let v = if bps == 1 {
                body[i] as usize
            } else {
                u16::from_be_bytes([body[2 * i], body[2 * i + 1]]) as usize
            };
            data[(i % 3) * n + i / 3] = (v.min(maxval) as f64 * scale) as f32;
        }
    }
    Image::new(w, h, data, state)
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| bytes[start..*pos].to_vec())
}

/// Encode as P6 with the given bit depth (8 or 16). Samples are clipped.
pub fn encode_ppm(img: &Image, bits: u8) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let maxval: u32 = if bits > 8 { 65535 } else { 255 };
    let mut out = format!("P6\n{w} {h}\n{maxval}\n").into_bytes();
    out.reserve(3 * n * if bits > 8 { 2 } else { 1 });
    let d = img.data();
    for i in 0..n {
        for c in 0..3 {
            let v = quantize(d[c * n + i], maxval);
            if bits > 8 {
                out.extend_from_slice(&(v as u16).to_be_bytes());
            } else {
                out.push(v as u8);
            }
        }
    }
    out
}

#[inline]
pub(crate) fn quantize(v: f32, maxval: u32) -> u32 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v as f64 * maxval as f64).round() as u32
}

pub fn read_ppm(path: &Path, state: ColorState) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes, state)
}

pub fn write_ppm(path: &Path, img: &Image, bits: u8) -> Result<()> {
    fs::write(path, encode_ppm(img, bits)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_bit_round_trip_is_within_quantization() {
        let img = Image::from_fn(5, 3, ColorState::GammaSRGB, |x, y| {
            [x as f32 / 4.0, y as f32 / 2.0, 0.123_456]
        });
        let back = decode_ppm(&encode_ppm(&img, 16), ColorState::GammaSRGB).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
        }
        let back8 = decode_ppm(&encode_ppm(&img, 8), ColorState::GammaSRGB).unwrap();
        assert_eq!(back8.pixel(4, 2)[0], 1.0);
    }

    #[test]
    fn ascii_with_comments() {
        let src = b"P3\n# a comment\n2 1\n255\n255 0 0  0 0 255\n";
        let img = decode_ppm(src, ColorState::GammaSRGB).unwrap();
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.0]);
        assert_eq!(img.pixel(1, 0), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn truncated_raster_is_reported() {
        let mut bytes = encode_ppm(&Image::filled(4, 4, [0.5; 3], ColorState::GammaSRGB), 8);
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(
            decode_ppm(&bytes, ColorState::GammaSRGB),
            Err(Error::Truncated(_))
        ));
        assert!(decode_ppm(b"P5 1 1 255 x", ColorState::GammaSRGB).is_err());
    }
}
