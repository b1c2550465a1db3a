//! Raw frame files: 16-bit little-endian samples plus a JSON sidecar.
//!
//! `frame.raw16` holds `width * height` values `round(sample * 65535)`;
//! `frame.json` carries the CFA name, dimensions, format version and the
//! full simulation record.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cfa::CfaKind;
use crate::error::{Error, Result};
use crate::io::ppm::quantize;
use crate::rawsim::{RawFrame, SimMeta};

pub const RAW_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawSidecar {
    pub format_version: u32,
    pub width: usize,
    pub height: usize,
    pub cfa: CfaKind,
    pub meta: SimMeta,
}

pub fn sidecar_path(raw_path: &Path) -> PathBuf {
    raw_path.with_extension("json")
}

pub fn encode_raw16(raw: &RawFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(raw.mosaic().len() * 2);
    for &v in raw.mosaic() {
        out.extend_from_slice(&(quantize(v, 65535) as u16).to_le_bytes());
    }
    out
}

pub fn sidecar_json(raw: &RawFrame) -> Result<String> {
    let car = RawSidecar {
        format_version: RAW_FORMAT_VERSION,
        width: raw.width(),
        height: raw.height(),
        cfa: raw.cfa().kind(),
        meta: raw.meta.clone(),
    };
    Ok(serde_json::to_string_pretty(&car)?)
}

/// Write `raw_path` (samples) and its `.json` sidecar.
pub fn write_raw(raw_path: &Path, raw: &RawFrame) -> Result<()> {
    fs::write(raw_path, encode_raw16(raw)).map_err(|e| Error::io(raw_path, e))?;
    let side = sidecar_path(raw_path);
    fs::write(&side, sidecar_json(raw)?).map_err(|e| Error::io(&side, e))
}

pub fn decode_raw(samples: &[u8], sidecar: &str) -> Result<RawFrame> {
    let car: RawSidecar = serde_json::from_str(sidecar)?;
    if car.format_version != RAW_FORMAT_VERSION {
        return Err(Error::Malformed(format!(
            "raw format version {} is not supported",
            car.format_version
        )));
    }
    let n = car.width * car.height;
    if samples.len() < 2 * n {
        return Err(Error::Truncated("raw samples"));
    }
    if samples.len() > 2 * n {
        return Err(Error::Malformed("trailing bytes after raw samples".into()));
    }
    let mosaic = samples
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]) as f32 / 65535.0)
        .collect();
    RawFrame::new(car.width, car.height, mosaic, car.cfa.into(), car.meta)
}

pub fn read_raw(raw_path: &Path) -> Result<RawFrame> {
    let samples = fs::read(raw_path).map_err(|e| Error::io(raw_path, e))?;
    let side = sidecar_path(raw_path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    decode_raw(&samples, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfa::CfaPattern;
    use crate::color::Illuminant;

    #[test]
    fn round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let meta = SimMeta {
            illuminant: Illuminant::new([1.0, 0.9, 0.6]).unwrap(),
            shot_snr_db: Some(30.0),
            defect_sites: vec![3, 9],
            ..SimMeta::default()
        };
        let mosaic: Vec<f32> = (0..36).map(|i| i as f32 / 35.0).collect();
        let raw = RawFrame::new(6, 6, mosaic, CfaPattern::xtrans(), meta).unwrap();
        let p = dir.path().join("f.raw16");
        write_raw(&p, &raw).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 72);
        let back = read_raw(&p).unwrap();
        assert_eq!(back.meta, raw.meta);
        assert_eq!(back.cfa(), raw.cfa());
        for (a, b) in back.mosaic().iter().zip(raw.mosaic()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
        }
    }

    #[test]
    fn short_sample_file_is_truncation() {
        let raw = RawFrame::new(2, 2, vec![0.5; 4], CfaPattern::bayer_rggb(), SimMeta::default())
            .unwrap();
        let bytes = encode_raw16(&raw);
        let side = sidecar_json(&raw).unwrap();
        assert!(matches!(
            decode_raw(&bytes[..7], &side),
            Err(Error::Truncated(_))
        ));
        assert_eq!(u16::from_le_bytes([bytes[0], bytes[1]]), 32768);
    }
}
