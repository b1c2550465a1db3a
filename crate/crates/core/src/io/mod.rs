//! File formats: PPM images and raw mosaic frames.

pub mod ppm;
pub mod rawfile;

pub use ppm::{decode_ppm, encode_ppm, read_ppm, write_ppm};
pub use rawfile::{read_raw, write_raw, RawSidecar, RAW_FORMAT_VERSION};
