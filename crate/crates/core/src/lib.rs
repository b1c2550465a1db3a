//! Raw sensor simulation, classical ISP baselines and an end-to-end
//! convolutional ISP trained with a from-scratch reverse-mode engine.

pub mod cfa;
pub mod classical;
pub mod cnn;
pub mod color;
pub mod error;
pub mod eval;
pub mod filter;
pub mod image;
pub mod io;
pub mod nn;
pub mod par;
pub mod rawsim;
pub mod synth;

pub use cfa::{CfaKind, CfaPattern, Channel};
pub use color::{ColorState, Illuminant, Matrix3};
pub use error::{Error, Result};
pub use image::Image;
pub use rawsim::{RawFrame, SimMeta};
