//! The end-to-end convolutional ISP: architecture, loss, training,
//! inference and checkpoints.

mod checkpoint;
mod config;
mod loss;
mod network;
mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, ModelCheckpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{NetConfig, TrainConfig};
pub use loss::{composite_loss, dog_weight_map};
pub use network::{layer_specs, param_count, LayerSpec, Network, Post, SkipSpec, SKIPS};
pub use train::{
    evaluate_loss, history_csv, image_tensor, load_pairs, raw_tensor, train, train_from_manifest,
    EpochRecord, PlateauScheduler, TrainOptions, TrainOutcome, TrainPair,
};

use crate::color::ColorState;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rawsim::RawFrame;

/// Reconstruct a gamma-encoded RGB image from a raw mosaic.
pub fn infer(net: &Network<f32>, raw: &RawFrame) -> Result<Image> {
    let (w, h) = (raw.width(), raw.height());
    if w % 4 != 0 || h % 4 != 0 {
        return Err(Error::shape(format!(
            "inference needs dimensions divisible by 4, got {w}x{h}"
        )));
    }
    let out = net.predict(raw_tensor(raw))?;
    if net.config().output_channels != 3 {
        return Err(Error::shape("inference needs a 3-channel network"));
    }
    Image::new(w, h, out.into_data(), ColorState::GammaSRGB)
}
