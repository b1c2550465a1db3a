//! Classical modular ISP baselines.

mod defects;
mod demosaic;
mod illuminant;
mod pipeline;
mod wiener;

pub use defects::{correct_defects, same_channel_median, DEFAULT_DEFECT_THRESHOLD};
pub use demosaic::{
    demosaic_bilinear, demosaic_malvar, Demosaic, MHC_COL, MHC_DIAG, MHC_G_AT_RB, MHC_ROW,
};
pub use illuminant::{
    estimate_illuminant_gray_edge, estimate_illuminant_minkowski, gradient_magnitudes,
    minkowski_mean, Estimator,
};
pub use pipeline::{
    oracle_noise_var, run_classical_pipeline, ClassicalConfig, ExposureMode, NoiseSetting,
    PipelineOutput, StageRecord, WhiteBalance,
};
pub use wiener::{local_stats, wiener_denoise};
