//! The modular baseline: defect correction, denoising, demosaicing,
//! exposure normalization, white balance, color transform, gamma.

use serde::{Deserialize, Serialize};

use super::{correct_defects, wiener_denoise, Demosaic, Estimator};
use crate::color::{ColorState, Illuminant, Matrix3};
use crate::error::{Error, Result};
use crate::image::{apply_channel_gains, apply_color_matrix, srgb_gamma, white_balance, Image};
use crate::rawsim::RawFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExposureMode {
    /// Divide by the exposure gain recorded in the frame metadata.
    Oracle,
    /// Scale so the mean Rec. 709 luminance is 0.18.
    Auto,
}

/// How the white-balance illuminant is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhiteBalance {
    /// Ground-truth illuminant from the metadata, in device space.
    Oracle,
    Estimate(Estimator),
    None,
}

/// Pipeline configuration, read from TOML.
///
/// ```toml
/// defect_threshold = 0.2     # omit to skip defect correction
/// wiener_window = 5          # omit to skip denoising
/// noise = "estimate"         # "estimate" | "oracle" | { fixed = 1e-4 }
/// demosaic = "malvar"        # "bilinear" | "malvar"
/// exposure = "oracle"        # "oracle" | "auto"
/// white_balance = "oracle"   # or { estimate = { method = "grayworld" } }
/// # color_matrix = [[...], [...], [...]]   device -> sRGB; default inverts
/// #                                        the matrix recorded in the frame
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    pub defect_threshold: Option<f64>,
    pub wiener_window: Option<usize>,
    pub noise: NoiseSetting,
    pub demosaic: Demosaic,
    pub exposure: ExposureMode,
    pub white_balance: WhiteBalance,
    pub color_matrix: Option<Matrix3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSetting {
    /// Mean local variance of the frame.
    Estimate,
    /// Variance implied by the simulation record.
    Oracle,
    Fixed(f64),
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            defect_threshold: Some(super::DEFAULT_DEFECT_THRESHOLD),
            wiener_window: Some(5),
            noise: NoiseSetting::Estimate,
            demosaic: Demosaic::Malvar,
            exposure: ExposureMode::Oracle,
            white_balance: WhiteBalance::Oracle,
            color_matrix: None,
        }
    }
}

impl ClassicalConfig {
    /// Every missing process uses ground truth.
    pub fn oracle(demosaic: Demosaic) -> Self {
        ClassicalConfig {
            demosaic,
            noise: NoiseSetting::Oracle,
            ..ClassicalConfig::default()
        }
    }

    /// Bilinear demosaic, Wiener denoising and gray-world white balance,
    /// with automatic exposure.
    pub fn bilinear_wiener_grayworld() -> Self {
        ClassicalConfig {
            demosaic: Demosaic::Bilinear,
            exposure: ExposureMode::Auto,
            white_balance: WhiteBalance::Estimate(Estimator::GrayWorld),
            ..ClassicalConfig::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("pipeline config: {e}")))
    }

    pub fn is_oracle(&self) -> bool {
        self.exposure == ExposureMode::Oracle && self.white_balance == WhiteBalance::Oracle
    }
}

/// One executed stage and its effective parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub image: Image,
    /// Illuminant used for white balance, in device space.
    pub illuminant: Option<Illuminant>,
    pub provenance: Vec<StageRecord>,
}

fn record(stages: &mut Vec<StageRecord>, stage: &str, params: serde_json::Value) {
    stages.push(StageRecord {
        stage: stage.to_string(),
        params,
    });
}

/// Noise variance implied by the simulation record: multiplicative shot
/// noise on the mean squared signal plus the fixed-pattern variance.
pub fn oracle_noise_var(raw: &RawFrame) -> f64 {
    let mut v = 0.0;
    if let Some(snr) = raw.meta.shot_snr_db {
        let s = crate::rawsim::shot_noise_sigma(snr);
        let ms = raw.mosaic().iter().map(|&x| (x as f64).powi(2)).sum::<f64>()
            / raw.mosaic().len().max(1) as f64;
        v += s * s * ms;
    }
    if let Some(f) = &raw.meta.fpn {
        v += f.variance();
    }
    v
}

pub fn run_classical_pipeline(raw: &RawFrame, cfg: &ClassicalConfig) -> Result<PipelineOutput> {
    use serde_json::json;
    let mut stages = Vec::new();
    let mut frame = raw.clone();

    if let Some(t) = cfg.defect_threshold {
        frame = correct_defects(&frame, t);
        record(&mut stages, "correct_defects", json!({ "threshold": t }));
    }
    if let Some(window) = cfg.wiener_window {
        let nv = match cfg.noise {
            NoiseSetting::Estimate => None,
            NoiseSetting::Oracle => Some(oracle_noise_var(raw)),
            NoiseSetting::Fixed(v) => Some(v),
        };
        frame = wiener_denoise(&frame, window, nv)?;
        record(
            &mut stages,
            "wiener_denoise",
            json!({ "window": window, "noise_var": nv }),
        );
    }

    let mut img = cfg.demosaic.run(&frame)?;
    record(&mut stages, "demosaic", json!({ "method": cfg.demosaic }));

    let gain = match cfg.exposure {
        ExposureMode::Oracle => 1.0 / raw.meta.exposure_gain,
        ExposureMode::Auto => {
            let n = (img.width() * img.height()) as f64;
            let lum: f64 = (0..img.width() * img.height())
                .map(|i| {
                    0.2126 * img.plane(0)[i] as f64
                        + 0.7152 * img.plane(1)[i] as f64
                        + 0.0722 * img.plane(2)[i] as f64
                })
                .sum::<f64>()
                / n;
            if lum > 0.0 {
                0.18 / lum
            } else {
                1.0
            }
        }
    };
    img = apply_channel_gains(&img, [gain; 3])?;
    record(
        &mut stages,
        "exposure",
        json!({ "mode": cfg.exposure, "gain": gain }),
    );

    let illuminant = match cfg.white_balance {
        WhiteBalance::Oracle => Some(raw.meta.device_illuminant()?),
        WhiteBalance::Estimate(e) => Some(e.estimate(&img)?),
        WhiteBalance::None => None,
    };
    if let Some(ill) = &illuminant {
        img = white_balance(&img, ill)?;
    }
    record(
        &mut stages,
        "white_balance",
        json!({ "mode": cfg.white_balance, "illuminant": illuminant.map(|i| i.rgb()) }),
    );

    let m = match cfg.color_matrix {
        Some(m) => m,
        None => raw.meta.device_matrix.inverse()?,
    };
    img = apply_color_matrix(&img, &m, ColorState::LinearSRGB)?;
    record(&mut stages, "color_matrix", json!({ "matrix": m.0 }));

    img = srgb_gamma(&img)?;
    record(&mut stages, "srgb_gamma", json!({}));

    Ok(PipelineOutput {
        image: img,
        illuminant,
        provenance: stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfa::CfaPattern;
    use crate::rawsim::{simulate_raw, SimMeta};

    fn scene() -> Image {
        Image::from_fn(32, 32, ColorState::GammaSRGB, |x, y| {
            let u = x as f32 / 32.0;
            let v = y as f32 / 32.0;
            [0.3 + 0.4 * u, 0.4 + 0.2 * v, 0.6 - 0.3 * u]
        })
    }

    #[test]
    fn stage_order_is_fixed() {
        let (raw, _) = simulate_raw(&scene(), &SimMeta::default(), &CfaPattern::bayer_rggb()).unwrap();
        let out = run_classical_pipeline(&raw, &ClassicalConfig::default()).unwrap();
        let names: Vec<&str> = out.provenance.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(
            names,
            [
                "correct_defects",
                "wiener_denoise",
                "demosaic",
                "exposure",
                "white_balance",
                "color_matrix",
                "srgb_gamma"
            ]
        );
        assert_eq!(out.image.state(), ColorState::GammaSRGB);
    }

    #[test]
    fn oracle_mode_undoes_exposure_and_cast() {
        let meta = SimMeta {
            illuminant: Illuminant::new([1.3, 1.0, 0.8]).unwrap(),
            exposure_gain: 0.5,
            ..SimMeta::default()
        };
        let (raw, truth) = simulate_raw(&scene(), &meta, &CfaPattern::bayer_rggb()).unwrap();
        let out = run_classical_pipeline(&raw, &ClassicalConfig::oracle(Demosaic::Malvar)).unwrap();
        let mse: f64 = out
            .image
            .data()
            .iter()
            .zip(truth.data())
            .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
            .sum::<f64>()
            / truth.data().len() as f64;
        assert!(10.0 * (1.0 / mse).log10() > 35.0, "mse {mse}");
    }

    #[test]
    fn config_from_toml() {
        let cfg = ClassicalConfig::from_toml(
            "demosaic = \"bilinear\"\nexposure = \"auto\"\nnoise = { fixed = 0.001 }\n\
             [white_balance.estimate]\nmethod = \"shadesofgray\"\np = 4.0\n",
        )
        .unwrap();
        assert_eq!(cfg.demosaic, Demosaic::Bilinear);
        assert_eq!(cfg.noise, NoiseSetting::Fixed(0.001));
        assert_eq!(
            cfg.white_balance,
            WhiteBalance::Estimate(Estimator::ShadesOfGray { p: 4.0 })
        );
        assert!(ClassicalConfig::from_toml("demosaic = \"ahd\"").is_err());
        let oracle = ClassicalConfig::from_toml("white_balance = \"oracle\"").unwrap();
        assert!(oracle.is_oracle());
    }
}
