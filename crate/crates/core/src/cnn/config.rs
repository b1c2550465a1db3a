use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and loss settings of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    /// Channels of every hidden layer.
    pub base_width: usize,
    pub input_channels: usize,
    pub output_channels: usize,
    pub leaky_alpha: f64,
    /// Gaussian widths of the difference-of-Gaussians weight map.
    pub dog_sigmas: (f64, f64),
    /// Weight of the squared-error term; the weighted L1 term gets `1 - alpha_loss`.
    pub alpha_loss: f64,
    /// Half-width of the uniform weight initialization.
    pub init_scale: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// Compute the DOG weights on the (detached) prediction instead of the target.
    pub dog_on_prediction: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            base_width: 64,
            input_channels: 1,
            output_channels: 3,
            leaky_alpha: 0.2,
            dog_sigmas: (1.0, 2.0),
            alpha_loss: 0.9,
            init_scale: 0.05,
            bn_momentum: 0.99,
            bn_eps: 1e-3,
            dog_on_prediction: false,
        }
    }
}

impl NetConfig {
    /// The reduced width used for CPU-scale experiments.
    pub fn desk() -> Self {
        NetConfig {
            base_width: 16,
            ..Self::default()
        }
    }

    pub fn with_width(base_width: usize) -> Self {
        NetConfig {
            base_width,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.base_width < 1 || self.input_channels < 1 || self.output_channels < 1 {
            return bad(format!(
                "network widths must be >= 1 (base {}, in {}, out {})",
                self.base_width, self.input_channels, self.output_channels
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha_loss) {
            return bad(format!("alpha_loss {} outside [0, 1]", self.alpha_loss));
        }
        let (s1, s2) = self.dog_sigmas;
        if !(s1 > 0.0 && s1 < s2 && s2.is_finite()) {
            return bad(format!("DOG sigmas need 0 < s1 < s2, got ({s1}, {s2})"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale {} must be positive", self.init_scale));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum < 1.0) || !(self.bn_eps > 0.0) {
            return bad(format!(
                "batch norm momentum {} must be in (0, 1) and eps {} positive",
                self.bn_momentum, self.bn_eps
            ));
        }
        if !self.leaky_alpha.is_finite() {
            return bad("leaky_alpha must be finite".into());
        }
        Ok(())
    }
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub lr_min: f64,
    pub batch: usize,
    /// Epochs without validation improvement before the learning rate drops.
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    /// Validation loss must fall below `best - plateau_min_delta` to count.
    pub plateau_min_delta: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 1e-3,
            lr_min: 1e-6,
            batch: 32,
            plateau_patience: 100,
            plateau_factor: 0.5,
            plateau_min_delta: 1e-6,
            max_epochs: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch < 1 {
            return Err(Error::InvalidParameter("batch must be >= 1".into()));
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < lr_min <= lr0, got {} and {}",
                self.lr_min, self.lr0
            )));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "plateau_factor {} outside (0, 1)",
                self.plateau_factor
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        NetConfig::default().validate().unwrap();
        NetConfig::desk().validate().unwrap();
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_settings_rejected() {
        let c = NetConfig {
            dog_sigmas: (2.0, 1.0),
            ..NetConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(NetConfig { alpha_loss: 1.5, ..NetConfig::default() }.validate().is_err());
        assert!(NetConfig::with_width(0).validate().is_err());
        assert!(TrainConfig { batch: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { lr_min: 1.0, ..TrainConfig::default() }.validate().is_err());
    }
}
