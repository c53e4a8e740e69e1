use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Initialization of the final 1×1 output convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadInit {
    /// Zero weights: the untrained model predicts the bias (0) everywhere.
    #[default]
    Zero,
    HeNormal,
}

/// Architecture hyper-parameters of the Variational U-Net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Stacked input channels: 4 frames × 8 dynamic features + 3 statics.
    pub in_channels: usize,
    /// Predicted channels: 32 lead times × 4 target variables.
    pub out_channels: usize,
    /// Number of encoder dense blocks (and decoder stages).
    pub levels: usize,
    /// Width of the shallowest level; doubled at every level below it.
    pub base_width: usize,
    pub latent_dim: usize,
    pub dropout_rate: f64,
    /// Group count of every group normalization.
    pub groups: usize,
    /// Square spatial extent of inputs and outputs.
    pub input_size: usize,
    /// Odd kernel size of the shape-preserving convolutions.
    pub conv_kernel: usize,
    pub elu_alpha: f64,
    pub head_init: HeadInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 35,
            out_channels: 128,
            levels: 4,
            base_width: 32,
            latent_dim: 512,
            dropout_rate: 0.2,
            groups: 4,
            input_size: 32,
            conv_kernel: 3,
            elu_alpha: 1.0,
            head_init: HeadInit::Zero,
        }
    }
}

impl ModelConfig {
    /// The tiny configuration used by end-to-end gradient checks. Its head
    /// is randomly initialized so every path carries gradient.
    pub fn tiny() -> Self {
        Self {
            levels: 2,
            base_width: 4,
            input_size: 8,
            latent_dim: 8,
            dropout_rate: 0.0,
            head_init: HeadInit::HeNormal,
            ..Self::default()
        }
    }

    /// 256×256 inputs with one more level, keeping a 8×8 bottleneck map.
    pub fn paper_scale() -> Self {
        Self {
            levels: 5,
            input_size: 256,
            ..Self::default()
        }
    }

    pub fn width(&self, level: usize) -> usize {
        self.base_width << level
    }

    pub fn deepest_width(&self) -> usize {
        self.width(self.levels - 1)
    }

    /// Side length of the map entering the bottleneck.
    pub fn bottleneck_size(&self) -> usize {
        self.input_size >> self.levels
    }

    /// Length of the flattened bottleneck feature vector.
    pub fn bottleneck_features(&self) -> usize {
        self.deepest_width() * self.bottleneck_size() * self.bottleneck_size()
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(config_err!("levels must be at least 1"));
        }
        if self.levels >= usize::BITS as usize || self.input_size % (1 << self.levels) != 0 || self.bottleneck_size() == 0 {
            return Err(config_err!(
                "input_size {} must be a positive multiple of 2^levels = {}",
                self.input_size,
                1usize << self.levels.min(63)
            ));
        }
        if self.in_channels == 0 || self.out_channels == 0 || self.base_width == 0 {
            return Err(config_err!("channel counts and base_width must be positive"));
        }
        if self.groups == 0 || self.base_width % self.groups != 0 {
            return Err(config_err!(
                "base_width {} must be divisible by groups {}",
                self.base_width,
                self.groups
            ));
        }
        if self.latent_dim == 0 {
            return Err(config_err!("latent_dim must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(config_err!("dropout_rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        if self.conv_kernel % 2 == 0 {
            return Err(config_err!("conv_kernel must be odd, got {}", self.conv_kernel));
        }
        if self.elu_alpha <= 0.0 {
            return Err(config_err!("elu_alpha must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::tiny().validate().unwrap();
        ModelConfig::paper_scale().validate().unwrap();
        assert_eq!(ModelConfig::default().deepest_width(), 256);
        assert_eq!(ModelConfig::default().bottleneck_size(), 2);
        assert_eq!(ModelConfig::paper_scale().bottleneck_size(), 8);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            ModelConfig { input_size: 36, ..ModelConfig::default() },
            ModelConfig { input_size: 8, ..ModelConfig::default() },
            ModelConfig { base_width: 30, ..ModelConfig::default() },
            ModelConfig { latent_dim: 0, ..ModelConfig::default() },
            ModelConfig { dropout_rate: 1.0, ..ModelConfig::default() },
            ModelConfig { conv_kernel: 2, ..ModelConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn json_fills_missing_fields_with_defaults() {
        let cfg: ModelConfig = serde_json::from_str(r#"{"levels": 3}"#).unwrap();
        assert_eq!(cfg.levels, 3);
        assert_eq!(cfg.latent_dim, 512);
    }
}
