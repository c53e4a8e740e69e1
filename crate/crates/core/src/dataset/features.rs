//! Which channels enter the model, in which order.
//!
//! Input layout for one sample: the 4 input frames one after another
//! (frame-major); within a frame the dynamic features in the order of
//! [`FeatureSpec::effective_dynamic`]; the static grids last.

use serde::{Deserialize, Serialize};

use crate::dataset::channels::{Channel, StaticChannel, CT_CLASSES};
use crate::error::{config_err, Result};

/// Number of observed frames per input sample.
pub const INPUT_FRAMES: usize = 4;

/// A dynamic input feature: a stored channel or the derived temperature mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Temperature,
    CtthPres,
    CtthAlt,
    CrrIntensity,
    CrrAccum,
    AsiiTurbTropProb,
    Cma,
    Ct,
    /// 1 where temperature was observed, 0 elsewhere.
    CtthTempeMask,
}

impl Feature {
    /// The stored channel the feature reads from (the mask reads temperature validity).
    pub fn source(self) -> Channel {
        match self {
            Feature::Temperature | Feature::CtthTempeMask => Channel::Temperature,
            Feature::CtthPres => Channel::CtthPres,
            Feature::CtthAlt => Channel::CtthAlt,
            Feature::CrrIntensity => Channel::CrrIntensity,
            Feature::CrrAccum => Channel::CrrAccum,
            Feature::AsiiTurbTropProb => Channel::AsiiTurbTropProb,
            Feature::Cma => Channel::Cma,
            Feature::Ct => Channel::Ct,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::CtthTempeMask => "ctth_tempe_mask",
            other => other.source().name(),
        }
    }
}

/// Encoding of the categorical cloud-type channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtEncoding {
    /// One channel holding the class index mapped to [0, 1].
    #[default]
    Scalar,
    /// One 0/1 channel per class.
    OneHot,
}

/// Feature-set ablations of the reference experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturePreset {
    /// The four target variables only.
    Base,
    /// Base plus crr_accum.
    Experiment1,
    /// Base plus ctth_pres, crr_accum, ct and ctth_alt.
    Experiment2,
    /// Base plus ctth_pres, crr_accum, ct and the temperature mask (the default set).
    Experiment3,
    /// Experiment 3 with interpolated temperature.
    Experiment4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSpec {
    pub dynamic: Vec<Feature>,
    pub statics: Vec<StaticChannel>,
    /// Appends ctth_alt to the dynamic features when not already listed.
    pub use_ctth_alt: bool,
    pub interpolate_temperature: bool,
    pub interpolate_ctth_pres: bool,
    pub ct_encoding: CtEncoding,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            dynamic: vec![
                Feature::Temperature,
                Feature::CtthPres,
                Feature::CrrIntensity,
                Feature::CrrAccum,
                Feature::AsiiTurbTropProb,
                Feature::Cma,
                Feature::Ct,
                Feature::CtthTempeMask,
            ],
            statics: StaticChannel::ALL.to_vec(),
            use_ctth_alt: false,
            interpolate_temperature: false,
            interpolate_ctth_pres: false,
            ct_encoding: CtEncoding::Scalar,
        }
    }
}

impl FeatureSpec {
    pub fn preset(preset: FeaturePreset) -> Self {
        use Feature::*;
        let base = [Temperature, CrrIntensity, AsiiTurbTropProb, Cma];
        let with = |extra: &[Feature]| {
            let mut v = base.to_vec();
            v.extend_from_slice(extra);
            v
        };
        let mut spec = Self::default();
        match preset {
            FeaturePreset::Base => spec.dynamic = base.to_vec(),
            FeaturePreset::Experiment1 => spec.dynamic = with(&[CrrAccum]),
            FeaturePreset::Experiment2 => {
                spec.dynamic = with(&[CtthPres, CrrAccum, Ct]);
                spec.use_ctth_alt = true;
            }
            FeaturePreset::Experiment3 => {}
            FeaturePreset::Experiment4 => spec.interpolate_temperature = true,
        }
        spec
    }

    /// Dynamic features after applying `use_ctth_alt`.
    pub fn effective_dynamic(&self) -> Vec<Feature> {
        let mut v = self.dynamic.clone();
        if self.use_ctth_alt && !v.contains(&Feature::CtthAlt) {
            v.push(Feature::CtthAlt);
        }
        v
    }

    /// Model channels contributed by one feature.
    pub fn feature_width(&self, f: Feature) -> usize {
        match (f, self.ct_encoding) {
            (Feature::Ct, CtEncoding::OneHot) => CT_CLASSES,
            _ => 1,
        }
    }

    pub fn channels_per_frame(&self) -> usize {
        self.effective_dynamic().iter().map(|&f| self.feature_width(f)).sum()
    }

    /// Total model input channels.
    pub fn input_channels(&self) -> usize {
        INPUT_FRAMES * self.channels_per_frame() + self.statics.len()
    }

    /// Human-readable channel names in model order.
    pub fn channel_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.input_channels());
        for frame in 0..INPUT_FRAMES {
            for f in self.effective_dynamic() {
                let w = self.feature_width(f);
                if w == 1 {
                    names.push(format!("t{frame}.{}", f.name()));
                } else {
                    names.extend((0..w).map(|k| format!("t{frame}.{}[{k}]", f.name())));
                }
            }
        }
        names.extend(self.statics.iter().map(|s| s.name().to_string()));
        names
    }

    pub fn validate(&self) -> Result<()> {
        let dynamic = self.effective_dynamic();
        if dynamic.is_empty() {
            return Err(config_err!("feature spec lists no dynamic features"));
        }
        for (i, f) in dynamic.iter().enumerate() {
            if dynamic[..i].contains(f) {
                return Err(config_err!("dynamic feature {} listed twice", f.name()));
            }
        }
        for (i, s) in self.statics.iter().enumerate() {
            if self.statics[..i].contains(s) {
                return Err(config_err!("static feature {} listed twice", s.name()));
            }
        }
        Ok(())
    }

    /// Checks that a model expecting `in_channels` inputs fits this spec.
    pub fn check_model_channels(&self, in_channels: usize) -> Result<()> {
        let want = self.input_channels();
        if want != in_channels {
            return Err(config_err!(
                "feature spec produces {want} input channels but the model expects {in_channels}"
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_35_channels() {
        let spec = FeatureSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.channels_per_frame(), 8);
        assert_eq!(spec.input_channels(), 35);
        assert_eq!(spec.channel_names().len(), 35);
    }

    #[test]
    fn ctth_alt_adds_one_channel_per_frame() {
        let spec = FeatureSpec {
            use_ctth_alt: true,
            ..FeatureSpec::default()
        };
        assert_eq!(spec.input_channels(), 39);
        assert!(spec.check_model_channels(35).is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(FeatureSpec::preset(FeaturePreset::Base).input_channels(), 4 * 4 + 3);
        assert_eq!(FeatureSpec::preset(FeaturePreset::Experiment1).input_channels(), 4 * 5 + 3);
        assert_eq!(FeatureSpec::preset(FeaturePreset::Experiment2).input_channels(), 4 * 8 + 3);
        assert_eq!(FeatureSpec::preset(FeaturePreset::Experiment3), FeatureSpec::default());
        assert!(FeatureSpec::preset(FeaturePreset::Experiment4).interpolate_temperature);
    }

    #[test]
    fn one_hot_ct_width() {
        let spec = FeatureSpec {
            ct_encoding: CtEncoding::OneHot,
            ..FeatureSpec::default()
        };
        assert_eq!(spec.input_channels(), 4 * (7 + CT_CLASSES) + 3);
    }

    #[test]
    fn duplicates_rejected() {
        let mut spec = FeatureSpec::default();
        spec.dynamic.push(Feature::Cma);
        assert!(spec.validate().is_err());
        let spec = FeatureSpec {
            statics: vec![StaticChannel::Altitude, StaticChannel::Altitude],
            ..FeatureSpec::default()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn json_uses_snake_case_names() {
        let spec: FeatureSpec =
            serde_json::from_str(r#"{"dynamic":["temperature","ctth_tempe_mask"],"use_ctth_alt":true}"#).unwrap();
        assert_eq!(spec.effective_dynamic(), vec![Feature::Temperature, Feature::CtthTempeMask, Feature::CtthAlt]);
    }
}
