use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::losses::TargetVariable;

/// Number of synthetic cloud-type classes (`ct` takes values `0..CT_CLASSES`).
pub const CT_CLASSES: usize = 5;

/// Per-frame product channels stored in a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Temperature,
    CtthPres,
    CtthAlt,
    CrrIntensity,
    CrrAccum,
    AsiiTurbTropProb,
    Cma,
    Ct,
}

impl Channel {
    pub const ALL: [Channel; 8] = [
        Channel::Temperature,
        Channel::CtthPres,
        Channel::CtthAlt,
        Channel::CrrIntensity,
        Channel::CrrAccum,
        Channel::AsiiTurbTropProb,
        Channel::Cma,
        Channel::Ct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Temperature => "temperature",
            Channel::CtthPres => "ctth_pres",
            Channel::CtthAlt => "ctth_alt",
            Channel::CrrIntensity => "crr_intensity",
            Channel::CrrAccum => "crr_accum",
            Channel::AsiiTurbTropProb => "asii_turb_trop_prob",
            Channel::Cma => "cma",
            Channel::Ct => "ct",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).expect("listed")
    }

    pub fn from_name(name: &str) -> Option<Channel> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Declared physical range used for normalization.
    pub fn default_range(self) -> (f64, f64) {
        match self {
            Channel::Temperature => (200.0, 320.0),
            Channel::CtthPres => (100.0, 1000.0),
            Channel::CtthAlt => (0.0, 15_000.0),
            Channel::CrrIntensity => (0.0, 50.0),
            Channel::CrrAccum => (0.0, 50.0),
            Channel::AsiiTurbTropProb => (0.0, 1.0),
            Channel::Cma => (0.0, 1.0),
            Channel::Ct => (0.0, (CT_CLASSES - 1) as f64),
        }
    }
}

impl From<TargetVariable> for Channel {
    fn from(v: TargetVariable) -> Self {
        match v {
            TargetVariable::Temperature => Channel::Temperature,
            TargetVariable::CrrIntensity => Channel::CrrIntensity,
            TargetVariable::AsiiTurbTropProb => Channel::AsiiTurbTropProb,
            TargetVariable::Cma => Channel::Cma,
        }
    }
}

/// Static per-region grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticChannel {
    Altitude,
    Latitude,
    Longitude,
}

impl StaticChannel {
    pub const ALL: [StaticChannel; 3] = [StaticChannel::Altitude, StaticChannel::Latitude, StaticChannel::Longitude];

    pub fn name(self) -> &'static str {
        match self {
            StaticChannel::Altitude => "altitude",
            StaticChannel::Latitude => "latitude",
            StaticChannel::Longitude => "longitude",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).expect("listed")
    }

    pub fn default_range(self) -> (f64, f64) {
        match self {
            StaticChannel::Altitude => (0.0, 4000.0),
            StaticChannel::Latitude => (-90.0, 90.0),
            StaticChannel::Longitude => (-180.0, 180.0),
        }
    }
}

/// How missing pixels of a channel are filled before entering the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Normalize, then write 0 wherever the mask is false.
    Zero,
}

/// One catalog line: a channel name with its declared physical range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub fill: FillPolicy,
}

impl ChannelInfo {
    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        self.min + v * (self.max - self.min)
    }
}

/// Declared ranges of every dynamic and static channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCatalog {
    pub dynamic: Vec<ChannelInfo>,
    pub statics: Vec<ChannelInfo>,
}

impl Default for ChannelCatalog {
    fn default() -> Self {
        let info = |name: &str, (min, max): (f64, f64)| ChannelInfo {
            name: name.to_string(),
            min,
            max,
            fill: FillPolicy::Zero,
        };
        Self {
            dynamic: Channel::ALL.iter().map(|c| info(c.name(), c.default_range())).collect(),
            statics: StaticChannel::ALL.iter().map(|c| info(c.name(), c.default_range())).collect(),
        }
    }
}

impl ChannelCatalog {
    pub fn dynamic(&self, c: Channel) -> &ChannelInfo {
        &self.dynamic[c.index()]
    }

    pub fn statics(&self, c: StaticChannel) -> &ChannelInfo {
        &self.statics[c.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.dynamic.len() != Channel::ALL.len() || self.statics.len() != StaticChannel::ALL.len() {
            return Err(config_err!(
                "catalog must list {} dynamic and {} static channels",
                Channel::ALL.len(),
                StaticChannel::ALL.len()
            ));
        }
        let expected = Channel::ALL
            .iter()
            .map(|c| c.name())
            .chain(StaticChannel::ALL.iter().map(|c| c.name()));
        for (info, want) in self.dynamic.iter().chain(&self.statics).zip(expected) {
            if info.name != want {
                return Err(config_err!("catalog entry {} found where {want} was expected", info.name));
            }
            if !(info.max > info.min) {
                return Err(config_err!("catalog range of {} is empty", info.name));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_is_valid() {
        ChannelCatalog::default().validate().unwrap();
    }

    #[test]
    fn normalization_round_trip() {
        let cat = ChannelCatalog::default();
        let info = cat.dynamic(Channel::Temperature);
        for v in [200.0, 251.37, 319.999, 187.0] {
            assert!((info.denormalize(info.normalize(v)) - v).abs() < 1e-12);
        }
        assert_eq!(info.normalize(200.0), 0.0);
        assert_eq!(info.normalize(320.0), 1.0);
    }

    #[test]
    fn names_round_trip() {
        for c in Channel::ALL {
            assert_eq!(Channel::from_name(c.name()), Some(c));
        }
    }
}
