use crate::dataset::channels::{Channel, ChannelCatalog, StaticChannel};
use crate::error::{Error, Result};

/// Frames per day at a 15-minute cadence.
pub const MAX_FRAMES_PER_DAY: usize = 96;

/// One channel over one day: `frames` planes of `H*W` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSeries {
    pub frames: usize,
    pub values: Vec<f32>,
    pub valid: Vec<bool>,
}

impl ChannelSeries {
    pub fn new(frames: usize, plane: usize) -> Self {
        Self {
            frames,
            values: vec![0.0; frames * plane],
            valid: vec![true; frames * plane],
        }
    }

    pub fn plane_len(&self) -> usize {
        if self.frames == 0 {
            0
        } else {
            self.values.len() / self.frames
        }
    }

    pub fn frame(&self, t: usize) -> (&[f32], &[bool]) {
        let p = self.plane_len();
        (&self.values[t * p..(t + 1) * p], &self.valid[t * p..(t + 1) * p])
    }
}

/// All stored channels of one day, indexed by [`Channel::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub day: u32,
    pub frames: usize,
    pub channels: Vec<ChannelSeries>,
}

impl DayRecord {
    pub fn channel(&self, c: Channel) -> &ChannelSeries {
        &self.channels[c.index()]
    }

    pub fn channel_mut(&mut self, c: Channel) -> &mut ChannelSeries {
        &mut self.channels[c.index()]
    }

    /// Borrowed view of frame `t` with the stored values.
    pub fn frame(&self, t: usize) -> FrameView<'_> {
        FrameView::new(self.channels.iter().map(|s| s.frame(t)), self.channel(Channel::Temperature).frame(t).1)
    }
}

/// One frame of every stored channel.
///
/// `observed_temperature` always carries the stored temperature validity,
/// even when the temperature values themselves were gap-filled.
#[derive(Debug, Clone, Copy)]
pub struct FrameView<'a> {
    pub values: [&'a [f32]; 8],
    pub valid: [&'a [bool]; 8],
    pub observed_temperature: &'a [bool],
}

impl<'a> FrameView<'a> {
    pub(crate) fn new(planes: impl Iterator<Item = (&'a [f32], &'a [bool])>, observed: &'a [bool]) -> Self {
        let mut values: [&[f32]; 8] = [&[]; 8];
        let mut valid: [&[bool]; 8] = [&[]; 8];
        for (i, (v, m)) in planes.enumerate() {
            values[i] = v;
            valid[i] = m;
        }
        Self {
            values,
            valid,
            observed_temperature: observed,
        }
    }

    pub fn channel(&self, c: Channel) -> (&'a [f32], &'a [bool]) {
        (self.values[c.index()], self.valid[c.index()])
    }
}

/// A single region: static grids plus a list of days.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDataset {
    pub region_id: String,
    pub height: usize,
    pub width: usize,
    pub catalog: ChannelCatalog,
    /// Indexed by [`StaticChannel::index`], each `H*W` values.
    pub statics: Vec<Vec<f32>>,
    pub days: Vec<DayRecord>,
}

impl RegionDataset {
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn static_grid(&self, c: StaticChannel) -> &[f32] {
        &self.statics[c.index()]
    }

    /// A copy holding only the days whose positions are in `days`.
    pub fn select_days(&self, days: impl IntoIterator<Item = usize>) -> RegionDataset {
        RegionDataset {
            days: days.into_iter().map(|d| self.days[d].clone()).collect(),
            ..self.clone_without_days()
        }
    }

    fn clone_without_days(&self) -> RegionDataset {
        RegionDataset {
            region_id: self.region_id.clone(),
            height: self.height,
            width: self.width,
            catalog: self.catalog.clone(),
            statics: self.statics.clone(),
            days: Vec::new(),
        }
    }

    /// Checks that every frame, mask and static grid has the region's shape.
    pub fn validate(&self) -> Result<()> {
        self.catalog.validate().map_err(|e| Error::Validation(e.to_string()))?;
        let plane = self.plane_len();
        if plane == 0 {
            return Err(Error::Validation(format!("region {} has an empty grid", self.region_id)));
        }
        if self.statics.len() != StaticChannel::ALL.len() {
            return Err(Error::Validation(format!(
                "region {} has {} static grids, expected {}",
                self.region_id,
                self.statics.len(),
                StaticChannel::ALL.len()
            )));
        }
        for (s, grid) in StaticChannel::ALL.iter().zip(&self.statics) {
            if grid.len() != plane {
                return Err(Error::Validation(format!(
                    "static grid {} has {} values, expected {plane}",
                    s.name(),
                    grid.len()
                )));
            }
        }
        for day in &self.days {
            if day.frames > MAX_FRAMES_PER_DAY {
                return Err(Error::Validation(format!(
                    "day {} has {} frames, more than {MAX_FRAMES_PER_DAY}",
                    day.day, day.frames
                )));
            }
            if day.channels.len() != Channel::ALL.len() {
                return Err(Error::Validation(format!(
                    "day {} has {} channels, expected {}",
                    day.day,
                    day.channels.len(),
                    Channel::ALL.len()
                )));
            }
            for (c, series) in Channel::ALL.iter().zip(&day.channels) {
                let n = day.frames * plane;
                if series.frames != day.frames || series.values.len() != n || series.valid.len() != n {
                    return Err(Error::Validation(format!(
                        "day {} channel {} does not hold {} frames of {}x{}",
                        day.day,
                        c.name(),
                        day.frames,
                        self.height,
                        self.width
                    )));
                }
            }
        }
        Ok(())
    }
}
