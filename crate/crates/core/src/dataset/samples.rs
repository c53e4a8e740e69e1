//! Turning day records into model samples.
//!
//! Target layout: channel `t * 4 + v` holds lead time `t` (0-based) of target
//! variable `v`, with variables ordered temperature, crr_intensity,
//! asii_turb_trop_prob, cma.

use serde::{Deserialize, Serialize};

use crate::dataset::channels::{Channel, ChannelCatalog, StaticChannel, CT_CLASSES};
use crate::dataset::features::{CtEncoding, Feature, FeatureSpec, INPUT_FRAMES};
use crate::dataset::region::{ChannelSeries, DayRecord, FrameView, RegionDataset};
use crate::error::{Error, Result};
use crate::losses::{TargetVariable, LEAD_TIMES, NUM_TARGETS};
use crate::tensor::{Grid4D, Mask4D};

/// Frames spanned by one sample: 4 inputs then 32 targets.
pub const WINDOW_FRAMES: usize = INPUT_FRAMES + LEAD_TIMES;

/// Where a window came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub region: String,
    pub day: u32,
    /// Index of the first input frame within the day.
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    /// `[1, C_in, H, W]`
    pub input: Grid4D,
    /// `[1, 128, H, W]`, normalized.
    pub target: Grid4D,
    pub target_mask: Mask4D,
    /// The target variables at the last input frame, normalized and
    /// zero-filled, `[1, 4, H, W]`.
    pub last_observed: Grid4D,
    pub provenance: Provenance,
}

/// `values` where `mask` holds, 0 elsewhere.
pub fn zero_fill(values: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if values.len() != mask.len() {
        return Err(Error::Domain(format!(
            "zero_fill got {} values but {} mask entries",
            values.len(),
            mask.len()
        )));
    }
    Ok(values.iter().zip(mask).map(|(&v, &m)| if m { v } else { 0.0 }).collect())
}

/// Fills interior temporal gaps of every pixel by linear interpolation
/// between the nearest valid frames. Leading and trailing gaps stay invalid.
pub fn interpolate_temporal(series: &ChannelSeries) -> ChannelSeries {
    let mut out = series.clone();
    let plane = series.plane_len();
    let frames = series.frames;
    for p in 0..plane {
        let mut prev: Option<usize> = None;
        for t in 0..frames {
            if !series.valid[t * plane + p] {
                continue;
            }
            if let Some(a) = prev {
                if t > a + 1 {
                    let va = series.values[a * plane + p] as f64;
                    let vb = series.values[t * plane + p] as f64;
                    for k in a + 1..t {
                        let frac = (k - a) as f64 / (t - a) as f64;
                        out.values[k * plane + p] = (va + (vb - va) * frac) as f32;
                        out.valid[k * plane + p] = true;
                    }
                }
            }
            prev = Some(t);
        }
    }
    out
}

/// A day with the feature spec's gap-filling applied to its input channels.
#[derive(Debug, Clone)]
pub struct PreparedDay<'a> {
    raw: &'a DayRecord,
    filled: Vec<Option<ChannelSeries>>,
}

impl<'a> PreparedDay<'a> {
    pub fn new(raw: &'a DayRecord, spec: &FeatureSpec) -> Self {
        let mut filled = vec![None; Channel::ALL.len()];
        if spec.interpolate_temperature {
            filled[Channel::Temperature.index()] = Some(interpolate_temporal(raw.channel(Channel::Temperature)));
        }
        if spec.interpolate_ctth_pres {
            filled[Channel::CtthPres.index()] = Some(interpolate_temporal(raw.channel(Channel::CtthPres)));
        }
        Self { raw, filled }
    }

    pub fn frame(&self, t: usize) -> FrameView<'_> {
        let planes = Channel::ALL.iter().map(|&c| match &self.filled[c.index()] {
            Some(s) => s.frame(t),
            None => self.raw.channel(c).frame(t),
        });
        FrameView::new(planes, self.raw.channel(Channel::Temperature).frame(t).1)
    }
}

fn check_plane(name: &str, len: usize, plane: usize) -> Result<()> {
    if len != plane {
        return Err(Error::Validation(format!("{name} has {len} pixels, expected {plane}")));
    }
    Ok(())
}

/// Stacks 4 frames and the static grids into a `[1, C_in, H, W]` input.
pub fn assemble_input(
    frames: &[FrameView<'_>],
    statics: &[Vec<f32>],
    height: usize,
    width: usize,
    catalog: &ChannelCatalog,
    spec: &FeatureSpec,
) -> Result<Grid4D> {
    if frames.len() != INPUT_FRAMES {
        return Err(Error::Validation(format!(
            "an input needs {INPUT_FRAMES} frames, got {}",
            frames.len()
        )));
    }
    if statics.len() != StaticChannel::ALL.len() {
        return Err(Error::Validation(format!(
            "expected {} static grids, got {}",
            StaticChannel::ALL.len(),
            statics.len()
        )));
    }
    let plane = height * width;
    let dynamic = spec.effective_dynamic();
    let mut out = Grid4D::zeros([1, spec.input_channels(), height, width]);
    let mut c = 0;
    for frame in frames {
        for &f in &dynamic {
            let src = f.source();
            let (values, valid) = frame.channel(src);
            check_plane(src.name(), values.len(), plane)?;
            check_plane(src.name(), valid.len(), plane)?;
            let info = catalog.dynamic(src);
            match (f, spec.ct_encoding) {
                (Feature::CtthTempeMask, _) => {
                    check_plane("temperature mask", frame.observed_temperature.len(), plane)?;
                    for (o, &m) in out.plane_mut(0, c).iter_mut().zip(frame.observed_temperature) {
                        *o = if m { 1.0 } else { 0.0 };
                    }
                    c += 1;
                }
                (Feature::Ct, CtEncoding::OneHot) => {
                    for k in 0..CT_CLASSES {
                        for ((o, &v), &m) in out.plane_mut(0, c).iter_mut().zip(values).zip(valid) {
                            *o = if m && v.round() as i64 == k as i64 { 1.0 } else { 0.0 };
                        }
                        c += 1;
                    }
                }
                _ => {
                    for ((o, &v), &m) in out.plane_mut(0, c).iter_mut().zip(values).zip(valid) {
                        *o = if m { info.normalize(v as f64) } else { 0.0 };
                    }
                    c += 1;
                }
            }
        }
    }
    for &s in &spec.statics {
        let grid = &statics[s.index()];
        check_plane(s.name(), grid.len(), plane)?;
        let info = catalog.statics(s);
        for (o, &v) in out.plane_mut(0, c).iter_mut().zip(grid) {
            *o = info.normalize(v as f64);
        }
        c += 1;
    }
    debug_assert_eq!(c, spec.input_channels());
    Ok(out)
}

/// Normalized targets and validity masks for one frame per lead time.
pub fn extract_targets(
    frames: &[FrameView<'_>],
    height: usize,
    width: usize,
    catalog: &ChannelCatalog,
) -> Result<(Grid4D, Mask4D)> {
    let plane = height * width;
    let lead = frames.len();
    let mut target = Grid4D::zeros([1, lead * NUM_TARGETS, height, width]);
    let mut mask = Mask4D::filled([1, lead * NUM_TARGETS, height, width], false);
    for (t, frame) in frames.iter().enumerate() {
        for v in TargetVariable::ALL {
            let ch = Channel::from(v);
            let (values, valid) = frame.channel(ch);
            check_plane(ch.name(), values.len(), plane)?;
            check_plane(ch.name(), valid.len(), plane)?;
            let info = catalog.dynamic(ch);
            let c = t * NUM_TARGETS + v.index();
            for ((o, &x), &m) in target.plane_mut(0, c).iter_mut().zip(values).zip(valid) {
                *o = if m { info.normalize(x as f64) } else { 0.0 };
            }
            mask.plane_mut(0, c).copy_from_slice(valid);
        }
    }
    Ok((target, mask))
}

/// Maps a normalized prediction back to physical units, channel by channel.
pub fn denormalize_targets(pred: &Grid4D, catalog: &ChannelCatalog) -> Grid4D {
    let mut out = pred.clone();
    for n in 0..pred.batch() {
        for c in 0..pred.channels() {
            let info = catalog.dynamic(Channel::from(TargetVariable::ALL[c % NUM_TARGETS]));
            for v in out.plane_mut(n, c) {
                *v = info.denormalize(*v);
            }
        }
    }
    out
}

/// Start indices of all windows in a day of `frames` frames.
pub fn window_starts(frames: usize, stride: usize) -> Vec<usize> {
    if frames < WINDOW_FRAMES || stride == 0 {
        return Vec::new();
    }
    (0..=frames - WINDOW_FRAMES).step_by(stride).collect()
}

/// Builds the window of `day` that starts at frame `start`.
pub fn build_window(
    region: &RegionDataset,
    prepared: &PreparedDay<'_>,
    day: &DayRecord,
    start: usize,
    spec: &FeatureSpec,
) -> Result<SampleWindow> {
    let (h, w) = (region.height, region.width);
    let inputs: Vec<FrameView<'_>> = (start..start + INPUT_FRAMES).map(|t| prepared.frame(t)).collect();
    let input = assemble_input(&inputs, &region.statics, h, w, &region.catalog, spec)?;
    let targets: Vec<FrameView<'_>> = (start + INPUT_FRAMES..start + WINDOW_FRAMES).map(|t| day.frame(t)).collect();
    let (target, target_mask) = extract_targets(&targets, h, w, &region.catalog)?;
    let (last_observed, last_mask) = extract_targets(&[day.frame(start + INPUT_FRAMES - 1)], h, w, &region.catalog)?;
    debug_assert!(last_observed
        .as_slice()
        .iter()
        .zip(last_mask.as_slice())
        .all(|(&v, &m)| m || v == 0.0));
    Ok(SampleWindow {
        input,
        target,
        target_mask,
        last_observed,
        provenance: Provenance {
            region: region.region_id.clone(),
            day: day.day,
            start,
        },
    })
}

/// Every 36-frame window of every day, in (day, start) order.
pub fn window_split(region: &RegionDataset, spec: &FeatureSpec, stride: usize) -> Result<Vec<SampleWindow>> {
    if stride == 0 {
        return Err(Error::Config("window stride must be at least 1".into()));
    }
    spec.validate()?;
    region.validate()?;
    let mut out = Vec::new();
    for day in &region.days {
        let starts = window_starts(day.frames, stride);
        if starts.is_empty() {
            continue;
        }
        let prepared = PreparedDay::new(day, spec);
        for start in starts {
            out.push(build_window(region, &prepared, day, start, spec)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f32], valid: &[bool]) -> ChannelSeries {
        ChannelSeries {
            frames: values.len(),
            values: values.to_vec(),
            valid: valid.to_vec(),
        }
    }

    #[test]
    fn zero_fill_cases() {
        let v = [1.0, -2.0, 3.0];
        assert_eq!(zero_fill(&v, &[true; 3]).unwrap(), v.to_vec());
        assert_eq!(zero_fill(&v, &[false; 3]).unwrap(), vec![0.0; 3]);
        assert_eq!(zero_fill(&v, &[true, false, true]).unwrap(), vec![1.0, 0.0, 3.0]);
        assert!(zero_fill(&v, &[true]).is_err());
    }

    #[test]
    fn interpolation_midpoint() {
        let s = interpolate_temporal(&series(&[10.0, 0.0, 20.0], &[true, false, true]));
        assert_eq!(s.values, vec![10.0, 15.0, 20.0]);
        assert_eq!(s.valid, vec![true; 3]);
    }

    #[test]
    fn interpolation_keeps_edges_missing() {
        let s = interpolate_temporal(&series(&[9.0, 1.0, 0.0, 4.0, 7.0], &[false, true, false, true, false]));
        assert_eq!(s.values, vec![9.0, 1.0, 2.5, 4.0, 7.0]);
        assert_eq!(s.valid, vec![false, true, true, true, false]);
    }

    #[test]
    fn interpolation_without_gaps_is_identity() {
        let s = series(&[3.0, 1.0, 4.0, 1.0], &[true; 4]);
        assert_eq!(interpolate_temporal(&s), s);
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_starts(36, 1).len(), 1);
        assert_eq!(window_starts(96, 1).len(), 61);
        assert_eq!(window_starts(35, 1).len(), 0);
        assert_eq!(window_starts(96, 12), vec![0, 12, 24, 36, 48, 60]);
    }
}
