use std::collections::BTreeMap;

use crate::dataset::{Channel, RegionDataset, SampleWindow};
use crate::error::{config_err, Error, Result};
use crate::losses::{TargetVariable, NUM_TARGETS};
use crate::tensor::Grid4D;

/// Per-pixel temporal means of one region, in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMeans {
    pub height: usize,
    pub width: usize,
    /// Indexed by target variable, each `H*W`.
    pub means: Vec<Vec<f64>>,
}

/// Predicts every pixel's training-period mean for all lead times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeanBaseline {
    pub regions: BTreeMap<String, RegionMeans>,
}

fn region_means(ds: &RegionDataset) -> Result<RegionMeans> {
    if ds.days.is_empty() {
        return Err(Error::Empty(format!("region {} has no training days", ds.region_id)));
    }
    let plane = ds.plane_len();
    let mut means = Vec::with_capacity(NUM_TARGETS);
    for v in TargetVariable::ALL {
        let ch = Channel::from(v);
        let info = ds.catalog.dynamic(ch);
        let mut sum = vec![0.0f64; plane];
        let mut count = vec![0usize; plane];
        for day in &ds.days {
            let series = day.channel(ch);
            for t in 0..day.frames {
                let (vals, valid) = series.frame(t);
                for p in 0..plane {
                    if valid[p] {
                        sum[p] += info.normalize(vals[p] as f64);
                        count[p] += 1;
                    }
                }
            }
        }
        let total: usize = count.iter().sum();
        let global = if total > 0 { sum.iter().sum::<f64>() / total as f64 } else { 0.0 };
        means.push(
            sum.iter()
                .zip(&count)
                .map(|(&s, &c)| if c > 0 { s / c as f64 } else { global })
                .collect(),
        );
    }
    Ok(RegionMeans {
        height: ds.height,
        width: ds.width,
        means,
    })
}

/// Fits per-region, per-pixel means over all valid training frames. A pixel
/// never observed falls back to the variable's mean over the region.
pub fn mean_baseline(train: &[RegionDataset]) -> Result<MeanBaseline> {
    if train.is_empty() {
        return Err(Error::Empty("mean baseline needs at least one training region".into()));
    }
    let mut regions = BTreeMap::new();
    for ds in train {
        if regions.insert(ds.region_id.clone(), region_means(ds)?).is_some() {
            return Err(config_err!("region {} listed twice", ds.region_id));
        }
    }
    Ok(MeanBaseline { regions })
}

impl MeanBaseline {
    pub fn predict(&self, window: &SampleWindow) -> Result<Grid4D> {
        let r = self
            .regions
            .get(&window.provenance.region)
            .ok_or_else(|| config_err!("mean baseline has no statistics for region {}", window.provenance.region))?;
        let shape = window.target.shape();
        if (shape[2], shape[3]) != (r.height, r.width) {
            return Err(config_err!("window grid differs from the baseline's region grid"));
        }
        let mut out = Grid4D::zeros(shape);
        for c in 0..shape[1] {
            out.plane_mut(0, c).copy_from_slice(&r.means[c % NUM_TARGETS]);
        }
        Ok(out)
    }
}

/// Repeats the last observed frame of the target variables for every lead
/// time; pixels missing in that frame predict 0.
pub fn persistence_baseline(window: &SampleWindow) -> Grid4D {
    let shape = window.target.shape();
    let mut out = Grid4D::zeros(shape);
    for c in 0..shape[1] {
        out.plane_mut(0, c).copy_from_slice(window.last_observed.plane(0, c % NUM_TARGETS));
    }
    out
}
