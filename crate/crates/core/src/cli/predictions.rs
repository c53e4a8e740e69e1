//! Prediction directories.
//!
//! ```text
//! <dir>/predictions.json            manifest: windows, split, config
//! <dir>/predictions.vw4c            [windows, 128, H, W] f32, physical units
//! <dir>/member_<k>/predictions.vw4c ensemble members (with --ensemble)
//! <dir>/mean/predictions.vw4c       ensemble mean (same as the top-level blob)
//! <dir>/std/predictions.vw4c        ensemble standard deviation
//! <dir>/images/w<i>_<var>_t<tt>.pgm grayscale frames (with --pgm)
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Split};
use super::pgm::write_pgm;
use crate::dataset::{blob, Channel, ChannelCatalog, Provenance, SampleWindow};
use crate::error::{Error, Result};
use crate::losses::{TargetVariable, NUM_TARGETS};
use crate::model::{read_json, EnsemblePrediction, LatentMode, VariationalUNet};
use crate::rng::RngStream;
use crate::tensor::Grid4D;

pub const PREDICTIONS_MANIFEST: &str = "predictions.json";
pub const PREDICTIONS_BLOB: &str = "predictions.vw4c";
pub const PREDICTIONS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionManifest {
    pub format_version: u32,
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub split: Split,
    pub mode: LatentMode,
    pub ensemble: Option<usize>,
    /// `[windows, 128, H, W]`
    pub shape: [usize; 4],
    pub crc32: u32,
    pub windows: Vec<Provenance>,
    pub config: RunConfig,
}

impl PredictionManifest {
    pub(super) fn new(cfg: &RunConfig, split: Split, data: &Path, windows: &[SampleWindow], ckpt: &Path) -> Self {
        Self {
            format_version: PREDICTIONS_FORMAT_VERSION,
            checkpoint: ckpt.to_path_buf(),
            data: data.to_path_buf(),
            split,
            mode: LatentMode::Mean,
            ensemble: None,
            shape: [0; 4],
            crc32: 0,
            windows: windows.iter().map(|w| w.provenance.clone()).collect(),
            config: cfg.clone(),
        }
    }
}

pub(super) fn write_blob(dir: &Path, values: &[f32], shape: [usize; 4]) -> Result<u32> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    blob::write_values(&dir.join(PREDICTIONS_BLOB), &shape, values)
}

/// Reads a prediction directory (or its manifest path); the blob's checksum
/// and shape are checked against the manifest.
pub fn read_predictions(path: &Path) -> Result<(PredictionManifest, Vec<f32>)> {
    let dir = if path.is_file() { path.parent().unwrap_or(Path::new(".")) } else { path };
    let mpath = dir.join(PREDICTIONS_MANIFEST);
    let manifest: PredictionManifest = read_json(&mpath)?;
    if manifest.format_version != PREDICTIONS_FORMAT_VERSION {
        return Err(Error::Version {
            path: mpath,
            expected: PREDICTIONS_FORMAT_VERSION,
            found: manifest.format_version,
        });
    }
    let bpath = dir.join(PREDICTIONS_BLOB);
    let bytes = std::fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;
    let (shape, values) = blob::decode_values(&bpath, &bytes)?;
    let found = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    if found != manifest.crc32 {
        return Err(Error::Checksum {
            path: bpath,
            expected: manifest.crc32,
            found,
        });
    }
    if shape != manifest.shape || manifest.shape[0] != manifest.windows.len() {
        return Err(Error::Validation(format!(
            "{} has shape {shape:?}; the manifest lists {:?} for {} windows",
            bpath.display(),
            manifest.shape,
            manifest.windows.len()
        )));
    }
    Ok((manifest, values))
}

fn target_info(catalog: &ChannelCatalog, c: usize) -> (f64, f64) {
    let info = catalog.dynamic(Channel::from(TargetVariable::ALL[c % NUM_TARGETS]));
    (info.min, info.max)
}

/// Splits a physical-unit blob into normalized per-window predictions.
pub(super) fn normalized_windows(values: &[f32], shape: [usize; 4], catalog: &ChannelCatalog) -> Result<Vec<Grid4D>> {
    let [n, c, h, w] = shape;
    let plane = h * w;
    (0..n)
        .map(|i| {
            let mut data = Vec::with_capacity(c * plane);
            for ch in 0..c {
                let (lo, hi) = target_info(catalog, ch);
                let start = (i * c + ch) * plane;
                data.extend(values[start..start + plane].iter().map(|&v| (v as f64 - lo) / (hi - lo)));
            }
            Grid4D::from_vec([1, c, h, w], data)
        })
        .collect()
}

/// Standard deviations scale with the range only.
pub(super) fn std_physical(std: &Grid4D, catalog: &ChannelCatalog) -> Vec<f32> {
    let [n, c, _, _] = std.shape();
    let mut out = Vec::with_capacity(std.len());
    for i in 0..n {
        for ch in 0..c {
            let (lo, hi) = target_info(catalog, ch);
            out.extend(std.plane(i, ch).iter().map(|&v| (v * (hi - lo)) as f32));
        }
    }
    out
}

/// `n`-member ensembles for every window, stacked along the batch axis.
/// Window `i` draws from seed `seed + i`.
pub(super) fn ensemble(model: &VariationalUNet, windows: &[SampleWindow], n: usize, seed: u64) -> Result<EnsemblePrediction> {
    let per: Vec<EnsemblePrediction> = windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| model.predict_ensemble(&w.input, n, &mut RngStream::new(seed.wrapping_add(i as u64))))
        .collect::<Result<_>>()?;
    let stack = |f: &dyn Fn(&EnsemblePrediction) -> &Grid4D| Grid4D::stack(&per.iter().map(f).collect::<Vec<_>>());
    let members = (0..n).map(|k| stack(&|e| &e.members[k])).collect::<Result<Vec<_>>>()?;
    Ok(EnsemblePrediction {
        members,
        mean: stack(&|e| &e.mean)?,
        std: stack(&|e| &e.std)?,
    })
}

/// One image per (window, variable, lead time), scaled by the channel range.
pub(super) fn write_images(dir: &Path, pred: &Grid4D, windows: usize, ds: &crate::dataset::RegionDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let [_, c, h, w] = pred.shape();
    for i in 0..windows {
        for ch in 0..c {
            let (lo, hi) = target_info(&ds.catalog, ch);
            let name = TargetVariable::ALL[ch % NUM_TARGETS].name();
            let path = dir.join(format!("w{i:04}_{name}_t{:02}.pgm", ch / NUM_TARGETS + 1));
            let physical: Vec<f64> = pred.plane(i, ch).iter().map(|&v| lo + v * (hi - lo)).collect();
            write_pgm(&path, w, h, &physical, lo, hi)?;
        }
    }
    Ok(())
}
