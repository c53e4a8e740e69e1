//! Region dataset directories.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/statics/<name>.vw4c            shape [H, W]
//! <dir>/days/dayNNN/<channel>.vw4c     shape [T, H, W]
//! <dir>/days/dayNNN/<channel>.vw4m     shape [T, H, W]
//! ```
//!
//! The manifest records every file with its shape and CRC32; both are
//! checked against the blob header and trailer on read.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::blob;
use crate::dataset::channels::{Channel, ChannelCatalog, StaticChannel};
use crate::dataset::region::{ChannelSeries, DayRecord, RegionDataset};
use crate::error::{Error, Result};
use crate::model::{read_json, write_json};

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const DATASET_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    pub shape: Vec<usize>,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticEntry {
    pub name: String,
    pub values: FileEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEntry {
    pub name: String,
    pub values: FileEntry,
    pub mask: FileEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayEntry {
    pub day: u32,
    pub frames: usize,
    pub channels: Vec<ChannelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    /// Regions stored in this directory (always one per directory).
    pub regions: Vec<String>,
    /// `[H, W]`
    pub grid: [usize; 2],
    pub catalog: ChannelCatalog,
    pub statics: Vec<StaticEntry>,
    pub days: Vec<DayEntry>,
}

impl DatasetManifest {
    pub fn frame_count(&self) -> usize {
        self.days.iter().map(|d| d.frames).sum()
    }
}

/// Writes `ds` into `dir` (created if needed) and returns the manifest.
pub fn write_dataset(ds: &RegionDataset, dir: &Path) -> Result<DatasetManifest> {
    ds.validate()?;
    let (h, w) = (ds.height, ds.width);
    let statics = StaticChannel::ALL
        .iter()
        .map(|&s| {
            let file = format!("statics/{}.vw4c", s.name());
            let crc32 = blob::write_values(&dir.join(&file), &[h, w], ds.static_grid(s))?;
            Ok(StaticEntry {
                name: s.name().to_string(),
                values: FileEntry {
                    file,
                    shape: vec![h, w],
                    crc32,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut days = Vec::with_capacity(ds.days.len());
    for day in &ds.days {
        let shape = vec![day.frames, h, w];
        let mut channels = Vec::with_capacity(Channel::ALL.len());
        for c in Channel::ALL {
            let series = day.channel(c);
            let stem = format!("days/day{:03}/{}", day.day, c.name());
            let vfile = format!("{stem}.vw4c");
            let mfile = format!("{stem}.vw4m");
            let vcrc = blob::write_values(&dir.join(&vfile), &shape, &series.values)?;
            let mcrc = blob::write_mask(&dir.join(&mfile), &shape, &series.valid)?;
            channels.push(ChannelEntry {
                name: c.name().to_string(),
                values: FileEntry {
                    file: vfile,
                    shape: shape.clone(),
                    crc32: vcrc,
                },
                mask: FileEntry {
                    file: mfile,
                    shape: shape.clone(),
                    crc32: mcrc,
                },
            });
        }
        days.push(DayEntry {
            day: day.day,
            frames: day.frames,
            channels,
        });
    }
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        regions: vec![ds.region_id.clone()],
        grid: [h, w],
        catalog: ds.catalog.clone(),
        statics,
        days,
    };
    write_json(&dir.join(DATASET_MANIFEST), &manifest)?;
    Ok(manifest)
}

fn check_entry(dir: &Path, entry: &FileEntry, found_shape: &[usize]) -> Result<()> {
    if found_shape != entry.shape.as_slice() {
        return Err(Error::Validation(format!(
            "{}: manifest declares shape {:?} but the blob holds {:?}",
            dir.join(&entry.file).display(),
            entry.shape,
            found_shape
        )));
    }
    Ok(())
}

fn read_values(dir: &Path, entry: &FileEntry) -> Result<Vec<f32>> {
    let path = dir.join(&entry.file);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let (shape, values) = blob::decode_values(&path, &bytes)?;
    check_crc(&path, entry, &bytes)?;
    check_entry(dir, entry, &shape)?;
    Ok(values)
}

fn read_mask(dir: &Path, entry: &FileEntry) -> Result<Vec<bool>> {
    let path = dir.join(&entry.file);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let (shape, mask) = blob::decode_mask(&path, &bytes)?;
    check_crc(&path, entry, &bytes)?;
    check_entry(dir, entry, &shape)?;
    Ok(mask)
}

fn check_crc(path: &Path, entry: &FileEntry, bytes: &[u8]) -> Result<()> {
    let found = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    if found != entry.crc32 {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            expected: entry.crc32,
            found,
        });
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(DATASET_MANIFEST);
    let manifest: DatasetManifest = read_json(&path)?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Version {
            path,
            expected: DATASET_FORMAT_VERSION,
            found: manifest.format_version,
        });
    }
    Ok(manifest)
}

/// Reads a region written by [`write_dataset`], verifying every checksum.
pub fn read_dataset(dir: &Path) -> Result<RegionDataset> {
    let manifest = read_manifest(dir)?;
    let region_id = match manifest.regions.as_slice() {
        [id] => id.clone(),
        other => {
            return Err(Error::Validation(format!(
                "a dataset directory holds exactly one region, manifest lists {}",
                other.len()
            )))
        }
    };
    manifest.catalog.validate().map_err(|e| Error::Validation(e.to_string()))?;
    let [h, w] = manifest.grid;
    if manifest.statics.len() != StaticChannel::ALL.len() {
        return Err(Error::Validation(format!(
            "manifest lists {} static grids, expected {}",
            manifest.statics.len(),
            StaticChannel::ALL.len()
        )));
    }
    let mut statics = Vec::with_capacity(StaticChannel::ALL.len());
    for (s, entry) in StaticChannel::ALL.iter().zip(&manifest.statics) {
        if entry.name != s.name() {
            return Err(Error::Validation(format!("static grid {} listed where {} was expected", entry.name, s.name())));
        }
        check_declared(dir, &entry.values, &[h, w])?;
        statics.push(read_values(dir, &entry.values)?);
    }
    let mut days = Vec::with_capacity(manifest.days.len());
    for d in &manifest.days {
        if d.channels.len() != Channel::ALL.len() {
            return Err(Error::Validation(format!(
                "day {} lists {} channels, expected {}",
                d.day,
                d.channels.len(),
                Channel::ALL.len()
            )));
        }
        let shape = [d.frames, h, w];
        let mut channels = Vec::with_capacity(Channel::ALL.len());
        for (c, entry) in Channel::ALL.iter().zip(&d.channels) {
            if entry.name != c.name() {
                return Err(Error::Validation(format!(
                    "day {} lists channel {} where {} was expected",
                    d.day,
                    entry.name,
                    c.name()
                )));
            }
            check_declared(dir, &entry.values, &shape)?;
            check_declared(dir, &entry.mask, &shape)?;
            channels.push(ChannelSeries {
                frames: d.frames,
                values: read_values(dir, &entry.values)?,
                valid: read_mask(dir, &entry.mask)?,
            });
        }
        days.push(DayRecord {
            day: d.day,
            frames: d.frames,
            channels,
        });
    }
    let ds = RegionDataset {
        region_id,
        height: h,
        width: w,
        catalog: manifest.catalog,
        statics,
        days,
    };
    ds.validate()?;
    Ok(ds)
}

fn check_declared(dir: &Path, entry: &FileEntry, want: &[usize]) -> Result<()> {
    if entry.shape != want {
        return Err(Error::Validation(format!(
            "{}: manifest shape {:?} disagrees with the grid and frame count {:?}",
            dir.join(&entry.file).display(),
            entry.shape,
            want
        )));
    }
    Ok(())
}
