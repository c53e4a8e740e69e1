//! Model persistence: a JSON manifest plus one raw little-endian f64 blob
//! per parameter, each protected by a CRC32 recorded in the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::network::VariationalUNet;
use crate::model::params::VUNetParams;
use crate::rng::RngStream;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const MODEL_MANIFEST: &str = "model.json";

/// One persisted f64 tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Path relative to the manifest directory.
    pub file: String,
    pub crc32: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub config: ModelConfig,
    pub params: Vec<BlobEntry>,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_f64_blob(root: &Path, rel: &str, name: &str, shape: &[usize], values: &[f64]) -> Result<BlobEntry> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    Ok(BlobEntry {
        name: name.to_string(),
        shape: shape.to_vec(),
        file: rel.to_string(),
        crc32: crc32fast::hash(&bytes),
    })
}

pub(crate) fn read_f64_blob(root: &Path, entry: &BlobEntry) -> Result<Vec<f64>> {
    let path: PathBuf = root.join(&entry.file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let count: usize = entry.shape.iter().product();
    if bytes.len() != count * 8 {
        return Err(Error::Format {
            path,
            reason: format!(
                "expected {} bytes for shape {:?}, found {}",
                count * 8,
                entry.shape,
                bytes.len()
            ),
        });
    }
    let found = crc32fast::hash(&bytes);
    if found != entry.crc32 {
        return Err(Error::Checksum {
            path,
            expected: entry.crc32,
            found,
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Writes every parameter of `params` under `root/subdir`.
pub(crate) fn write_param_set(root: &Path, subdir: &str, params: &VUNetParams) -> Result<Vec<BlobEntry>> {
    params
        .named()
        .into_iter()
        .map(|(name, p)| write_f64_blob(root, &format!("{subdir}/{name}.f64"), &name, &p.shape, &p.values))
        .collect()
}

/// Reads a parameter set, validating names and shapes against `cfg`.
pub(crate) fn read_param_set(root: &Path, cfg: &ModelConfig, entries: &[BlobEntry]) -> Result<VUNetParams> {
    let mut params = VUNetParams::init(cfg, &mut RngStream::new(0));
    let names: Vec<(String, Vec<usize>)> = params.named().into_iter().map(|(n, p)| (n, p.shape.clone())).collect();
    if names.len() != entries.len() {
        return Err(Error::Validation(format!(
            "manifest lists {} parameter tensors but the model configuration has {}",
            entries.len(),
            names.len()
        )));
    }
    for ((name, shape), (entry, dst)) in names.iter().zip(entries.iter().zip(params.tensors_mut())) {
        if &entry.name != name || &entry.shape != shape {
            return Err(Error::Validation(format!(
                "parameter entry {} {:?} does not match configuration tensor {} {:?}",
                entry.name, entry.shape, name, shape
            )));
        }
        dst.values = read_f64_blob(root, entry)?;
        dst.zero_grad();
    }
    Ok(params)
}

impl VariationalUNet {
    /// Writes `model.json` and `params/*.f64` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let params = write_param_set(dir, "params", &self.params)?;
        write_json(
            &dir.join(MODEL_MANIFEST),
            &ModelManifest {
                format_version: MODEL_FORMAT_VERSION,
                config: self.cfg.clone(),
                params,
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MODEL_MANIFEST);
        let manifest: ModelManifest = read_json(&path)?;
        if manifest.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                path,
                expected: MODEL_FORMAT_VERSION,
                found: manifest.format_version,
            });
        }
        manifest.config.validate().map_err(|e| Error::Validation(e.to_string()))?;
        let params = read_param_set(dir, &manifest.config, &manifest.params)?;
        Ok(Self {
            cfg: manifest.config,
            params,
        })
    }
}
