//! Checkpoint directories.
//!
//! ```text
//! <dir>/model.json          model manifest (loadable on its own)
//! <dir>/params/<name>.f64   parameters
//! <dir>/adam/m/<name>.f64   first moments
//! <dir>/adam/v/<name>.f64   second moments
//! <dir>/checkpoint.json     optimizer, schedule, RNG and history
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    read_f64_blob, read_json, read_param_set, write_f64_blob, write_json, write_param_set, BlobEntry, ModelConfig,
    ModelManifest, VariationalUNet, MODEL_FORMAT_VERSION, MODEL_MANIFEST,
};
use crate::rng::RngState;
use crate::training::adam::{AdamConfig, AdamState};
use crate::training::run::{Checkpoint, CycleMetrics};
use crate::training::schedule::ScheduleState;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
pub const CHECKPOINT_MANIFEST: &str = "checkpoint.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdamManifest {
    cfg: AdamConfig,
    step: u64,
    m: Vec<BlobEntry>,
    v: Vec<BlobEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointManifest {
    format_version: u32,
    config: ModelConfig,
    params: Vec<BlobEntry>,
    adam: AdamManifest,
    schedule: ScheduleState,
    rng: RngState,
    global_step: u64,
    cycles_completed: usize,
    best_score: Option<f64>,
    best_cycle: Option<usize>,
    history: Vec<CycleMetrics>,
    finetuned: bool,
}

pub fn save_checkpoint(ck: &Checkpoint, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let params = write_param_set(dir, "params", &ck.model.params)?;
    let named = ck.model.params.named();
    let moments = |sub: &str, bufs: &[Vec<f64>]| -> Result<Vec<BlobEntry>> {
        named
            .iter()
            .zip(bufs)
            .map(|((name, p), buf)| write_f64_blob(dir, &format!("adam/{sub}/{name}.f64"), name, &p.shape, buf))
            .collect()
    };
    let adam = AdamManifest {
        cfg: ck.adam.cfg,
        step: ck.adam.step,
        m: moments("m", &ck.adam.m)?,
        v: moments("v", &ck.adam.v)?,
    };
    write_json(
        &dir.join(MODEL_MANIFEST),
        &ModelManifest {
            format_version: MODEL_FORMAT_VERSION,
            config: ck.model.cfg.clone(),
            params: params.clone(),
        },
    )?;
    write_json(
        &dir.join(CHECKPOINT_MANIFEST),
        &CheckpointManifest {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: ck.model.cfg.clone(),
            params,
            adam,
            schedule: ck.schedule.clone(),
            rng: ck.rng.clone(),
            global_step: ck.global_step,
            cycles_completed: ck.cycles_completed,
            best_score: ck.best_score,
            best_cycle: ck.best_cycle,
            history: ck.history.clone(),
            finetuned: ck.finetuned,
        },
    )
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join(CHECKPOINT_MANIFEST);
    let m: CheckpointManifest = read_json(&path)?;
    if m.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Version {
            path,
            expected: CHECKPOINT_FORMAT_VERSION,
            found: m.format_version,
        });
    }
    m.config.validate().map_err(|e| Error::Validation(e.to_string()))?;
    let params = read_param_set(dir, &m.config, &m.params)?;
    let model = VariationalUNet::from_params(m.config, params)?;
    let named = model.params.named();
    let read_moments = |entries: &[BlobEntry]| -> Result<Vec<Vec<f64>>> {
        if entries.len() != named.len() {
            return Err(Error::Validation(format!(
                "optimizer lists {} moment tensors, the model has {}",
                entries.len(),
                named.len()
            )));
        }
        named
            .iter()
            .zip(entries)
            .map(|((name, p), e)| {
                if &e.name != name || e.shape != p.shape {
                    return Err(Error::Validation(format!("optimizer moment {} does not match parameter {name}", e.name)));
                }
                read_f64_blob(dir, e)
            })
            .collect()
    };
    let adam = AdamState {
        cfg: m.adam.cfg,
        step: m.adam.step,
        m: read_moments(&m.adam.m)?,
        v: read_moments(&m.adam.v)?,
    };
    drop(named);
    Ok(Checkpoint {
        model,
        adam,
        schedule: m.schedule,
        rng: m.rng,
        global_step: m.global_step,
        cycles_completed: m.cycles_completed,
        best_score: m.best_score,
        best_cycle: m.best_cycle,
        history: m.history,
        finetuned: m.finetuned,
    })
}

/// Loads a checkpoint and checks that it was trained with `expected`.
pub fn load_checkpoint_for(dir: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
    let ck = load_checkpoint(dir)?;
    if &ck.model.cfg != expected {
        return Err(Error::Validation(format!(
            "checkpoint in {} was trained with a different model configuration",
            dir.display()
        )));
    }
    Ok(ck)
}
