use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleWindow;
use crate::error::{config_err, Error, Result};
use crate::losses::{VariableWeights, NUM_TARGETS};
use crate::model::{LatentMode, VariationalUNet};
use crate::rng::RngStream;
use crate::tensor::{Grid4D, Mask4D};

/// Masked weighted squared error of a prediction set (the training L2 term
/// without KL), with breakdowns.
///
/// `aggregate` is the mean over samples of
/// `1/(T·4) Σ_t Σ_v (w_v / P_{t,v}) Σ_valid (ŷ − y)²`;
/// `per_variable` splits it by `v` (the entries sum to `aggregate`) and
/// `per_leadtime[t]` is `1/4 Σ_v (w_v / P_{t,v}) Σ_valid (ŷ − y)²` averaged
/// over samples (its mean over `t` equals `aggregate`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub aggregate: f64,
    pub per_variable: [f64; NUM_TARGETS],
    pub per_leadtime: Vec<f64>,
    /// Fraction of target pixels that were valid, per variable.
    pub coverage: [f64; NUM_TARGETS],
    pub samples: usize,
}

/// Accumulates per-sample contributions in insertion order.
#[derive(Debug, Clone)]
pub struct ScoreAccumulator {
    weights: [f64; NUM_TARGETS],
    per_variable: [f64; NUM_TARGETS],
    per_leadtime: Vec<f64>,
    valid: [usize; NUM_TARGETS],
    total: [usize; NUM_TARGETS],
    samples: usize,
}

impl ScoreAccumulator {
    pub fn new(weights: &VariableWeights) -> Self {
        Self {
            weights: weights.in_channel_order(),
            per_variable: [0.0; NUM_TARGETS],
            per_leadtime: Vec::new(),
            valid: [0; NUM_TARGETS],
            total: [0; NUM_TARGETS],
            samples: 0,
        }
    }

    /// Adds every sample of a `[B, 4T, H, W]` prediction.
    pub fn add(&mut self, pred: &Grid4D, target: &Grid4D, mask: &Mask4D) -> Result<()> {
        if pred.shape() != target.shape() || pred.shape() != mask.shape() {
            return Err(config_err!(
                "prediction {:?}, target {:?} and mask {:?} shapes differ",
                pred.shape(),
                target.shape(),
                mask.shape()
            ));
        }
        let channels = pred.channels();
        if channels == 0 || channels % NUM_TARGETS != 0 {
            return Err(config_err!("prediction channels ({channels}) must be a positive multiple of {NUM_TARGETS}"));
        }
        let lead = channels / NUM_TARGETS;
        if self.per_leadtime.is_empty() {
            self.per_leadtime = vec![0.0; lead];
        } else if self.per_leadtime.len() != lead {
            return Err(config_err!("samples disagree on the number of lead times"));
        }
        let norm = 1.0 / channels as f64;
        for n in 0..pred.batch() {
            for c in 0..channels {
                let (t, v) = (c / NUM_TARGETS, c % NUM_TARGETS);
                let valid = mask.plane(n, c);
                let count = valid.iter().filter(|&&b| b).count();
                self.valid[v] += count;
                self.total[v] += valid.len();
                if count == 0 {
                    continue;
                }
                let (p, y) = (pred.plane(n, c), target.plane(n, c));
                let sse: f64 = (0..valid.len())
                    .filter(|&i| valid[i])
                    .map(|i| (p[i] - y[i]) * (p[i] - y[i]))
                    .sum();
                let contribution = self.weights[v] / count as f64 * norm * sse;
                self.per_variable[v] += contribution;
                self.per_leadtime[t] += contribution * lead as f64;
            }
            self.samples += 1;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<ScoreReport> {
        if self.samples == 0 {
            return Err(Error::Empty("cannot score an empty sample set".into()));
        }
        let inv = 1.0 / self.samples as f64;
        let per_variable = self.per_variable.map(|v| v * inv);
        let mut coverage = [0.0; NUM_TARGETS];
        for v in 0..NUM_TARGETS {
            coverage[v] = self.valid[v] as f64 / self.total[v].max(1) as f64;
        }
        Ok(ScoreReport {
            aggregate: per_variable.iter().sum(),
            per_variable,
            per_leadtime: self.per_leadtime.iter().map(|v| v * inv).collect(),
            coverage,
            samples: self.samples,
        })
    }
}

/// Scores aligned prediction, target and mask lists.
pub fn score(preds: &[Grid4D], targets: &[Grid4D], masks: &[Mask4D], weights: &VariableWeights) -> Result<ScoreReport> {
    if preds.len() != targets.len() || preds.len() != masks.len() {
        return Err(config_err!(
            "score got {} predictions, {} targets and {} masks",
            preds.len(),
            targets.len(),
            masks.len()
        ));
    }
    let mut acc = ScoreAccumulator::new(weights);
    for ((p, y), m) in preds.iter().zip(targets).zip(masks) {
        acc.add(p, y, m)?;
    }
    acc.finish()
}

/// Scores one prediction per window against the window's targets.
pub fn score_windows(preds: &[Grid4D], windows: &[SampleWindow], weights: &VariableWeights) -> Result<ScoreReport> {
    if preds.len() != windows.len() {
        return Err(config_err!("{} predictions for {} windows", preds.len(), windows.len()));
    }
    let mut acc = ScoreAccumulator::new(weights);
    for (p, w) in preds.iter().zip(windows) {
        acc.add(p, &w.target, &w.target_mask)?;
    }
    acc.finish()
}

/// Runs the model on every window (in parallel, results in window order).
/// In sample mode window `i` draws its noise from seed `seed + i`.
pub fn predict_windows(model: &VariationalUNet, windows: &[SampleWindow], mode: LatentMode, seed: u64) -> Result<Vec<Grid4D>> {
    windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let mut rng = RngStream::new(seed.wrapping_add(i as u64));
            model.forward(&w.input, mode, &mut rng).map(|(y, _)| y)
        })
        .collect()
}

/// Mean-mode aggregate score of `model` on `windows`: the early-stopping metric.
pub fn validation_score(model: &VariationalUNet, windows: &[SampleWindow], weights: &VariableWeights) -> Result<f64> {
    let preds = predict_windows(model, windows, LatentMode::Mean, 0)?;
    Ok(score_windows(&preds, windows, weights)?.aggregate)
}
