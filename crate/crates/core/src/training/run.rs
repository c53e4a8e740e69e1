//! The training loop: minibatch steps, cycles, early stopping and the
//! final cycle on train+validation data.

use serde::{Deserialize, Serialize};

use crate::dataset::SampleWindow;
use crate::error::{config_err, Error, Result};
use crate::evaluation::validation_score;
use crate::losses::{objective, LossBreakdown, LossConfig, NUM_TARGETS};
use crate::model::{ForwardOptions, VariationalUNet};
use crate::rng::{RngState, RngStream};
use crate::tensor::{Grid4D, Mask4D};
use crate::training::adam::{adam_step, AdamConfig, AdamState};
use crate::training::schedule::ScheduleState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRunConfig {
    pub batch_size: usize,
    pub cycles_max: usize,
    pub epochs_per_cycle: usize,
    pub early_stop: bool,
    pub finetune_on_validation: bool,
    pub seed: u64,
    pub lr_max: f64,
    pub lr_min: f64,
    pub adam: AdamConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            batch_size: 12,
            cycles_max: 20,
            epochs_per_cycle: 2,
            early_stop: true,
            finetune_on_validation: false,
            seed: 0,
            lr_max: 2e-4,
            lr_min: 0.0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainRunConfig {
    /// Six cycles without early stopping, then one cycle on train+validation.
    pub fn paper_protocol() -> Self {
        Self {
            cycles_max: 6,
            early_stop: false,
            finetune_on_validation: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(config_err!("batch_size must be at least 1"));
        }
        if self.epochs_per_cycle == 0 {
            return Err(config_err!("epochs_per_cycle must be at least 1"));
        }
        if !(self.lr_min >= 0.0 && self.lr_max >= self.lr_min && self.lr_max.is_finite()) {
            return Err(config_err!("learning rates must satisfy 0 <= lr_min <= lr_max"));
        }
        self.adam.validate()
    }

    pub fn steps_per_epoch(&self, samples: usize) -> usize {
        samples.div_ceil(self.batch_size)
    }

    pub fn steps_per_cycle(&self, samples: usize) -> usize {
        self.epochs_per_cycle * self.steps_per_epoch(samples)
    }
}

/// Mean of the per-step loss terms over a cycle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanLoss {
    pub l2_total: f64,
    pub l2_per_variable: [f64; NUM_TARGETS],
    pub kl: f64,
    pub total: f64,
}

impl MeanLoss {
    fn mean(parts: &[LossBreakdown]) -> Self {
        let n = parts.len().max(1) as f64;
        let mut out = MeanLoss::default();
        for b in parts {
            out.l2_total += b.l2_total;
            out.kl += b.kl;
            out.total += b.total;
            for (o, v) in out.l2_per_variable.iter_mut().zip(b.l2_per_variable) {
                *o += v;
            }
        }
        out.l2_total /= n;
        out.kl /= n;
        out.total /= n;
        out.l2_per_variable.iter_mut().for_each(|v| *v /= n);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleMetrics {
    /// 1-based.
    pub cycle: usize,
    pub finetune: bool,
    pub steps: usize,
    pub lr_first: f64,
    pub lr_last: f64,
    pub train: MeanLoss,
    pub validation: f64,
    pub improved: bool,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LogRecord {
    Step {
        /// 0-based global optimizer step.
        step: u64,
        cycle: usize,
        epoch: usize,
        batch: usize,
        lr: f64,
        l2_total: f64,
        l2_per_variable: [f64; NUM_TARGETS],
        kl: f64,
        total: f64,
    },
    Cycle(CycleMetrics),
}

/// Complete training state at a cycle boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: VariationalUNet,
    pub adam: AdamState,
    pub schedule: ScheduleState,
    pub rng: RngState,
    pub global_step: u64,
    pub cycles_completed: usize,
    pub best_score: Option<f64>,
    pub best_cycle: Option<usize>,
    pub history: Vec<CycleMetrics>,
    pub finetuned: bool,
}

impl Checkpoint {
    /// Fresh state for training `model` on `train_len` windows.
    pub fn start(model: VariationalUNet, run: &TrainRunConfig, train_len: usize, rng: RngStream) -> Result<Self> {
        run.validate()?;
        if train_len == 0 {
            return Err(Error::Empty("training set has no windows".into()));
        }
        Ok(Self {
            adam: AdamState::new(&model.params, run.adam),
            schedule: ScheduleState::new(run.steps_per_cycle(train_len), run.lr_max, run.lr_min)?,
            model,
            rng: rng.state(),
            global_step: 0,
            cycles_completed: 0,
            best_score: None,
            best_cycle: None,
            history: Vec::new(),
            finetuned: false,
        })
    }
}

/// Running fit: the latest state, the best state so far and whether early
/// stopping has fired.
#[derive(Debug, Clone, PartialEq)]
pub struct FitState {
    pub last: Checkpoint,
    pub best: Option<Checkpoint>,
    pub stopped: bool,
}

impl FitState {
    pub fn new(start: Checkpoint) -> Self {
        Self {
            last: start,
            best: None,
            stopped: false,
        }
    }

    /// The checkpoint with the lowest validation score (the latest one
    /// before any cycle completed).
    pub fn best_checkpoint(&self) -> &Checkpoint {
        self.best.as_ref().unwrap_or(&self.last)
    }
}

/// Summary of one call to [`train_cycle`].
#[derive(Debug, Clone, PartialEq)]
pub struct CycleStats {
    pub steps: usize,
    pub lr_first: f64,
    pub lr_last: f64,
    pub train: MeanLoss,
}

fn stack_batch(batch: &[&SampleWindow]) -> Result<(Grid4D, Grid4D, Mask4D)> {
    let x = Grid4D::stack(&batch.iter().map(|w| &w.input).collect::<Vec<_>>())?;
    let y = Grid4D::stack(&batch.iter().map(|w| &w.target).collect::<Vec<_>>())?;
    let m = Mask4D::stack(&batch.iter().map(|w| &w.target_mask).collect::<Vec<_>>())?;
    Ok((x, y, m))
}

/// Runs `epochs_per_cycle` epochs of minibatch steps. Each epoch's order is
/// a shuffle drawn from a stream forked off `rng`; dropout and latent noise
/// draw from `rng` itself.
#[allow(clippy::too_many_arguments)]
pub fn train_cycle(
    model: &mut VariationalUNet,
    train: &[&SampleWindow],
    adam: &mut AdamState,
    sched: &mut ScheduleState,
    loss_cfg: &LossConfig,
    run: &TrainRunConfig,
    rng: &mut RngStream,
    cycle: usize,
    global_step: &mut u64,
    log: &mut dyn FnMut(&LogRecord) -> Result<()>,
) -> Result<CycleStats> {
    if train.is_empty() {
        return Err(Error::Empty("training set has no windows".into()));
    }
    let mut losses = Vec::new();
    let lr_first = sched.current_lr;
    let mut lr_last = lr_first;
    for epoch in 0..run.epochs_per_cycle {
        let mut order: Vec<usize> = (0..train.len()).collect();
        rng.fork().shuffle(&mut order);
        for (b, idx) in order.chunks(run.batch_size).enumerate() {
            let batch: Vec<&SampleWindow> = idx.iter().map(|&i| train[i]).collect();
            let (x, y, m) = stack_batch(&batch)?;
            let (pred, latent, cache) = model.forward_with_cache(&x, ForwardOptions::TRAIN, rng)?;
            let (loss, grads) = objective(&pred, &y, &m, &latent, loss_cfg)?;
            if !loss.total.is_finite() {
                let names: Vec<String> = batch
                    .iter()
                    .map(|w| format!("{}/day{}/{}", w.provenance.region, w.provenance.day, w.provenance.start))
                    .collect();
                return Err(Error::Numeric(format!(
                    "non-finite loss {} at cycle {cycle}, epoch {}, batch {b} (windows {})",
                    loss.total,
                    epoch + 1,
                    names.join(", ")
                )));
            }
            model.zero_grad();
            model.backward(&cache, &latent, &grads)?;
            let lr = sched.current_lr;
            adam_step(&mut model.params, adam, lr);
            log(&LogRecord::Step {
                step: *global_step,
                cycle,
                epoch: epoch + 1,
                batch: b,
                lr,
                l2_total: loss.l2_total,
                l2_per_variable: loss.l2_per_variable,
                kl: loss.kl,
                total: loss.total,
            })?;
            lr_last = lr;
            *global_step += 1;
            sched.advance();
            losses.push(loss);
        }
    }
    Ok(CycleStats {
        steps: losses.len(),
        lr_first,
        lr_last,
        train: MeanLoss::mean(&losses),
    })
}

fn run_cycle(
    ck: &mut Checkpoint,
    train: &[&SampleWindow],
    loss_cfg: &LossConfig,
    run: &TrainRunConfig,
    log: &mut dyn FnMut(&LogRecord) -> Result<()>,
) -> Result<CycleStats> {
    let mut rng = RngStream::from_state(ck.rng.clone());
    let cycle = ck.cycles_completed + 1;
    let stats = train_cycle(
        &mut ck.model,
        train,
        &mut ck.adam,
        &mut ck.schedule,
        loss_cfg,
        run,
        &mut rng,
        cycle,
        &mut ck.global_step,
        log,
    )?;
    ck.rng = rng.state();
    ck.cycles_completed = cycle;
    Ok(stats)
}

fn checked_score(score: f64, cycle: usize) -> Result<f64> {
    if !score.is_finite() {
        return Err(Error::Numeric(format!("validation score {score} after cycle {cycle}")));
    }
    Ok(score)
}

/// Continues `state` until `cycles_max` cycles have run or a cycle fails to
/// strictly improve the best validation score (with `early_stop`).
pub fn fit_resume(
    mut state: FitState,
    train: &[SampleWindow],
    loss_cfg: &LossConfig,
    run: &TrainRunConfig,
    validate: &mut dyn FnMut(&VariationalUNet) -> Result<f64>,
    log: &mut dyn FnMut(&LogRecord) -> Result<()>,
) -> Result<FitState> {
    run.validate()?;
    loss_cfg.validate()?;
    let refs: Vec<&SampleWindow> = train.iter().collect();
    while !state.stopped && state.last.cycles_completed < run.cycles_max {
        let ck = &mut state.last;
        let stats = run_cycle(ck, &refs, loss_cfg, run, log)?;
        let score = checked_score(validate(&ck.model)?, ck.cycles_completed)?;
        let improved = ck.best_score.is_none_or(|b| score < b);
        if improved {
            ck.best_score = Some(score);
            ck.best_cycle = Some(ck.cycles_completed);
        }
        let metrics = CycleMetrics {
            cycle: ck.cycles_completed,
            finetune: false,
            steps: stats.steps,
            lr_first: stats.lr_first,
            lr_last: stats.lr_last,
            train: stats.train,
            validation: score,
            improved,
        };
        log(&LogRecord::Cycle(metrics.clone()))?;
        ck.history.push(metrics);
        if improved {
            state.best = Some(state.last.clone());
        } else if run.early_stop {
            state.stopped = true;
        }
    }
    Ok(state)
}

/// Trains from `start` per `run`; see [`fit_resume`].
pub fn fit(
    start: Checkpoint,
    train: &[SampleWindow],
    loss_cfg: &LossConfig,
    run: &TrainRunConfig,
    validate: &mut dyn FnMut(&VariationalUNet) -> Result<f64>,
    log: &mut dyn FnMut(&LogRecord) -> Result<()>,
) -> Result<FitState> {
    fit_resume(FitState::new(start), train, loss_cfg, run, validate, log)
}

/// One extra cycle on train+validation windows with the schedule restarted
/// at `lr_max`; the optimizer state carries over.
#[allow(clippy::too_many_arguments)]
pub fn finetune_on_validation(
    ckpt: &Checkpoint,
    train: &[SampleWindow],
    val: &[SampleWindow],
    loss_cfg: &LossConfig,
    run: &TrainRunConfig,
    validate: &mut dyn FnMut(&VariationalUNet) -> Result<f64>,
    log: &mut dyn FnMut(&LogRecord) -> Result<()>,
) -> Result<Checkpoint> {
    run.validate()?;
    loss_cfg.validate()?;
    let refs: Vec<&SampleWindow> = train.iter().chain(val).collect();
    if refs.is_empty() {
        return Err(Error::Empty("no windows to fine-tune on".into()));
    }
    let mut ck = ckpt.clone();
    let cycle_index = ck.schedule.cycle_index;
    ck.schedule = ScheduleState::new(run.steps_per_cycle(refs.len()), run.lr_max, run.lr_min)?;
    ck.schedule.cycle_index = cycle_index;
    let stats = run_cycle(&mut ck, &refs, loss_cfg, run, log)?;
    let score = checked_score(validate(&ck.model)?, ck.cycles_completed)?;
    let metrics = CycleMetrics {
        cycle: ck.cycles_completed,
        finetune: true,
        steps: stats.steps,
        lr_first: stats.lr_first,
        lr_last: stats.lr_last,
        train: stats.train,
        validation: score,
        improved: false,
    };
    log(&LogRecord::Cycle(metrics.clone()))?;
    ck.history.push(metrics);
    ck.finetuned = true;
    Ok(ck)
}

/// Result of [`train_protocol`].
#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub fit: FitState,
    /// The fine-tuned model when `run.finetune_on_validation` is set, else
    /// the best checkpoint of the fit.
    pub final_checkpoint: Checkpoint,
}

/// The full protocol: cycles on `train` scored on `val` (mean-mode latent),
/// then, if configured, one cycle on train+validation starting from the
/// last cycle's state.
pub fn train_protocol(
    start: Checkpoint,
    train: &[SampleWindow],
    val: &[SampleWindow],
    loss_cfg: &LossConfig,
    run: &TrainRunConfig,
    log: &mut dyn FnMut(&LogRecord) -> Result<()>,
) -> Result<ProtocolOutcome> {
    if val.is_empty() {
        return Err(Error::Empty("validation set has no windows".into()));
    }
    let mut validate = |m: &VariationalUNet| validation_score(m, val, &loss_cfg.weights);
    let fit = fit(start, train, loss_cfg, run, &mut validate, log)?;
    let final_checkpoint = if run.finetune_on_validation {
        finetune_on_validation(&fit.last, train, val, loss_cfg, run, &mut validate, log)?
    } else {
        fit.best_checkpoint().clone()
    };
    Ok(ProtocolOutcome { fit, final_checkpoint })
}
