//! Adam, cyclic cosine annealing with warm restarts, cycle-level early
//! stopping, the final train+validation cycle and checkpointing.

mod adam;
mod checkpoint;
mod run;
mod schedule;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, CHECKPOINT_FORMAT_VERSION, CHECKPOINT_MANIFEST};
pub use run::{
    finetune_on_validation, fit, fit_resume, train_cycle, Checkpoint, CycleMetrics, CycleStats, FitState, LogRecord,
    MeanLoss, ProtocolOutcome, TrainRunConfig, train_protocol,
};
pub use schedule::{cyclic_cosine_lr, ScheduleState};
