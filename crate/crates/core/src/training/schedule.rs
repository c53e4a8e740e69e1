use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Cyclic cosine annealing with warm restarts, advanced once per optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub cycle_index: usize,
    pub step_in_cycle: usize,
    pub steps_per_cycle: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub current_lr: f64,
}

impl ScheduleState {
    pub fn new(steps_per_cycle: usize, lr_max: f64, lr_min: f64) -> Result<Self> {
        if steps_per_cycle == 0 {
            return Err(config_err!("steps_per_cycle must be at least 1"));
        }
        if !(lr_min >= 0.0 && lr_max >= lr_min && lr_max.is_finite()) {
            return Err(config_err!("learning rates must satisfy 0 <= lr_min <= lr_max, got {lr_min} and {lr_max}"));
        }
        let mut s = Self {
            cycle_index: 0,
            step_in_cycle: 0,
            steps_per_cycle,
            lr_max,
            lr_min,
            current_lr: lr_max,
        };
        s.current_lr = cyclic_cosine_lr(&s);
        Ok(s)
    }

    /// Moves to the next optimizer step, restarting at `lr_max` after the
    /// last step of a cycle.
    pub fn advance(&mut self) {
        self.step_in_cycle += 1;
        if self.step_in_cycle == self.steps_per_cycle {
            self.step_in_cycle = 0;
            self.cycle_index += 1;
        }
        self.current_lr = cyclic_cosine_lr(self);
    }

    /// The rate at global step `step` counted from the first step of cycle 0.
    pub fn lr_at(&self, step: usize) -> f64 {
        cyclic_cosine_lr(&Self {
            step_in_cycle: step % self.steps_per_cycle,
            ..self.clone()
        })
    }

    /// The full `(global step, lr)` table for `cycles` cycles.
    pub fn table(&self, cycles: usize) -> Vec<(usize, f64)> {
        (0..cycles * self.steps_per_cycle).map(|k| (k, self.lr_at(k))).collect()
    }
}

/// `lr_min + (lr_max − lr_min)/2 · (1 + cos(π · step_in_cycle / steps_per_cycle))`,
/// evaluated as `lr_max − (lr_max − lr_min)/2 · (1 − cos(…))` so a cycle
/// start is exactly `lr_max`.
pub fn cyclic_cosine_lr(s: &ScheduleState) -> f64 {
    let phase = s.step_in_cycle as f64 / s.steps_per_cycle as f64;
    s.lr_max - (s.lr_max - s.lr_min) / 2.0 * (1.0 - (PI * phase).cos())
}
