use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::model::VUNetParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(config_err!("Adam betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(config_err!("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// Moment buffers, one per parameter tensor in [`VUNetParams::named`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &VUNetParams, cfg: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.named().iter().map(|(_, p)| vec![0.0; p.len()]).collect();
        Self {
            cfg,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Buffers for a single flat parameter vector of length `n`.
    pub fn for_len(n: usize, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            m: vec![vec![0.0; n]],
            v: vec![vec![0.0; n]],
        }
    }

    fn update(cfg: &AdamConfig, t: i32, lr: f64, values: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64]) {
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..values.len() {
            let g = grads.get(i).copied().unwrap_or(0.0);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            values[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }

    /// One step on a flat vector (state built with [`AdamState::for_len`]).
    pub fn step_flat(&mut self, values: &mut [f64], grads: &[f64], lr: f64) {
        self.step += 1;
        let t = self.step.min(i32::MAX as u64) as i32;
        Self::update(&self.cfg, t, lr, values, grads, &mut self.m[0], &mut self.v[0]);
    }
}

/// Standard bias-corrected Adam update using the gradients accumulated in `params`.
pub fn adam_step(params: &mut VUNetParams, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step.min(i32::MAX as u64) as i32;
    for ((p, m), v) in params.tensors_mut().into_iter().zip(&mut state.m).zip(&mut state.v) {
        AdamState::update(&state.cfg, t, lr, &mut p.values, &p.grad, m, v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_from_zero_state_is_a_no_op() {
        let mut s = AdamState::for_len(3, AdamConfig::default());
        let mut x = vec![1.0, -2.0, 3.0];
        s.step_flat(&mut x, &[0.0; 3], 1e-3);
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut s = AdamState::for_len(3, AdamConfig::default());
        let mut x = vec![0.0; 3];
        s.step_flat(&mut x, &[0.5, -3.0, 1e-3], 2e-4);
        for (xi, sign) in x.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((xi - sign * 2e-4).abs() < 2e-4 * 1e-4, "{xi}");
        }
    }

    #[test]
    fn matches_scalar_oracle_over_two_steps() {
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.01);
        let grads = [0.3, -0.7];
        let (mut th, mut m, mut v) = (1.5f64, 0.0f64, 0.0f64);
        for (t, g) in grads.iter().enumerate() {
            let t = t as i32 + 1;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            th -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        let mut s = AdamState::for_len(1, AdamConfig::default());
        let mut x = vec![1.5];
        for g in grads {
            s.step_flat(&mut x, &[g], lr);
        }
        assert!((x[0] - th).abs() < 1e-12);
        assert_eq!(s.step, 2);
    }
}
