//! Training objective: per-variable weighted, mask-aware mean squared error
//! plus a scaled KL divergence of the bottleneck to N(0, I).
//!
//! Prediction and target channels are laid out lead-time major,
//! variable minor: channel `t·4 + v` holds variable `v` at lead time `t`,
//! with variables ordered as in [`TargetVariable::ALL`].

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::model::{LatentDistribution, OutputGrads};
use crate::tensor::{Grid4D, Mask4D};

pub const NUM_TARGETS: usize = 4;
pub const LEAD_TIMES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetVariable {
    Temperature,
    CrrIntensity,
    AsiiTurbTropProb,
    Cma,
}

impl TargetVariable {
    /// Channel order of the variables within one lead time.
    pub const ALL: [TargetVariable; NUM_TARGETS] = [
        TargetVariable::Temperature,
        TargetVariable::CrrIntensity,
        TargetVariable::AsiiTurbTropProb,
        TargetVariable::Cma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TargetVariable::Temperature => "temperature",
            TargetVariable::CrrIntensity => "crr_intensity",
            TargetVariable::AsiiTurbTropProb => "asii_turb_trop_prob",
            TargetVariable::Cma => "cma",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&v| v == self).expect("listed")
    }
}

/// Per-variable weights `w_v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableWeights {
    pub temperature: f64,
    pub crr_intensity: f64,
    pub cma: f64,
    pub asii_turb_trop_prob: f64,
}

impl Default for VariableWeights {
    fn default() -> Self {
        Self {
            temperature: 31.610,
            crr_intensity: 4139.4,
            cma: 5.2191,
            asii_turb_trop_prob: 142.17,
        }
    }
}

impl VariableWeights {
    pub fn get(&self, v: TargetVariable) -> f64 {
        match v {
            TargetVariable::Temperature => self.temperature,
            TargetVariable::CrrIntensity => self.crr_intensity,
            TargetVariable::AsiiTurbTropProb => self.asii_turb_trop_prob,
            TargetVariable::Cma => self.cma,
        }
    }

    pub fn set(&mut self, v: TargetVariable, w: f64) {
        match v {
            TargetVariable::Temperature => self.temperature = w,
            TargetVariable::CrrIntensity => self.crr_intensity = w,
            TargetVariable::AsiiTurbTropProb => self.asii_turb_trop_prob = w,
            TargetVariable::Cma => self.cma = w,
        }
    }

    /// Weights in channel order.
    pub fn in_channel_order(&self) -> [f64; NUM_TARGETS] {
        TargetVariable::ALL.map(|v| self.get(v))
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channel_order().iter().all(|&w| w > 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(config_err!("variable weights must be finite and strictly positive: {self:?}"))
        }
    }
}

/// Which KL expression to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KlFormula {
    /// `½ Σ (μ² + σ² − log σ − 1)`.
    /// Not a true KL divergence: it can be negative.
    #[default]
    Paper,
    /// `½ Σ (μ² + σ² − 2 log σ − 1)`, the Gaussian KL to N(0, 1).
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub kl_weight: f64,
    pub weights: VariableWeights,
    pub kl_formula: KlFormula,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            kl_weight: 80.0,
            weights: VariableWeights::default(),
            kl_formula: KlFormula::Paper,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return Err(config_err!("kl_weight must be finite and non-negative"));
        }
        self.weights.validate()
    }
}

/// Value, diagnostics and gradient of the masked weighted L2 term for a
/// batch (averaged over samples).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedL2 {
    pub value: f64,
    pub per_variable: [f64; NUM_TARGETS],
    /// Valid-pixel counts `P_{t,v}` summed over the batch, one row per lead time.
    pub pixel_counts: Vec<[usize; NUM_TARGETS]>,
    /// Gradient with respect to the prediction.
    pub grad: Grid4D,
}

/// Every term of the objective for one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l2_total: f64,
    pub l2_per_variable: [f64; NUM_TARGETS],
    pub kl: f64,
    pub total: f64,
    pub pixel_counts: Vec<[usize; NUM_TARGETS]>,
}

fn lead_times_of(channels: usize) -> Result<usize> {
    if channels == 0 || channels % NUM_TARGETS != 0 {
        return Err(config_err!(
            "prediction channels ({channels}) must be a positive multiple of {NUM_TARGETS}"
        ));
    }
    Ok(channels / NUM_TARGETS)
}

/// Masked, weighted mean squared error:
/// `1/(T·4) Σ_t Σ_v (w_v / P_{t,v}) Σ_{valid p} (y − ŷ)²`, averaged over
/// the batch. Cells with `P_{t,v} = 0` contribute nothing.
pub fn masked_l2(pred: &Grid4D, target: &Grid4D, mask: &Mask4D, weights: &VariableWeights) -> Result<MaskedL2> {
    if pred.shape() != target.shape() || pred.shape() != mask.shape() {
        return Err(config_err!(
            "prediction {:?}, target {:?} and mask {:?} shapes differ",
            pred.shape(),
            target.shape(),
            mask.shape()
        ));
    }
    let [batch, channels, _, _] = pred.shape();
    let lead_times = lead_times_of(channels)?;
    if batch == 0 {
        return Err(config_err!("masked_l2 needs at least one sample"));
    }
    let w = weights.in_channel_order();
    let norm = 1.0 / (channels as f64 * batch as f64);
    let mut per_variable = [0.0; NUM_TARGETS];
    let mut pixel_counts = vec![[0usize; NUM_TARGETS]; lead_times];
    let mut grad = Grid4D::zeros(pred.shape());
    for n in 0..batch {
        for c in 0..channels {
            let (t, v) = (c / NUM_TARGETS, c % NUM_TARGETS);
            let valid = mask.plane(n, c);
            let count = valid.iter().filter(|&&b| b).count();
            pixel_counts[t][v] += count;
            if count == 0 {
                continue;
            }
            let scale = w[v] / count as f64 * norm;
            let (p, y) = (pred.plane(n, c), target.plane(n, c));
            let mut sse = 0.0;
            let g = grad.plane_mut(n, c);
            for i in 0..valid.len() {
                if valid[i] {
                    let d = p[i] - y[i];
                    sse += d * d;
                    g[i] = 2.0 * scale * d;
                }
            }
            per_variable[v] += scale * sse;
        }
    }
    Ok(MaskedL2 {
        value: per_variable.iter().sum(),
        per_variable,
        pixel_counts,
        grad,
    })
}

fn check_sigma(latent: &LatentDistribution) -> Result<()> {
    if latent.mu.len() != latent.sigma.len() || latent.latent_dim == 0 || latent.mu.len() % latent.latent_dim != 0 {
        return Err(config_err!("latent mu/sigma lengths are inconsistent"));
    }
    if let Some(s) = latent.sigma.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::Domain(format!("sigma must be strictly positive, found {s}")));
    }
    Ok(())
}

/// KL term summed over latent dimensions and averaged over the batch.
pub fn kl_divergence(latent: &LatentDistribution, formula: KlFormula) -> Result<f64> {
    check_sigma(latent)?;
    let log_factor = match formula {
        KlFormula::Paper => 1.0,
        KlFormula::Standard => 2.0,
    };
    let sum: f64 = latent
        .mu
        .iter()
        .zip(&latent.sigma)
        .map(|(m, s)| m * m + s * s - log_factor * s.ln() - 1.0)
        .sum();
    Ok(0.5 * sum / latent.batch() as f64)
}

/// Gradients of [`kl_divergence`] with respect to `mu` and `sigma`.
pub fn kl_gradient(latent: &LatentDistribution, formula: KlFormula) -> Result<(Vec<f64>, Vec<f64>)> {
    check_sigma(latent)?;
    let inv_batch = 1.0 / latent.batch() as f64;
    let half_log = match formula {
        KlFormula::Paper => 0.5,
        KlFormula::Standard => 1.0,
    };
    let dmu = latent.mu.iter().map(|m| m * inv_batch).collect();
    let dsigma = latent.sigma.iter().map(|s| (s - half_log / s) * inv_batch).collect();
    Ok((dmu, dsigma))
}

pub fn total_loss(l2: f64, kl: f64, cfg: &LossConfig) -> f64 {
    l2 + cfg.kl_weight * kl
}

/// Full objective and the gradients to feed the model's backward pass.
pub fn objective(
    pred: &Grid4D,
    target: &Grid4D,
    mask: &Mask4D,
    latent: &LatentDistribution,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, OutputGrads)> {
    let l2 = masked_l2(pred, target, mask, &cfg.weights)?;
    let kl = kl_divergence(latent, cfg.kl_formula)?;
    let (mut dmu, mut dsigma) = kl_gradient(latent, cfg.kl_formula)?;
    dmu.iter_mut().for_each(|g| *g *= cfg.kl_weight);
    dsigma.iter_mut().for_each(|g| *g *= cfg.kl_weight);
    let breakdown = LossBreakdown {
        l2_total: l2.value,
        l2_per_variable: l2.per_variable,
        kl,
        total: total_loss(l2.value, kl, cfg),
        pixel_counts: l2.pixel_counts,
    };
    Ok((
        breakdown,
        OutputGrads {
            prediction: l2.grad,
            mu: dmu,
            sigma: dsigma,
        },
    ))
}
