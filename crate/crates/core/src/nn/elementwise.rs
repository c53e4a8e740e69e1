use crate::error::{config_err, Result};
use crate::rng::RngStream;
use crate::tensor::Grid4D;

/// Exponential linear unit: `x` for `x > 0`, `alpha·(exp(x) − 1)` otherwise.
pub fn elu(x: &Grid4D, alpha: f64) -> Grid4D {
    x.map(|v| if v > 0.0 { v } else { alpha * v.exp_m1() })
}

/// Backward pass of [`elu`] expressed through its output `y`.
pub fn elu_backward(y: &Grid4D, dy: &Grid4D, alpha: f64) -> Grid4D {
    let data = y
        .as_slice()
        .iter()
        .zip(dy.as_slice())
        .map(|(&out, &g)| if out > 0.0 { g } else { g * (out + alpha) })
        .collect();
    Grid4D::from_vec(y.shape(), data).expect("shape preserved")
}

/// Per-(sample, channel) multipliers chosen by [`dropout2d`].
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub scales: Vec<f64>,
}

/// Channel dropout. In training mode each (sample, channel) plane is zeroed
/// with probability `rate` and survivors scaled by `1 / (1 − rate)`.
pub fn dropout2d(
    x: &Grid4D,
    rate: f64,
    training: bool,
    rng: &mut RngStream,
) -> Result<(Grid4D, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(config_err!("dropout rate must lie in [0, 1), got {rate}"));
    }
    let planes = x.batch() * x.channels();
    if !training || rate == 0.0 {
        return Ok((
            x.clone(),
            DropoutMask {
                scales: vec![1.0; planes],
            },
        ));
    }
    let keep = 1.0 / (1.0 - rate);
    let scales: Vec<f64> = (0..planes)
        .map(|_| if rng.uniform() < rate { 0.0 } else { keep })
        .collect();
    Ok((apply_channel_scales(x, &scales), DropoutMask { scales }))
}

pub fn dropout2d_backward(dy: &Grid4D, mask: &DropoutMask) -> Grid4D {
    apply_channel_scales(dy, &mask.scales)
}

fn apply_channel_scales(x: &Grid4D, scales: &[f64]) -> Grid4D {
    let mut out = x.clone();
    let plane = x.plane_len();
    for (chunk, &s) in out.as_mut_slice().chunks_mut(plane).zip(scales) {
        if s != 1.0 {
            chunk.iter_mut().for_each(|v| *v *= s);
        }
    }
    out
}
