use crate::error::{config_err, Result};
use crate::tensor::{Grid4D, ParamTensor};

pub const GROUP_NORM_EPS: f64 = 1e-5;

/// Saved statistics for the group-norm backward pass.
#[derive(Debug, Clone)]
pub struct GroupNormCache {
    /// Pre-affine normalized activations.
    pub normalized: Grid4D,
    /// `1 / sqrt(var + eps)` per (sample, group).
    pub inv_std: Vec<f64>,
    pub groups: usize,
}

fn check(x: &Grid4D, groups: usize, gamma: &ParamTensor, beta: &ParamTensor) -> Result<()> {
    let c = x.channels();
    if groups == 0 || c % groups != 0 {
        return Err(config_err!(
            "group norm needs channels ({c}) divisible by groups ({groups})"
        ));
    }
    if gamma.len() != c || beta.len() != c {
        return Err(config_err!(
            "group norm affine parameters have lengths {}/{} but input has {c} channels",
            gamma.len(),
            beta.len()
        ));
    }
    Ok(())
}

/// Normalizes each (sample, group) to zero mean and unit variance, then
/// applies the per-channel affine map.
pub fn group_norm(
    x: &Grid4D,
    groups: usize,
    gamma: &ParamTensor,
    beta: &ParamTensor,
    eps: f64,
) -> Result<(Grid4D, GroupNormCache)> {
    check(x, groups, gamma, beta)?;
    let [n, c, _, _] = x.shape();
    let group_len = (c / groups) * x.plane_len();
    let plane = x.plane_len();
    let mut normalized = x.clone();
    let mut inv_std = Vec::with_capacity(n * groups);
    for chunk in normalized.as_mut_slice().chunks_mut(group_len) {
        let m = chunk.len() as f64;
        let mean = chunk.iter().sum::<f64>() / m;
        let var = chunk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        let s = 1.0 / (var + eps).sqrt();
        chunk.iter_mut().for_each(|v| *v = (*v - mean) * s);
        inv_std.push(s);
    }
    let mut y = normalized.clone();
    for (i, chunk) in y.as_mut_slice().chunks_mut(plane).enumerate() {
        let ch = i % c;
        let (g, b) = (gamma.values[ch], beta.values[ch]);
        chunk.iter_mut().for_each(|v| *v = *v * g + b);
    }
    Ok((
        y,
        GroupNormCache {
            normalized,
            inv_std,
            groups,
        },
    ))
}

pub fn group_norm_backward(
    cache: &GroupNormCache,
    gamma: &mut ParamTensor,
    beta: &mut ParamTensor,
    dy: &Grid4D,
) -> Grid4D {
    gamma.ensure_grad();
    beta.ensure_grad();
    let xhat = &cache.normalized;
    let [_, c, _, _] = xhat.shape();
    let plane = xhat.plane_len();
    let group_len = (c / cache.groups) * plane;

    let mut dxhat = dy.clone();
    for (i, (dchunk, (xchunk, ychunk))) in dxhat
        .as_mut_slice()
        .chunks_mut(plane)
        .zip(xhat.as_slice().chunks(plane).zip(dy.as_slice().chunks(plane)))
        .enumerate()
    {
        let ch = i % c;
        gamma.grad[ch] += xchunk.iter().zip(ychunk).map(|(a, b)| a * b).sum::<f64>();
        beta.grad[ch] += ychunk.iter().sum::<f64>();
        let g = gamma.values[ch];
        dchunk.iter_mut().for_each(|v| *v *= g);
    }

    let mut dx = dxhat;
    for ((dchunk, xchunk), &s) in dx
        .as_mut_slice()
        .chunks_mut(group_len)
        .zip(xhat.as_slice().chunks(group_len))
        .zip(&cache.inv_std)
    {
        let m = dchunk.len() as f64;
        let sum_d = dchunk.iter().sum::<f64>();
        let sum_dx = dchunk.iter().zip(xchunk).map(|(d, x)| d * x).sum::<f64>();
        for (d, &xh) in dchunk.iter_mut().zip(xchunk) {
            *d = s / m * (m * *d - sum_d - xh * sum_dx);
        }
    }
    dx
}
