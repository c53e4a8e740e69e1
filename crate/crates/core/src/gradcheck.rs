//! Central finite-difference gradient checks.

use serde::Serialize;

use crate::error::Result;
use crate::losses::{kl_divergence, kl_gradient, masked_l2, objective, KlFormula, LossConfig, VariableWeights};
use crate::model::{reparameterize_with_noise, ForwardOptions, LatentDistribution, LatentMode, ModelConfig, VariationalUNet};
use crate::nn::{
    conv2d, conv2d_backward, dense_batch, dense_batch_backward, dropout2d, dropout2d_backward, elu, elu_backward,
    group_norm, group_norm_backward, max_pool2d, max_pool2d_backward, transposed_conv2d, transposed_conv2d_backward,
    ConvGeometry, GROUP_NORM_EPS,
};
use crate::rng::RngStream;
use crate::tensor::{Grid4D, Mask4D, ParamTensor};

/// Largest relative disagreement between `analytic` and the central
/// difference of `f` around `x`:
/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], eps: f64) -> f64 {
    assert_eq!(x.len(), analytic.len(), "gradient length must match inputs");
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        worst = worst.max(relative_error(analytic[i], central_difference(&mut f, &mut probe, i, eps)));
    }
    worst
}

/// Like [`grad_check`] but only probes the given coordinates.
pub fn grad_check_indices(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    indices: &[usize],
    eps: f64,
) -> f64 {
    let mut probe = x.to_vec();
    indices.iter().fold(0.0, |worst: f64, &i| {
        worst.max(relative_error(analytic[i], central_difference(&mut f, &mut probe, i, eps)))
    })
}

fn central_difference(f: &mut impl FnMut(&[f64]) -> f64, probe: &mut [f64], i: usize, eps: f64) -> f64 {
    let orig = probe[i];
    probe[i] = orig + eps;
    let plus = f(probe);
    probe[i] = orig - eps;
    let minus = f(probe);
    probe[i] = orig;
    (plus - minus) / (2.0 * eps)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Random upstream gradient; contracting an output with it turns any layer
/// into a scalar function for checking.
pub fn random_probe(shape: [usize; 4], rng: &mut RngStream) -> Grid4D {
    Grid4D::random_normal(shape, rng)
}

/// Tolerance for single layers and loss terms.
pub const PRIMITIVE_TOLERANCE: f64 = 1e-5;
/// Tolerance for the whole model on [`ModelConfig::tiny`].
pub const END_TO_END_TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-5;

/// Outcome of one check of the suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub probes: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }
}

/// Checks a layer `y = f(x; params)` through the scalar `<probe, y>` over
/// every input and parameter coordinate.
fn check_layer(
    name: &str,
    x: &Grid4D,
    params: Vec<ParamTensor>,
    forward: impl Fn(&Grid4D, &[ParamTensor]) -> Result<Grid4D>,
    backward: impl Fn(&Grid4D, &mut [ParamTensor], &Grid4D) -> Result<Grid4D>,
    rng: &mut RngStream,
) -> Result<CheckResult> {
    let y = forward(x, &params)?;
    let probe = random_probe(y.shape(), rng);
    let mut grads = params.clone();
    grads.iter_mut().for_each(|p| p.zero_grad());
    let dx = backward(x, &mut grads, &probe)?;

    let mut worst = relative_error(0.0, 0.0);
    let mut probes = 0;
    let err = grad_check(
        |v| {
            let xv = Grid4D::from_vec(x.shape(), v.to_vec()).expect("same shape");
            forward(&xv, &params).expect("forward").dot(&probe)
        },
        x.as_slice(),
        dx.as_slice(),
        STEP,
    );
    worst = worst.max(err);
    probes += x.len();
    for (k, g) in grads.iter().enumerate() {
        let err = grad_check(
            |v| {
                let mut ps = params.clone();
                ps[k].values.copy_from_slice(v);
                forward(x, &ps).expect("forward").dot(&probe)
            },
            &params[k].values,
            &g.grad,
            STEP,
        );
        worst = worst.max(err);
        probes += g.len();
    }
    Ok(CheckResult {
        name: name.to_string(),
        probes,
        max_relative_error: worst,
        tolerance: PRIMITIVE_TOLERANCE,
    })
}

fn random_param(shape: &[usize], rng: &mut RngStream) -> ParamTensor {
    let n = shape.iter().product();
    ParamTensor::from_values(shape, (0..n).map(|_| rng.normal()).collect()).expect("shape matches")
}

fn primitives(rng: &mut RngStream) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    for (name, geom, k) in [("conv2d 3x3", ConvGeometry::new(1, 1), 3), ("conv2d 2x2 stride 2", ConvGeometry::new(2, 0), 2)] {
        let x = Grid4D::random_normal([2, 3, 6, 6], rng);
        let params = vec![random_param(&[4, 3, k, k], rng), random_param(&[4], rng)];
        out.push(check_layer(
            name,
            &x,
            params,
            |x, p| conv2d(x, &p[0], &p[1], geom),
            |x, p, dy| {
                let (w, b) = p.split_at_mut(1);
                conv2d_backward(x, &mut w[0], &mut b[0], dy, geom)
            },
            rng,
        )?);
    }

    let up = ConvGeometry::new(2, 0);
    let x = Grid4D::random_normal([2, 3, 3, 3], rng);
    let params = vec![random_param(&[3, 2, 2, 2], rng), random_param(&[2], rng)];
    out.push(check_layer(
        "transposed conv2d 2x2 stride 2",
        &x,
        params,
        |x, p| transposed_conv2d(x, &p[0], &p[1], up),
        |x, p, dy| {
            let (w, b) = p.split_at_mut(1);
            transposed_conv2d_backward(x, &mut w[0], &mut b[0], dy, up)
        },
        rng,
    )?);

    // keep inputs away from the kink at 0
    let x = Grid4D::random_normal([2, 3, 4, 4], rng).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    out.push(check_layer(
        "elu",
        &x,
        Vec::new(),
        |x, _| Ok(elu(x, 1.0)),
        |x, _, dy| Ok(elu_backward(&elu(x, 1.0), dy, 1.0)),
        rng,
    )?);

    let x = Grid4D::random_normal([2, 4, 3, 3], rng);
    let params = vec![random_param(&[4], rng), random_param(&[4], rng)];
    out.push(check_layer(
        "group norm",
        &x,
        params,
        |x, p| group_norm(x, 2, &p[0], &p[1], GROUP_NORM_EPS).map(|(y, _)| y),
        |x, p, dy| {
            let (g, b) = p.split_at_mut(1);
            let (_, cache) = group_norm(x, 2, &g[0], &b[0], GROUP_NORM_EPS)?;
            Ok(group_norm_backward(&cache, &mut g[0], &mut b[0], dy))
        },
        rng,
    )?);

    let x = Grid4D::random_normal([2, 4, 3, 3], rng);
    let seed = rng.next_u64();
    out.push(check_layer(
        "dropout2d",
        &x,
        Vec::new(),
        |x, _| dropout2d(x, 0.5, true, &mut RngStream::new(seed)).map(|(y, _)| y),
        |x, _, dy| {
            let (_, mask) = dropout2d(x, 0.5, true, &mut RngStream::new(seed))?;
            Ok(dropout2d_backward(dy, &mask))
        },
        rng,
    )?);

    let x = Grid4D::random_normal([2, 2, 4, 4], rng);
    out.push(check_layer(
        "max pool 2x2",
        &x,
        Vec::new(),
        |x, _| max_pool2d(x, 2).map(|(y, _)| y),
        |x, _, dy| {
            let (_, argmax) = max_pool2d(x, 2)?;
            Ok(max_pool2d_backward(x.shape(), &argmax, dy))
        },
        rng,
    )?);

    let x = Grid4D::random_normal([2, 6, 1, 1], rng);
    let params = vec![random_param(&[5, 6], rng), random_param(&[5], rng)];
    out.push(check_layer(
        "dense",
        &x,
        params,
        |x, p| Grid4D::from_vec([2, 5, 1, 1], dense_batch(x.as_slice(), 2, &p[0], &p[1])?),
        |x, p, dy| {
            let (w, b) = p.split_at_mut(1);
            let dx = dense_batch_backward(x.as_slice(), 2, &mut w[0], &mut b[0], dy.as_slice())?;
            Grid4D::from_vec(x.shape(), dx)
        },
        rng,
    )?);

    out.extend(loss_terms(rng)?);
    Ok(out)
}

fn scalar_check(name: &str, f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], step: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        probes: x.len(),
        max_relative_error: grad_check(f, x, analytic, step),
        tolerance: PRIMITIVE_TOLERANCE,
    }
}

fn latent_from(v: &[f64], dim: usize) -> LatentDistribution {
    let half = v.len() / 2;
    LatentDistribution {
        latent_dim: dim,
        mu: v[..half].to_vec(),
        sigma: v[half..].to_vec(),
    }
}

fn loss_terms(rng: &mut RngStream) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let dim = 6;
    let mu: Vec<f64> = (0..2 * dim).map(|_| rng.normal()).collect();
    let sigma: Vec<f64> = (0..2 * dim).map(|_| 0.3 + rng.uniform()).collect();
    let packed: Vec<f64> = mu.iter().chain(&sigma).copied().collect();

    // z = mu + sigma * eps with eps fixed by the seed
    let seed = rng.next_u64();
    let probe: Vec<f64> = (0..2 * dim).map(|_| rng.normal()).collect();
    let (_, noise) = reparameterize_with_noise(&latent_from(&packed, dim), LatentMode::Sample, &mut RngStream::new(seed));
    let analytic: Vec<f64> = probe.iter().copied().chain(probe.iter().zip(&noise).map(|(p, e)| p * e)).collect();
    out.push(scalar_check(
        "reparameterization",
        |v| {
            let (z, _) = reparameterize_with_noise(&latent_from(v, dim), LatentMode::Sample, &mut RngStream::new(seed));
            z.iter().zip(&probe).map(|(a, b)| a * b).sum()
        },
        &packed,
        &analytic,
        STEP,
    ));

    for (name, formula) in [("kl (paper form)", KlFormula::Paper), ("kl (standard form)", KlFormula::Standard)] {
        let (dmu, dsigma) = kl_gradient(&latent_from(&packed, dim), formula)?;
        let analytic: Vec<f64> = dmu.into_iter().chain(dsigma).collect();
        out.push(scalar_check(
            name,
            |v| kl_divergence(&latent_from(v, dim), formula).expect("positive sigma"),
            &packed,
            &analytic,
            STEP,
        ));
    }

    let shape = [2, 8, 3, 3];
    let pred = Grid4D::random_normal(shape, rng);
    let target = Grid4D::random_normal(shape, rng);
    let mask = Mask4D::from_vec(shape, (0..pred.len()).map(|_| rng.uniform() < 0.7).collect())?;
    let weights = VariableWeights::default();
    let grad = masked_l2(&pred, &target, &mask, &weights)?.grad;
    out.push(scalar_check(
        "masked l2",
        |v| {
            let p = Grid4D::from_vec(shape, v.to_vec()).expect("shape");
            masked_l2(&p, &target, &mask, &weights).expect("valid").value
        },
        pred.as_slice(),
        grad.as_slice(),
        // central differences are exact on a quadratic; a wide step keeps
        // the large class weights from amplifying rounding
        1e-2,
    ));
    Ok(out)
}

fn tiny_objective(model: &VariationalUNet, x: &Grid4D, target: &Grid4D, mask: &Mask4D, seed: u64) -> f64 {
    let (y, latent, _) = model
        .forward_with_cache(x, ForwardOptions::TRAIN, &mut RngStream::new(seed))
        .expect("forward");
    objective(&y, target, mask, &latent, &LossConfig::default()).expect("objective").0.total
}

/// Whole-model check on the tiny configuration: sampled latent, full
/// objective, a random set of parameter coordinates plus at least one from
/// every tensor, and input coordinates.
pub fn end_to_end(rng: &mut RngStream, params_per_tensor: usize) -> Result<CheckResult> {
    let cfg = ModelConfig::tiny();
    let mut model = VariationalUNet::new(cfg.clone(), rng)?;
    let s = cfg.input_size;
    let x = Grid4D::random_normal([2, cfg.in_channels, s, s], rng);
    let target = Grid4D::random_normal([2, cfg.out_channels, s, s], rng).map(|v| 0.5 + 0.1 * v);
    let mask = Mask4D::from_vec(target.shape(), (0..target.len()).map(|_| rng.uniform() < 0.8).collect())?;
    let seed = rng.next_u64();

    let (y, latent, cache) = model.forward_with_cache(&x, ForwardOptions::TRAIN, &mut RngStream::new(seed))?;
    let (_, grads) = objective(&y, &target, &mask, &latent, &LossConfig::default())?;
    model.zero_grad();
    let dx = model.backward(&cache, &latent, &grads)?;
    let analytic = model.params.flat_grad();

    let mut picks = Vec::new();
    let mut offset = 0;
    for (_, p) in model.params.named() {
        for _ in 0..params_per_tensor.min(p.len()) {
            picks.push(offset + rng.below(p.len()));
        }
        offset += p.len();
    }
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for &i in &picks {
        let orig = model.params.flat_value(i);
        probe.params.set_flat_value(i, orig + STEP);
        let up = tiny_objective(&probe, &x, &target, &mask, seed);
        probe.params.set_flat_value(i, orig - STEP);
        let down = tiny_objective(&probe, &x, &target, &mask, seed);
        probe.params.set_flat_value(i, orig);
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * STEP)));
    }
    let inputs: Vec<usize> = (0..16).map(|_| rng.below(x.len())).collect();
    worst = worst.max(grad_check_indices(
        |v| {
            let xv = Grid4D::from_vec(x.shape(), v.to_vec()).expect("shape");
            tiny_objective(&model, &xv, &target, &mask, seed)
        },
        x.as_slice(),
        dx.as_slice(),
        &inputs,
        STEP,
    ));
    Ok(CheckResult {
        name: "variational u-net (tiny, end to end)".into(),
        probes: picks.len() + inputs.len(),
        max_relative_error: worst,
        tolerance: END_TO_END_TOLERANCE,
    })
}

/// Every primitive followed by the end-to-end check, deterministic in `seed`.
pub fn suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = RngStream::new(seed);
    let mut out = primitives(&mut rng)?;
    out.push(end_to_end(&mut rng, 3)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_checked_exactly() {
        let x = [1.0, -2.0, 0.5];
        let grad: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let err = grad_check(|v| v.iter().map(|a| a * a).sum(), &x, &grad, 1e-4);
        assert!(err < 1e-9);
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let x = [1.0, 2.0];
        let err = grad_check(|v| v[0] * v[1], &x, &[2.0, 2.0], 1e-4);
        assert!(err > 0.4);
    }
}
