//! Forward and backward passes of the Variational U-Net.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::model::config::ModelConfig;
use crate::model::params::{
    DecoderStageParams, DenseBlockParams, VUNetParams, DENSE_BLOCK_REPEATS, UPSAMPLE_KERNEL,
};
use crate::nn::{self, ConvGeometry, DropoutMask, GroupNormCache, GROUP_NORM_EPS};
use crate::rng::RngStream;
use crate::tensor::{Grid4D, ParamTensor};

pub const LOG_SIGMA_MIN: f64 = -30.0;
pub const LOG_SIGMA_MAX: f64 = 10.0;

/// How the latent vector is obtained from the bottleneck distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentMode {
    /// `z = mu + sigma ⊙ ε`, `ε ~ N(0, I)`.
    Sample,
    /// `z = mu`.
    #[default]
    Mean,
}

/// Layer kinds, used to introspect block structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Elu,
    GroupNorm,
    Dropout,
    MaxPool,
    TransposedConv,
    Concat,
}

/// Gaussian bottleneck for a batch: row `b` of `mu`/`sigma` (each
/// `latent_dim` long) belongs to sample `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDistribution {
    pub latent_dim: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl LatentDistribution {
    pub fn batch(&self) -> usize {
        self.mu.len() / self.latent_dim
    }

    pub fn sample_mu(&self, b: usize) -> &[f64] {
        &self.mu[b * self.latent_dim..(b + 1) * self.latent_dim]
    }

    pub fn sample_sigma(&self, b: usize) -> &[f64] {
        &self.sigma[b * self.latent_dim..(b + 1) * self.latent_dim]
    }
}

/// Draws `z` and returns it with the noise used (zero in mean mode).
pub fn reparameterize_with_noise(
    latent: &LatentDistribution,
    mode: LatentMode,
    rng: &mut RngStream,
) -> (Vec<f64>, Vec<f64>) {
    match mode {
        LatentMode::Mean => (latent.mu.clone(), vec![0.0; latent.mu.len()]),
        LatentMode::Sample => {
            let noise: Vec<f64> = (0..latent.mu.len()).map(|_| rng.normal()).collect();
            let z = latent
                .mu
                .iter()
                .zip(&latent.sigma)
                .zip(&noise)
                .map(|((m, s), e)| m + s * e)
                .collect();
            (z, noise)
        }
    }
}

pub fn reparameterize(latent: &LatentDistribution, mode: LatentMode, rng: &mut RngStream) -> Vec<f64> {
    reparameterize_with_noise(latent, mode, rng).0
}

/// Per-step switches of a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardOptions {
    pub mode: LatentMode,
    /// Enables dropout.
    pub training: bool,
}

impl ForwardOptions {
    pub const TRAIN: Self = Self {
        mode: LatentMode::Sample,
        training: true,
    };

    pub fn inference(mode: LatentMode) -> Self {
        Self { mode, training: false }
    }
}

#[derive(Debug, Clone)]
struct RepeatCache {
    conv_in: Grid4D,
    elu_out: Grid4D,
    norm: GroupNormCache,
    drop: DropoutMask,
}

#[derive(Debug, Clone)]
struct DenseBlockCache {
    repeats: Vec<RepeatCache>,
    final_in: Grid4D,
    final_out: Grid4D,
}

#[derive(Debug, Clone)]
struct EncoderLevelCache {
    block: DenseBlockCache,
    argmax: Vec<usize>,
}

#[derive(Debug, Clone)]
struct BottleneckCache {
    pooled_shape: [usize; 4],
    features: Vec<f64>,
    log_sigma_raw: Vec<f64>,
    noise: Vec<f64>,
    z: Vec<f64>,
}

#[derive(Debug, Clone)]
struct DecoderStageCache {
    up_in: Grid4D,
    up_out: Grid4D,
    fused_in: Grid4D,
    fused_out: Grid4D,
    norm: GroupNormCache,
    drop: DropoutMask,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    encoder: Vec<EncoderLevelCache>,
    bottleneck: BottleneckCache,
    /// Indexed by level.
    decoder: Vec<Option<DecoderStageCache>>,
    head_in: Grid4D,
}

impl ForwardCache {
    /// Noise drawn by the reparameterization (zeros in mean mode).
    pub fn noise(&self) -> &[f64] {
        &self.bottleneck.noise
    }

    pub fn z(&self) -> &[f64] {
        &self.bottleneck.z
    }
}

/// Gradients the loss supplies to [`VariationalUNet::backward`].
#[derive(Debug, Clone)]
pub struct OutputGrads {
    pub prediction: Grid4D,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// The Variational U-Net with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalUNet {
    pub cfg: ModelConfig,
    pub params: VUNetParams,
}

fn same_conv(cfg: &ModelConfig) -> ConvGeometry {
    ConvGeometry::new(1, cfg.conv_kernel / 2)
}

const UPSAMPLE: ConvGeometry = ConvGeometry::new(UPSAMPLE_KERNEL, 0);
const POINTWISE: ConvGeometry = ConvGeometry::new(1, 0);

/// Layer order of a dense block.
pub fn dense_block_layers() -> Vec<LayerKind> {
    let mut seq = Vec::new();
    for _ in 0..DENSE_BLOCK_REPEATS {
        seq.extend([LayerKind::Conv, LayerKind::Elu, LayerKind::GroupNorm, LayerKind::Dropout]);
    }
    seq.extend([LayerKind::Conv, LayerKind::Elu]);
    seq
}

/// Layer order of one decoder stage.
pub fn decoder_stage_layers() -> Vec<LayerKind> {
    vec![
        LayerKind::TransposedConv,
        LayerKind::Elu,
        LayerKind::Concat,
        LayerKind::Conv,
        LayerKind::Elu,
        LayerKind::GroupNorm,
        LayerKind::Dropout,
    ]
}

fn dense_block_forward(
    x: &Grid4D,
    p: &DenseBlockParams,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut RngStream,
) -> Result<(Grid4D, DenseBlockCache)> {
    let geom = same_conv(cfg);
    let mut h = x.clone();
    let mut repeats = Vec::with_capacity(DENSE_BLOCK_REPEATS);
    for (conv, norm) in p.convs.iter().zip(&p.norms) {
        let c = nn::conv2d(&h, &conv.weight, &conv.bias, geom)?;
        let e = nn::elu(&c, cfg.elu_alpha);
        let (g, norm_cache) = nn::group_norm(&e, cfg.groups, &norm.gamma, &norm.beta, GROUP_NORM_EPS)?;
        let (d, drop) = nn::dropout2d(&g, cfg.dropout_rate, training, rng)?;
        repeats.push(RepeatCache {
            conv_in: h,
            elu_out: e,
            norm: norm_cache,
            drop,
        });
        h = d;
    }
    let last = &p.convs[DENSE_BLOCK_REPEATS];
    let out = nn::elu(&nn::conv2d(&h, &last.weight, &last.bias, geom)?, cfg.elu_alpha);
    Ok((
        out.clone(),
        DenseBlockCache {
            repeats,
            final_in: h,
            final_out: out,
        },
    ))
}

/// One encoder dense block (see [`dense_block_layers`] for its layers).
pub fn dense_block(
    x: &Grid4D,
    params: &DenseBlockParams,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut RngStream,
) -> Result<Grid4D> {
    let expected = params.convs[0].weight.shape[1];
    if x.channels() != expected {
        return Err(config_err!(
            "dense block expects {expected} input channels, got {}",
            x.channels()
        ));
    }
    Ok(dense_block_forward(x, params, cfg, training, rng)?.0)
}

fn dense_block_backward(
    cache: &DenseBlockCache,
    p: &mut DenseBlockParams,
    cfg: &ModelConfig,
    dy: &Grid4D,
) -> Result<Grid4D> {
    let geom = same_conv(cfg);
    let alpha = cfg.elu_alpha;
    let dc = nn::elu_backward(&cache.final_out, dy, alpha);
    let last = &mut p.convs[DENSE_BLOCK_REPEATS];
    let mut dh = nn::conv2d_backward(&cache.final_in, &mut last.weight, &mut last.bias, &dc, geom)?;
    for (i, rc) in cache.repeats.iter().enumerate().rev() {
        let dg = nn::dropout2d_backward(&dh, &rc.drop);
        let norm = &mut p.norms[i];
        let de = nn::group_norm_backward(&rc.norm, &mut norm.gamma, &mut norm.beta, &dg);
        let dc = nn::elu_backward(&rc.elu_out, &de, alpha);
        let conv = &mut p.convs[i];
        dh = nn::conv2d_backward(&rc.conv_in, &mut conv.weight, &mut conv.bias, &dc, geom)?;
    }
    Ok(dh)
}

fn decoder_stage_forward(
    h: &Grid4D,
    skip: &Grid4D,
    p: &DecoderStageParams,
    cfg: &ModelConfig,
    training: bool,
    rng: &mut RngStream,
) -> Result<(Grid4D, DecoderStageCache)> {
    let up = nn::elu(&nn::transposed_conv2d(h, &p.up.weight, &p.up.bias, UPSAMPLE)?, cfg.elu_alpha);
    if up.shape() != skip.shape() {
        return Err(config_err!(
            "skip connection shape {:?} does not match up-sampled decoder map {:?}",
            skip.shape(),
            up.shape()
        ));
    }
    let fused_in = Grid4D::concat_channels(&up, skip)?;
    let fused_out = nn::elu(
        &nn::conv2d(&fused_in, &p.conv.weight, &p.conv.bias, same_conv(cfg))?,
        cfg.elu_alpha,
    );
    let (g, norm) = nn::group_norm(&fused_out, cfg.groups, &p.norm.gamma, &p.norm.beta, GROUP_NORM_EPS)?;
    let (out, drop) = nn::dropout2d(&g, cfg.dropout_rate, training, rng)?;
    Ok((
        out,
        DecoderStageCache {
            up_in: h.clone(),
            up_out: up,
            fused_in,
            fused_out,
            norm,
            drop,
        },
    ))
}

/// Returns gradients for the stage input and for the skip.
fn decoder_stage_backward(
    cache: &DecoderStageCache,
    p: &mut DecoderStageParams,
    cfg: &ModelConfig,
    dy: &Grid4D,
) -> Result<(Grid4D, Grid4D)> {
    let alpha = cfg.elu_alpha;
    let dg = nn::dropout2d_backward(dy, &cache.drop);
    let dfo = nn::group_norm_backward(&cache.norm, &mut p.norm.gamma, &mut p.norm.beta, &dg);
    let dfc = nn::elu_backward(&cache.fused_out, &dfo, alpha);
    let dfused = nn::conv2d_backward(&cache.fused_in, &mut p.conv.weight, &mut p.conv.bias, &dfc, same_conv(cfg))?;
    let (dup, dskip) = dfused.split_channels(cache.up_out.channels());
    let dupc = nn::elu_backward(&cache.up_out, &dup, alpha);
    let dh = nn::transposed_conv2d_backward(&cache.up_in, &mut p.up.weight, &mut p.up.bias, &dupc, UPSAMPLE)?;
    Ok((dh, dskip))
}

fn check_shape(t: &ParamTensor, want: &[usize], name: &str) -> Result<()> {
    if t.shape != want {
        return Err(config_err!("parameter {name} has shape {:?}, expected {:?}", t.shape, want));
    }
    Ok(())
}

impl VariationalUNet {
    pub fn new(cfg: ModelConfig, rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        let params = VUNetParams::init(&cfg, rng);
        Ok(Self { cfg, params })
    }

    /// Wraps existing parameters after checking every shape against `cfg`.
    pub fn from_params(cfg: ModelConfig, params: VUNetParams) -> Result<Self> {
        cfg.validate()?;
        let reference = VUNetParams::init(&cfg, &mut RngStream::new(0));
        let want = reference.named();
        let got = params.named();
        if want.len() != got.len() {
            return Err(config_err!(
                "parameter set has {} tensors, config implies {}",
                got.len(),
                want.len()
            ));
        }
        for ((name, w), (_, g)) in want.iter().zip(&got) {
            check_shape(g, &w.shape, name)?;
        }
        Ok(Self { cfg, params })
    }

    fn check_input(&self, x: &Grid4D) -> Result<()> {
        let s = self.cfg.input_size;
        if x.shape()[1..] != [self.cfg.in_channels, s, s] {
            return Err(config_err!(
                "model expects input (batch, {}, {s}, {s}), got {:?}",
                self.cfg.in_channels,
                x.shape()
            ));
        }
        if x.batch() == 0 {
            return Err(config_err!("input batch is empty"));
        }
        Ok(())
    }

    fn encode_cached(
        &self,
        x: &Grid4D,
        training: bool,
        rng: &mut RngStream,
    ) -> Result<(Vec<Grid4D>, Grid4D, Vec<EncoderLevelCache>)> {
        self.check_input(x)?;
        let mut h = x.clone();
        let mut skips = Vec::with_capacity(self.cfg.levels);
        let mut caches = Vec::with_capacity(self.cfg.levels);
        for block in &self.params.encoder {
            let (out, block_cache) = dense_block_forward(&h, block, &self.cfg, training, rng)?;
            let (pooled, argmax) = nn::max_pool2d(&out, 2)?;
            skips.push(out);
            caches.push(EncoderLevelCache {
                block: block_cache,
                argmax,
            });
            h = pooled;
        }
        Ok((skips, h, caches))
    }

    fn heads(&self, pooled: &Grid4D) -> Result<(LatentDistribution, Vec<f64>)> {
        let batch = pooled.batch();
        let features = pooled.as_slice();
        let mu = nn::dense_batch(features, batch, &self.params.mu_head.weight, &self.params.mu_head.bias)?;
        let raw = nn::dense_batch(
            features,
            batch,
            &self.params.log_sigma_head.weight,
            &self.params.log_sigma_head.bias,
        )?;
        let sigma = raw.iter().map(|v| v.clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX).exp()).collect();
        Ok((
            LatentDistribution {
                latent_dim: self.cfg.latent_dim,
                mu,
                sigma,
            },
            raw,
        ))
    }

    /// Encoder path: returns the pre-pool activation of every level
    /// (shallowest first) and the bottleneck distribution.
    pub fn encode(
        &self,
        x: &Grid4D,
        training: bool,
        rng: &mut RngStream,
    ) -> Result<(Vec<Grid4D>, LatentDistribution)> {
        let (skips, pooled, _) = self.encode_cached(x, training, rng)?;
        let (latent, _) = self.heads(&pooled)?;
        Ok((skips, latent))
    }

    /// Projects latent vectors (`batch · latent_dim` values) to the
    /// decoder's starting feature map.
    pub fn reconstruct_latent(&self, z: &[f64], batch: usize) -> Result<Grid4D> {
        if z.len() != batch * self.cfg.latent_dim {
            return Err(config_err!(
                "latent has {} values, expected {batch} x {}",
                z.len(),
                self.cfg.latent_dim
            ));
        }
        let proj = &self.params.latent_projection;
        let flat = nn::dense_batch(z, batch, &proj.weight, &proj.bias)?;
        let s = self.cfg.bottleneck_size();
        Grid4D::from_vec([batch, self.cfg.deepest_width(), s, s], flat)
    }

    fn decode_cached(
        &self,
        start: &Grid4D,
        skips: &[Grid4D],
        training: bool,
        rng: &mut RngStream,
    ) -> Result<(Grid4D, Vec<Option<DecoderStageCache>>, Grid4D)> {
        if skips.len() != self.cfg.levels {
            return Err(config_err!(
                "decoder needs {} skip maps, got {}",
                self.cfg.levels,
                skips.len()
            ));
        }
        let mut caches: Vec<Option<DecoderStageCache>> = vec![None; self.cfg.levels];
        let mut h = start.clone();
        for level in (0..self.cfg.levels).rev() {
            let (out, cache) =
                decoder_stage_forward(&h, &skips[level], &self.params.decoder[level], &self.cfg, training, rng)?;
            caches[level] = Some(cache);
            h = out;
        }
        let y = nn::conv2d(&h, &self.params.head.weight, &self.params.head.bias, POINTWISE)?;
        Ok((y, caches, h))
    }

    /// Decoder path from the reconstructed latent map back to full size.
    pub fn decode(&self, start: &Grid4D, skips: &[Grid4D], training: bool, rng: &mut RngStream) -> Result<Grid4D> {
        Ok(self.decode_cached(start, skips, training, rng)?.0)
    }

    /// Inference forward pass (dropout off).
    pub fn forward(&self, x: &Grid4D, mode: LatentMode, rng: &mut RngStream) -> Result<(Grid4D, LatentDistribution)> {
        let (y, latent, _) = self.forward_with_cache(x, ForwardOptions::inference(mode), rng)?;
        Ok((y, latent))
    }

    pub fn forward_with_cache(
        &self,
        x: &Grid4D,
        opts: ForwardOptions,
        rng: &mut RngStream,
    ) -> Result<(Grid4D, LatentDistribution, ForwardCache)> {
        let batch = x.batch();
        let (skips, pooled, encoder) = self.encode_cached(x, opts.training, rng)?;
        let (latent, log_sigma_raw) = self.heads(&pooled)?;
        let (z, noise) = reparameterize_with_noise(&latent, opts.mode, rng);
        let start = self.reconstruct_latent(&z, batch)?;
        let (y, decoder, head_in) = self.decode_cached(&start, &skips, opts.training, rng)?;
        let cache = ForwardCache {
            batch,
            encoder,
            bottleneck: BottleneckCache {
                pooled_shape: pooled.shape(),
                features: pooled.into_vec(),
                log_sigma_raw,
                noise,
                z,
            },
            decoder,
            head_in,
        };
        Ok((y, latent, cache))
    }

    /// Back-propagates `grads` through the cached pass, accumulating into
    /// the parameter gradient buffers. Returns the input gradient.
    pub fn backward(&mut self, cache: &ForwardCache, latent: &LatentDistribution, grads: &OutputGrads) -> Result<Grid4D> {
        let cfg = self.cfg.clone();
        let batch = cache.batch;
        let p = &mut self.params;

        let mut dh = nn::conv2d_backward(&cache.head_in, &mut p.head.weight, &mut p.head.bias, &grads.prediction, POINTWISE)?;
        let mut dskips: Vec<Grid4D> = vec![Grid4D::zeros([0, 0, 0, 0]); cfg.levels];
        for level in 0..cfg.levels {
            let stage = cache.decoder[level].as_ref().expect("decoder cache filled for every level");
            let (dprev, dskip) = decoder_stage_backward(stage, &mut p.decoder[level], &cfg, &dh)?;
            dskips[level] = dskip;
            dh = dprev;
        }

        let bn = &cache.bottleneck;
        let proj = &mut p.latent_projection;
        let dz = nn::dense_batch_backward(&bn.z, batch, &mut proj.weight, &mut proj.bias, dh.as_slice())?;
        let mut dmu = grads.mu.clone();
        let mut dsigma = grads.sigma.clone();
        for i in 0..dz.len() {
            dmu[i] += dz[i];
            dsigma[i] += dz[i] * bn.noise[i];
        }
        let dlog_sigma: Vec<f64> = bn
            .log_sigma_raw
            .iter()
            .zip(&latent.sigma)
            .zip(&dsigma)
            .map(|((&raw, &s), &d)| if (LOG_SIGMA_MIN..=LOG_SIGMA_MAX).contains(&raw) { d * s } else { 0.0 })
            .collect();
        let mut dfeat = nn::dense_batch_backward(&bn.features, batch, &mut p.mu_head.weight, &mut p.mu_head.bias, &dmu)?;
        let dfeat_sigma = nn::dense_batch_backward(
            &bn.features,
            batch,
            &mut p.log_sigma_head.weight,
            &mut p.log_sigma_head.bias,
            &dlog_sigma,
        )?;
        for (a, b) in dfeat.iter_mut().zip(&dfeat_sigma) {
            *a += b;
        }

        let mut dpooled = Grid4D::from_vec(bn.pooled_shape, dfeat)?;
        for level in (0..cfg.levels).rev() {
            let lc = &cache.encoder[level];
            let mut dout = nn::max_pool2d_backward(lc.block.final_out.shape(), &lc.argmax, &dpooled);
            dout.add_assign(&dskips[level]);
            dpooled = dense_block_backward(&lc.block, &mut p.encoder[level], &cfg, &dout)?;
        }
        Ok(dpooled)
    }

    /// `n` sample-mode forwards with their pointwise mean and standard
    /// deviation (population form).
    pub fn predict_ensemble(&self, x: &Grid4D, n: usize, rng: &mut RngStream) -> Result<EnsemblePrediction> {
        if n == 0 {
            return Err(config_err!("ensemble size must be at least 1"));
        }
        let (skips, latent) = self.encode(x, false, rng)?;
        let mut members = Vec::with_capacity(n);
        for _ in 0..n {
            let z = reparameterize(&latent, LatentMode::Sample, rng);
            let start = self.reconstruct_latent(&z, x.batch())?;
            members.push(self.decode(&start, &skips, false, rng)?);
        }
        let shape = members[0].shape();
        let mut mean = Grid4D::zeros(shape);
        for m in &members {
            mean.add_assign(m);
        }
        let mean = mean.map(|v| v / n as f64);
        let mut var = Grid4D::zeros(shape);
        for m in &members {
            for ((acc, &v), &mu) in var.as_mut_slice().iter_mut().zip(m.as_slice()).zip(mean.as_slice()) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let std = var.map(|v| (v / n as f64).sqrt());
        Ok(EnsemblePrediction { members, mean, std })
    }

    pub fn zero_grad(&mut self) {
        self.params.zero_grad();
    }
}

#[derive(Debug, Clone)]
pub struct EnsemblePrediction {
    pub members: Vec<Grid4D>,
    pub mean: Grid4D,
    pub std: Grid4D,
}
