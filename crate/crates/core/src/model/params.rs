//! Parameter containers of the Variational U-Net.
//!
//! Stage-by-stage parameter counts, with `wᵢ = base_width·2ⁱ`, `k` the conv
//! kernel size, `L` levels, `F = w_{L−1}·s²` the flattened bottleneck and
//! `D` the latent size:
//!
//! * encoder level `i` (input `cᵢ`): `wᵢ·cᵢ·k² + wᵢ` for the first conv,
//!   `4·(wᵢ²·k² + wᵢ)` for the other four, `4·2wᵢ` for the norms;
//! * bottleneck heads: `2·(D·F + D)`; latent projection: `F·D + F`;
//! * decoder level `i` (input `cᵢ'`): `4·cᵢ'·wᵢ + wᵢ` (2×2 up-conv),
//!   `2wᵢ·wᵢ·k² + wᵢ` (fusion conv), `2wᵢ` (norm);
//! * output head: `out·w₀ + out`.

use crate::model::config::{HeadInit, ModelConfig};
use crate::rng::RngStream;
use crate::tensor::ParamTensor;

/// Number of conv→ELU→norm→dropout repeats in a dense block.
pub const DENSE_BLOCK_REPEATS: usize = 4;
/// Side of the up-sampling kernel (and its stride).
pub const UPSAMPLE_KERNEL: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl ConvParams {
    fn conv(k_out: usize, k_in: usize, k: usize, rng: &mut RngStream) -> Self {
        Self {
            weight: ParamTensor::he_normal(&[k_out, k_in, k, k], k_in * k * k, rng),
            bias: ParamTensor::zeros(&[k_out]),
        }
    }

    /// Up-sampling kernel in `[c_in, c_out, 2, 2]` layout. With stride equal
    /// to the kernel side every output cell sees `c_in` taps.
    fn upsample(c_in: usize, c_out: usize, rng: &mut RngStream) -> Self {
        Self {
            weight: ParamTensor::he_normal(&[c_in, c_out, UPSAMPLE_KERNEL, UPSAMPLE_KERNEL], c_in, rng),
            bias: ParamTensor::zeros(&[c_out]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub gamma: ParamTensor,
    pub beta: ParamTensor,
}

impl NormParams {
    fn new(c: usize) -> Self {
        Self {
            gamma: ParamTensor::from_values(&[c], vec![1.0; c]).expect("length matches"),
            beta: ParamTensor::zeros(&[c]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl DenseParams {
    fn new(m: usize, n: usize, rng: &mut RngStream) -> Self {
        Self {
            weight: ParamTensor::he_normal(&[m, n], n, rng),
            bias: ParamTensor::zeros(&[m]),
        }
    }
}

/// Five convolutions; the first four are each followed by a norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlockParams {
    pub convs: Vec<ConvParams>,
    pub norms: Vec<NormParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderStageParams {
    pub up: ConvParams,
    pub conv: ConvParams,
    pub norm: NormParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VUNetParams {
    /// Shallowest level first.
    pub encoder: Vec<DenseBlockParams>,
    pub mu_head: DenseParams,
    pub log_sigma_head: DenseParams,
    pub latent_projection: DenseParams,
    /// Indexed by level like the encoder; applied deepest first.
    pub decoder: Vec<DecoderStageParams>,
    pub head: ConvParams,
}

impl VUNetParams {
    /// Zero biases, unit norm gains, He-normal weights (the output head
    /// follows [`ModelConfig::head_init`]).
    pub fn init(cfg: &ModelConfig, rng: &mut RngStream) -> Self {
        let k = cfg.conv_kernel;
        let mut encoder = Vec::with_capacity(cfg.levels);
        for level in 0..cfg.levels {
            let w = cfg.width(level);
            let c_in = if level == 0 { cfg.in_channels } else { cfg.width(level - 1) };
            let mut convs = vec![ConvParams::conv(w, c_in, k, rng)];
            for _ in 0..DENSE_BLOCK_REPEATS {
                convs.push(ConvParams::conv(w, w, k, rng));
            }
            let norms = (0..DENSE_BLOCK_REPEATS).map(|_| NormParams::new(w)).collect();
            encoder.push(DenseBlockParams { convs, norms });
        }
        let f = cfg.bottleneck_features();
        let d = cfg.latent_dim;
        let mu_head = DenseParams::new(d, f, rng);
        let log_sigma_head = DenseParams::new(d, f, rng);
        let latent_projection = DenseParams::new(f, d, rng);
        let decoder = (0..cfg.levels)
            .map(|level| {
                let w = cfg.width(level);
                let c_in = cfg.width((level + 1).min(cfg.levels - 1));
                DecoderStageParams {
                    up: ConvParams::upsample(c_in, w, rng),
                    conv: ConvParams::conv(w, 2 * w, k, rng),
                    norm: NormParams::new(w),
                }
            })
            .collect();
        let mut head = ConvParams::conv(cfg.out_channels, cfg.base_width, 1, rng);
        if cfg.head_init == HeadInit::Zero {
            head.weight.values.fill(0.0);
        }
        Self {
            encoder,
            mu_head,
            log_sigma_head,
            latent_projection,
            decoder,
            head,
        }
    }

    /// All parameters with stable dotted names, in a fixed order.
    pub fn named(&self) -> Vec<(String, &ParamTensor)> {
        let mut out = Vec::new();
        for (l, block) in self.encoder.iter().enumerate() {
            for (i, c) in block.convs.iter().enumerate() {
                out.push((format!("encoder.{l}.conv{i}.weight"), &c.weight));
                out.push((format!("encoder.{l}.conv{i}.bias"), &c.bias));
            }
            for (i, n) in block.norms.iter().enumerate() {
                out.push((format!("encoder.{l}.norm{i}.gamma"), &n.gamma));
                out.push((format!("encoder.{l}.norm{i}.beta"), &n.beta));
            }
        }
        for (name, d) in [
            ("mu_head", &self.mu_head),
            ("log_sigma_head", &self.log_sigma_head),
            ("latent_projection", &self.latent_projection),
        ] {
            out.push((format!("{name}.weight"), &d.weight));
            out.push((format!("{name}.bias"), &d.bias));
        }
        for (l, st) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.{l}.up.weight"), &st.up.weight));
            out.push((format!("decoder.{l}.up.bias"), &st.up.bias));
            out.push((format!("decoder.{l}.conv.weight"), &st.conv.weight));
            out.push((format!("decoder.{l}.conv.bias"), &st.conv.bias));
            out.push((format!("decoder.{l}.norm.gamma"), &st.norm.gamma));
            out.push((format!("decoder.{l}.norm.beta"), &st.norm.beta));
        }
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    /// Mutable counterpart of [`VUNetParams::named`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out: Vec<&mut ParamTensor> = Vec::new();
        for block in &mut self.encoder {
            for c in &mut block.convs {
                out.push(&mut c.weight);
                out.push(&mut c.bias);
            }
            for n in &mut block.norms {
                out.push(&mut n.gamma);
                out.push(&mut n.beta);
            }
        }
        for d in [&mut self.mu_head, &mut self.log_sigma_head, &mut self.latent_projection] {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        for st in &mut self.decoder {
            out.push(&mut st.up.weight);
            out.push(&mut st.up.bias);
            out.push(&mut st.conv.weight);
            out.push(&mut st.conv.bias);
            out.push(&mut st.norm.gamma);
            out.push(&mut st.norm.beta);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.tensors_mut() {
            p.zero_grad();
        }
    }

    pub fn total_len(&self) -> usize {
        self.named().iter().map(|(_, p)| p.len()).sum()
    }

    /// Concatenated gradient buffers in [`VUNetParams::named`] order.
    pub fn flat_grad(&self) -> Vec<f64> {
        self.named().iter().flat_map(|(_, p)| p.grad.iter().copied()).collect()
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.named().iter().flat_map(|(_, p)| p.values.iter().copied()).collect()
    }

    /// Adds `other`'s gradients into this set's gradient buffers.
    pub fn accumulate_grad(&mut self, other: &VUNetParams) {
        let src = other.named();
        for (dst, (_, s)) in self.tensors_mut().into_iter().zip(src) {
            dst.ensure_grad();
            for (a, b) in dst.grad.iter_mut().zip(&s.grad) {
                *a += b;
            }
        }
    }

    /// Locates flat index `i` (in [`VUNetParams::named`] order) as
    /// (tensor, offset).
    fn locate(&self, mut i: usize) -> Option<(usize, usize)> {
        for (t, (_, p)) in self.named().iter().enumerate() {
            if i < p.len() {
                return Some((t, i));
            }
            i -= p.len();
        }
        None
    }

    pub fn flat_value(&self, i: usize) -> f64 {
        let (t, o) = self.locate(i).expect("flat index in range");
        self.named()[t].1.values[o]
    }

    pub fn set_flat_value(&mut self, i: usize, v: f64) {
        let (t, o) = self.locate(i).expect("flat index in range");
        self.tensors_mut()[t].values[o] = v;
    }

    pub fn scale_grad(&mut self, factor: f64) {
        for p in self.tensors_mut() {
            p.grad.iter_mut().for_each(|g| *g *= factor);
        }
    }
}

/// Closed-form parameter total for `cfg`; see the module docs.
pub fn param_count(cfg: &ModelConfig) -> usize {
    let k2 = cfg.conv_kernel * cfg.conv_kernel;
    let mut total = 0;
    for level in 0..cfg.levels {
        let w = cfg.width(level);
        let c_in = if level == 0 { cfg.in_channels } else { cfg.width(level - 1) };
        total += w * c_in * k2 + w;
        total += DENSE_BLOCK_REPEATS * (w * w * k2 + w);
        total += DENSE_BLOCK_REPEATS * 2 * w;
    }
    let f = cfg.bottleneck_features();
    let d = cfg.latent_dim;
    total += 2 * (d * f + d) + (f * d + f);
    for level in 0..cfg.levels {
        let w = cfg.width(level);
        let c_in = cfg.width((level + 1).min(cfg.levels - 1));
        total += UPSAMPLE_KERNEL * UPSAMPLE_KERNEL * c_in * w + w;
        total += 2 * w * w * k2 + w;
        total += 2 * w;
    }
    total + cfg.out_channels * cfg.base_width + cfg.out_channels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_matches_enumeration() {
        for cfg in [ModelConfig::default(), ModelConfig::tiny()] {
            let params = VUNetParams::init(&cfg, &mut RngStream::new(0));
            let enumerated: usize = params.named().iter().map(|(_, p)| p.shape.iter().product::<usize>()).sum();
            assert_eq!(param_count(&cfg), enumerated);
        }
    }

    #[test]
    fn latent_square_dense_contribution() {
        let d = 512;
        assert_eq!(d * d + d, 262_656);
        let p = DenseParams::new(d, d, &mut RngStream::new(0));
        assert_eq!(p.weight.len() + p.bias.len(), 262_656);
    }

    #[test]
    fn count_increases_with_width() {
        let mut prev = 0;
        for base_width in [4, 8, 12, 16, 32] {
            let n = param_count(&ModelConfig { base_width, ..ModelConfig::default() });
            assert!(n > prev);
            prev = n;
        }
    }

    #[test]
    fn names_are_unique_and_ordered_like_mut_view() {
        let mut params = VUNetParams::init(&ModelConfig::tiny(), &mut RngStream::new(1));
        let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        let lens: Vec<usize> = params.named().iter().map(|(_, p)| p.len()).collect();
        let mut_lens: Vec<usize> = params.tensors_mut().iter().map(|p| p.len()).collect();
        assert_eq!(lens, mut_lens);
    }

    #[test]
    fn biases_start_at_zero() {
        let params = VUNetParams::init(&ModelConfig::tiny(), &mut RngStream::new(2));
        for (name, p) in params.named() {
            if name.ends_with(".bias") || name.ends_with(".beta") {
                assert!(p.values.iter().all(|&v| v == 0.0), "{name}");
            }
        }
    }
}
