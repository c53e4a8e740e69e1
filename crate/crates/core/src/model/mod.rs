//! The Variational U-Net: a dense-block encoder with max-pool
//! down-sampling, a Gaussian bottleneck sampled by reparameterization, a
//! dense latent-to-map projection and a transposed-convolution decoder fed
//! by channel-concatenated skip connections.

mod config;
mod io;
mod network;
mod params;

pub use config::{HeadInit, ModelConfig};
pub use io::{BlobEntry, ModelManifest, MODEL_FORMAT_VERSION, MODEL_MANIFEST};
pub(crate) use io::{read_f64_blob, read_json, read_param_set, write_f64_blob, write_json, write_param_set};
pub use network::{
    decoder_stage_layers, dense_block, dense_block_layers, reparameterize, reparameterize_with_noise, EnsemblePrediction,
    ForwardCache, ForwardOptions, LatentDistribution, LatentMode, LayerKind, OutputGrads, VariationalUNet,
    LOG_SIGMA_MAX, LOG_SIGMA_MIN,
};
pub use params::{
    param_count, ConvParams, DecoderStageParams, DenseBlockParams, DenseParams, NormParams, VUNetParams,
    DENSE_BLOCK_REPEATS, UPSAMPLE_KERNEL,
};
