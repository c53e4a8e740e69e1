//! Variational U-Net for spatiotemporal nowcasting on Weather4cast-shaped
//! tensors.
//!
//! The crate covers the full pipeline: layer primitives with hand-written
//! gradients ([`nn`]), the Variational U-Net itself ([`model`]), the masked
//! weighted L2 + KL objective ([`losses`]), Weather4cast-style sample
//! assembly and a synthetic data generator ([`dataset`]), Adam with cyclic
//! cosine annealing and cycle-level early stopping ([`training`]), and
//! scoring against mean and persistence baselines ([`evaluation`]).

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod losses;
pub mod model;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use tensor::{Grid4D, Mask4D, ParamTensor};
