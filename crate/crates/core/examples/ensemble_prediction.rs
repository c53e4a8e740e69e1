//! Draws an ensemble of forecasts from the latent distribution of an
//! (untrained) model and reports the per-variable spread.
//!
//! cargo run --release --example ensemble_prediction

use vw4c::dataset::{synth_generate, window_split, FeatureSpec, SynthConfig};
use vw4c::losses::{TargetVariable, NUM_TARGETS};
use vw4c::model::{HeadInit, LatentMode, ModelConfig, VariationalUNet};
use vw4c::RngStream;

fn main() -> vw4c::Result<()> {
    let region = synth_generate(
        &SynthConfig {
            size: 16,
            days: 1,
            ..SynthConfig::default()
        },
        3,
    )?;
    let window = &window_split(&region, &FeatureSpec::default(), 12)?[0];
    let cfg = ModelConfig {
        levels: 2,
        base_width: 8,
        latent_dim: 16,
        input_size: 16,
        head_init: HeadInit::HeNormal,
        ..ModelConfig::default()
    };
    let mut rng = RngStream::new(0);
    let model = VariationalUNet::new(cfg, &mut rng)?;

    let (mean_mode, _) = model.forward(&window.input, LatentMode::Mean, &mut rng)?;
    let ens = model.predict_ensemble(&window.input, 8, &mut RngStream::new(42))?;
    println!("{} members of shape {:?}", ens.members.len(), ens.mean.shape());

    let std = &ens.std;
    let spread = |v: usize| {
        let planes: Vec<&[f64]> = (0..ens.std.channels() / NUM_TARGETS).map(|t| std.plane(0, t * NUM_TARGETS + v)).collect();
        planes.iter().flat_map(|p| p.iter()).sum::<f64>() / planes.iter().map(|p| p.len()).sum::<usize>() as f64
    };
    for v in TargetVariable::ALL {
        println!("{:<22} mean member std (normalized units) {:.4}", v.name(), spread(v.index()));
    }
    let gap: f64 = ens.mean.as_slice().iter().zip(mean_mode.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("largest gap between ensemble mean and mean-mode forecast: {gap:.3e}");
    Ok(())
}
