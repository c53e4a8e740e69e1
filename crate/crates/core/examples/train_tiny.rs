//! Trains a small model on synthetic windows with the six-cycle protocol
//! plus a final cycle on train+validation, logging each cycle.
//!
//! cargo run --release --example train_tiny

use vw4c::dataset::{synth_generate, window_split, FeatureSpec, SynthConfig};
use vw4c::losses::LossConfig;
use vw4c::model::{ModelConfig, VariationalUNet};
use vw4c::training::{train_protocol, Checkpoint, LogRecord, TrainRunConfig};
use vw4c::RngStream;

fn main() -> vw4c::Result<()> {
    let synth = SynthConfig {
        size: 16,
        days: 3,
        ..SynthConfig::default()
    };
    let region = synth_generate(&synth, 1)?;
    let spec = FeatureSpec::default();
    let train = window_split(&region.select_days(0..2), &spec, 6)?;
    let val = window_split(&region.select_days(2..3), &spec, 12)?;

    let cfg = ModelConfig {
        levels: 2,
        base_width: 8,
        latent_dim: 16,
        input_size: 16,
        ..ModelConfig::default()
    };
    let run = TrainRunConfig {
        lr_max: 2e-3,
        batch_size: 4,
        ..TrainRunConfig::paper_protocol()
    };
    let mut rng = RngStream::new(run.seed);
    let model = VariationalUNet::new(cfg, &mut rng.fork())?;
    let start = Checkpoint::start(model, &run, train.len(), rng)?;
    println!("{} training and {} validation windows", train.len(), val.len());

    let out = train_protocol(start, &train, &val, &LossConfig::default(), &run, &mut |r| {
        if let LogRecord::Cycle(m) = r {
            println!(
                "cycle {}{}: {} steps, lr {:.1e}..{:.1e}, train l2 {:.4} kl {:.4}, validation {:.4}",
                m.cycle,
                if m.finetune { " (train+val)" } else { "" },
                m.steps,
                m.lr_first,
                m.lr_last,
                m.train.l2_total,
                m.train.kl,
                m.validation
            );
        }
        Ok(())
    })?;
    println!("finished after {} optimizer steps", out.final_checkpoint.global_step);
    Ok(())
}
