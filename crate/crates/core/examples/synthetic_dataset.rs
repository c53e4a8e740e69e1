//! Generates a synthetic region, writes it to disk, reads it back and cuts
//! it into model-ready windows.
//!
//! cargo run --release --example synthetic_dataset

use vw4c::dataset::{read_dataset, synth_generate, window_split, write_dataset, FeatureSpec, SynthConfig};

fn main() -> vw4c::Result<()> {
    let cfg = SynthConfig {
        size: 16,
        days: 2,
        ..SynthConfig::default()
    };
    let region = synth_generate(&cfg, 7)?;
    let dir = std::env::temp_dir().join("vw4c-synthetic-dataset");
    let manifest = write_dataset(&region, &dir)?;
    println!(
        "wrote region {} ({}x{}, {} days, {} frames) to {}",
        region.region_id,
        region.height,
        region.width,
        region.days.len(),
        manifest.frame_count(),
        dir.display()
    );

    let back = read_dataset(&dir)?;
    println!("round trip lossless: {}", back == region);

    let spec = FeatureSpec::default();
    let windows = window_split(&back, &spec, 12)?;
    let first = &windows[0];
    println!(
        "{} windows; input {:?}, target {:?}, {:.1}% of target pixels valid",
        windows.len(),
        first.input.shape(),
        first.target.shape(),
        100.0 * first.target_mask.count_valid() as f64 / first.target.len() as f64
    );
    Ok(())
}
