//! Scores the mean and persistence baselines on held-out synthetic days and
//! prints the comparison table and per-lead-time scores.
//!
//! cargo run --release --example evaluate_baselines

use vw4c::dataset::{synth_regions, window_split, FeatureSpec, SynthConfig};
use vw4c::evaluation::{leadtime_csv, mean_baseline, persistence_baseline, report, score_windows, ReportFormat, ReportRow};
use vw4c::losses::VariableWeights;

fn main() -> vw4c::Result<()> {
    let regions = synth_regions(
        &SynthConfig {
            size: 16,
            days: 6,
            ..SynthConfig::default()
        },
        2,
        11,
    )?;
    let spec = FeatureSpec::default();
    let train: Vec<_> = regions.iter().map(|r| r.select_days(0..4)).collect();
    let mut test = Vec::new();
    for r in &regions {
        test.extend(window_split(&r.select_days(4..6), &spec, 12)?);
    }

    let weights = VariableWeights::default();
    let means = mean_baseline(&train)?;
    let mean_preds = test.iter().map(|w| means.predict(w)).collect::<vw4c::Result<Vec<_>>>()?;
    let persistence: Vec<_> = test.iter().map(persistence_baseline).collect();

    let rows = [
        ReportRow {
            model: "mean baseline".into(),
            validation: None,
            test: Some(score_windows(&mean_preds, &test, &weights)?),
        },
        ReportRow {
            model: "persistence baseline".into(),
            validation: None,
            test: Some(score_windows(&persistence, &test, &weights)?),
        },
    ];
    println!("{} test windows from {} regions\n", test.len(), regions.len());
    println!("{}", report(&rows, ReportFormat::Text)?);
    println!("{}", leadtime_csv(&rows)?);
    Ok(())
}
