//! The `vw4c` command line: `synth`, `train`, `predict`, `evaluate`,
//! `gradcheck` and `lr-schedule`.
//!
//! Exit codes: 0 success, 1 failed check, 2 configuration error, 3 I/O or
//! file-format error, 4 numeric failure. `VW4C_THREADS` caps the worker
//! threads used for parallel inference.

mod config;
mod pgm;
mod predictions;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{LoadedConfig, RunConfig, Split, SplitConfig, RESOLVED_CONFIG};
pub use pgm::{read_pgm, write_pgm};
pub use predictions::{read_predictions, PredictionManifest, PREDICTIONS_BLOB, PREDICTIONS_MANIFEST};

use crate::dataset::{read_dataset, synth_regions, window_split, write_dataset, RegionDataset, SampleWindow};
use crate::error::{config_err, Error, Result};
use crate::evaluation::{
    leadtime_csv, mean_baseline, persistence_baseline, predict_windows, report, score_windows, ReportFormat, ReportRow,
};
use crate::gradcheck;
use crate::losses::{TargetVariable, NUM_TARGETS};
use crate::model::{write_json, LatentMode, VariationalUNet};
use crate::rng::RngStream;
use crate::tensor::Grid4D;
use crate::training::{save_checkpoint, train_protocol, Checkpoint, CycleMetrics, LogRecord, ScheduleState};

#[derive(Debug, Parser)]
#[command(name = "vw4c", version, about = "Variational U-Net nowcasting on Weather4cast-shaped data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic region datasets.
    Synth(SynthArgs),
    /// Train one model on one or more region datasets.
    Train(TrainArgs),
    /// Run a trained model over the windows of a dataset.
    Predict(PredictArgs),
    /// Score predictions, optionally next to the mean and persistence baselines.
    Evaluate(EvaluateArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck(GradcheckArgs),
    /// Print the cyclic cosine learning-rate table.
    LrSchedule(LrScheduleArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub regions: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    /// Grid side in pixels.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub frames_per_day: Option<usize>,
    /// Probability that a (frame, channel) loses a rectangle.
    #[arg(long)]
    pub missing: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Region dataset directories; all are concatenated into one training set.
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add one final cycle on train+validation windows.
    #[arg(long)]
    pub finetune_on_val: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub cycles_max: Option<usize>,
    #[arg(long)]
    pub epochs_per_cycle: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr_max: Option<f64>,
    #[arg(long)]
    pub no_early_stop: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint or model directory (or a JSON manifest inside one).
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Mean)]
    pub mode: ModeArg,
    /// Draw this many latent samples per window and also write their mean and std.
    #[arg(long)]
    pub ensemble: Option<usize>,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write PGM images of every variable and lead time for the first N windows.
    #[arg(long, default_value_t = 0)]
    pub pgm: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Mean,
    Sample,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Prediction directory written by `predict`.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Add mean and persistence baseline rows.
    #[arg(long)]
    pub baselines: bool,
    /// Datasets the mean baseline is fitted on (default: the training days of `--data`).
    #[arg(long, num_args = 1..)]
    pub train: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
    #[arg(long, default_value = "vunet")]
    pub name: String,
    /// Also write report.csv, leadtime.csv and the resolved config here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LrScheduleArgs {
    #[arg(long)]
    pub steps_per_cycle: usize,
    #[arg(long, default_value_t = 1)]
    pub cycles: usize,
    #[arg(long)]
    pub lr_max: Option<f64>,
    #[arg(long)]
    pub lr_min: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_output(args, &mut std::io::stdout().lock())
}

/// Like [`run`] but command output goes to `out`.
pub fn run_with_output<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match configure_threads().and_then(|_| execute(cli.command, out)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("VW4C_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_err!("VW4C_THREADS must be a positive integer, got {raw:?}"))?;
    // a pool installed earlier in the same process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs one command, writing human-readable output to `out`.
pub fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
        Command::LrSchedule(a) => cmd_lr_schedule(&a, out),
    }
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) -> Result<()> {
    out.write_all(text.as_ref().as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Serialize)]
struct RegionIndexEntry {
    id: String,
    dir: String,
    days: usize,
    frames: usize,
}

/// Top-level listing written by `synth` next to the region directories.
pub const REGIONS_INDEX: &str = "regions.json";

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<i32> {
    let mut loaded = LoadedConfig::load(a.config.as_deref())?;
    let c = &mut loaded.config;
    if let Some(v) = a.regions {
        c.regions = v;
    }
    if let Some(v) = a.days {
        c.synth.days = v;
    }
    if let Some(v) = a.size {
        c.synth.size = v;
    }
    if let Some(v) = a.frames_per_day {
        c.synth.frames_per_day = v;
    }
    if let Some(v) = a.missing {
        c.synth.missing_rate = v;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    c.out = Some(a.out.clone());
    let cfg = loaded.resolve()?;
    if cfg.regions == 0 {
        return Err(config_err!("--regions must be at least 1"));
    }
    let regions = synth_regions(&cfg.synth, cfg.regions, cfg.seed)?;
    create_dir(&a.out)?;
    let mut index = Vec::new();
    for ds in &regions {
        let manifest = write_dataset(ds, &a.out.join(&ds.region_id))?;
        say(
            out,
            format!(
                "{}: {} days, {} frames, {}x{} grid\n",
                ds.region_id,
                manifest.days.len(),
                manifest.frame_count(),
                manifest.grid[0],
                manifest.grid[1]
            ),
        )?;
        index.push(RegionIndexEntry {
            id: ds.region_id.clone(),
            dir: ds.region_id.clone(),
            days: manifest.days.len(),
            frames: manifest.frame_count(),
        });
    }
    write_json(&a.out.join(REGIONS_INDEX), &index)?;
    cfg.write_snapshot(&a.out)?;
    say(out, format!("wrote {} regions to {}\n", regions.len(), a.out.display()))?;
    Ok(0)
}

fn load_regions(paths: &[PathBuf], cfg: &RunConfig) -> Result<Vec<RegionDataset>> {
    if paths.is_empty() {
        return Err(config_err!("no --data directories given"));
    }
    let regions = paths.iter().map(|p| read_dataset(p)).collect::<Result<Vec<_>>>()?;
    for ds in &regions {
        if ds.height != cfg.model.input_size || ds.width != cfg.model.input_size {
            return Err(config_err!(
                "region {} is {}x{} but model.input_size is {}",
                ds.region_id,
                ds.height,
                ds.width,
                cfg.model.input_size
            ));
        }
    }
    Ok(regions)
}

fn split_windows(regions: &[RegionDataset], cfg: &RunConfig, split: Split) -> Result<Vec<SampleWindow>> {
    let mut windows = Vec::new();
    for ds in regions {
        windows.extend(window_split(&cfg.split.select(ds, split)?, &cfg.features, cfg.split.window_stride)?);
    }
    Ok(windows)
}

pub const TRAIN_LOG: &str = "log.jsonl";
pub const HISTORY_CSV: &str = "history.csv";

fn write_history(path: &Path, history: &[CycleMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let fail = |e: csv::Error| Error::Validation(format!("{}: {e}", path.display()));
    let mut header = vec!["cycle", "finetune", "steps", "lr_first", "lr_last", "train_l2", "train_kl", "train_total"];
    let vars = TargetVariable::ALL.map(|v| format!("train_l2_{}", v.name()));
    header.extend(vars.iter().map(|s| s.as_str()));
    header.push("validation");
    w.write_record(&header).map_err(fail)?;
    for m in history {
        let mut rec = vec![
            m.cycle.to_string(),
            m.finetune.to_string(),
            m.steps.to_string(),
            format!("{:e}", m.lr_first),
            format!("{:e}", m.lr_last),
            format!("{:e}", m.train.l2_total),
            format!("{:e}", m.train.kl),
            format!("{:e}", m.train.total),
        ];
        rec.extend(m.train.l2_per_variable.iter().map(|v| format!("{v:e}")));
        rec.push(format!("{:e}", m.validation));
        w.write_record(&rec).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let mut loaded = LoadedConfig::load(a.config.as_deref())?;
    let c = &mut loaded.config;
    if !a.data.is_empty() {
        c.data = a.data.clone();
    }
    if let Some(o) = &a.out {
        c.out = Some(o.clone());
    }
    if a.finetune_on_val {
        c.train.finetune_on_validation = true;
    }
    if a.no_early_stop {
        c.train.early_stop = false;
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.cycles_max {
        c.train.cycles_max = v;
    }
    if let Some(v) = a.epochs_per_cycle {
        c.train.epochs_per_cycle = v;
    }
    if let Some(v) = a.batch_size {
        c.train.batch_size = v;
    }
    if let Some(v) = a.lr_max {
        c.train.lr_max = v;
    }
    let cfg = loaded.resolve()?;
    let out_dir = cfg.out.clone().ok_or_else(|| config_err!("no --out directory given"))?;

    let regions = load_regions(&cfg.data, &cfg)?;
    let train = split_windows(&regions, &cfg, Split::Train)?;
    let val = split_windows(&regions, &cfg, Split::Validation)?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty(format!(
            "{} training and {} validation windows; each split needs at least one",
            train.len(),
            val.len()
        )));
    }
    create_dir(&out_dir)?;
    cfg.write_snapshot(&out_dir)?;

    let mut rng = RngStream::new(cfg.seed);
    let model = VariationalUNet::new(cfg.model.clone(), &mut rng.fork())?;
    let start = Checkpoint::start(model, &cfg.train, train.len(), rng)?;

    let log_path = out_dir.join(TRAIN_LOG);
    let file = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let mut log_file = BufWriter::new(file);
    let mut progress = Vec::new();
    let mut log = |r: &LogRecord| -> Result<()> {
        let line = serde_json::to_string(r).map_err(|e| Error::Json {
            path: log_path.clone(),
            source: e,
        })?;
        writeln!(log_file, "{line}").map_err(|e| Error::io(&log_path, e))?;
        if let LogRecord::Cycle(m) = r {
            progress.push(format!(
                "cycle {}{}: {} steps, train l2 {:.6}, kl {:.4}, validation {:.6}\n",
                m.cycle,
                if m.finetune { " (train+validation)" } else { "" },
                m.steps,
                m.train.l2_total,
                m.train.kl,
                m.validation
            ));
        }
        Ok(())
    };
    let result = train_protocol(start, &train, &val, &cfg.loss, &cfg.train, &mut log);
    log_file.flush().map_err(|e| Error::io(&log_path, e))?;
    for line in &progress {
        say(out, line)?;
    }
    let outcome = result?;
    let best = outcome.fit.best_checkpoint();
    save_checkpoint(best, &out_dir.join("best"))?;
    save_checkpoint(&outcome.final_checkpoint, &out_dir.join("final"))?;
    write_history(&out_dir.join(HISTORY_CSV), &outcome.final_checkpoint.history)?;
    say(
        out,
        format!(
            "{} training / {} validation windows from {} region(s); best cycle {} (validation {:.6}); {} optimizer steps\n",
            train.len(),
            val.len(),
            regions.len(),
            best.best_cycle.unwrap_or(0),
            best.best_score.unwrap_or(f64::NAN),
            outcome.final_checkpoint.global_step
        ),
    )?;
    Ok(0)
}

fn model_dir(path: &Path) -> PathBuf {
    if path.is_file() {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        path.to_path_buf()
    }
}

fn to_f32_physical(pred: &Grid4D, ds: &RegionDataset) -> Vec<f32> {
    crate::dataset::denormalize_targets(pred, &ds.catalog)
        .as_slice()
        .iter()
        .map(|&v| v as f32)
        .collect()
}

fn stack_preds(preds: &[Grid4D]) -> Result<Grid4D> {
    Grid4D::stack(&preds.iter().collect::<Vec<_>>())
}

fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<i32> {
    let mut loaded = LoadedConfig::load(a.config.as_deref())?;
    if let Some(v) = a.seed {
        loaded.config.seed = v;
    }
    loaded.config.data = vec![a.data.clone()];
    loaded.config.out = Some(a.out.clone());
    let dir = model_dir(&a.ckpt);
    let model = VariationalUNet::load(&dir)?;
    // the architecture comes from the checkpoint
    loaded.config.model = model.cfg.clone();
    let cfg = loaded.resolve()?;
    cfg.features.check_model_channels(model.cfg.in_channels)?;
    let regions = load_regions(&cfg.data, &cfg)?;
    let ds = &regions[0];
    let windows = split_windows(&regions, &cfg, a.split)?;
    if windows.is_empty() {
        return Err(Error::Empty(format!("the {:?} split of {} has no windows", a.split, a.data.display())));
    }
    create_dir(&a.out)?;
    cfg.write_snapshot(&a.out)?;

    let mode = match a.mode {
        ModeArg::Mean => LatentMode::Mean,
        ModeArg::Sample => LatentMode::Sample,
    };
    let mut manifest = PredictionManifest::new(&cfg, a.split, &a.data, &windows, &a.ckpt);
    let prediction = match a.ensemble {
        None => {
            manifest.mode = mode;
            stack_preds(&predict_windows(&model, &windows, mode, cfg.seed)?)?
        }
        Some(n) => {
            if n == 0 {
                return Err(config_err!("--ensemble must be at least 1"));
            }
            manifest.mode = LatentMode::Sample;
            manifest.ensemble = Some(n);
            let ens = predictions::ensemble(&model, &windows, n, cfg.seed)?;
            for (k, member) in ens.members.iter().enumerate() {
                predictions::write_blob(&a.out.join(format!("member_{k}")), &to_f32_physical(member, ds), member.shape())?;
            }
            let std = predictions::std_physical(&ens.std, &ds.catalog);
            predictions::write_blob(&a.out.join("std"), &std, ens.std.shape())?;
            predictions::write_blob(&a.out.join("mean"), &to_f32_physical(&ens.mean, ds), ens.mean.shape())?;
            ens.mean
        }
    };
    let values = to_f32_physical(&prediction, ds);
    manifest.crc32 = predictions::write_blob(&a.out, &values, prediction.shape())?;
    manifest.shape = prediction.shape();
    write_json(&a.out.join(PREDICTIONS_MANIFEST), &manifest)?;

    let images = a.pgm.min(windows.len());
    if images > 0 {
        predictions::write_images(&a.out.join("images"), &prediction, images, ds)?;
    }
    let [n, c, h, w] = prediction.shape();
    say(
        out,
        format!(
            "wrote predictions of shape [{n}, {c}, {h}, {w}] for the {:?} split to {}{}\n",
            a.split,
            a.out.display(),
            if images > 0 { format!(" ({} PGM images)", images * c) } else { String::new() }
        ),
    )?;
    Ok(0)
}

fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<i32> {
    let (manifest, values) = read_predictions(&a.pred)?;
    let mut cfg = manifest.config.clone();
    cfg.data = vec![a.data.clone()];
    cfg.out = a.out.clone();
    let ds = read_dataset(&a.data)?;
    let windows = window_split(&cfg.split.select(&ds, manifest.split)?, &cfg.features, cfg.split.window_stride)?;
    let provenance: Vec<_> = windows.iter().map(|w| w.provenance.clone()).collect();
    if provenance != manifest.windows {
        return Err(Error::Validation(format!(
            "predictions in {} were made for different windows than the {:?} split of {} yields",
            a.pred.display(),
            manifest.split,
            a.data.display()
        )));
    }
    let preds = predictions::normalized_windows(&values, manifest.shape, &ds.catalog)?;
    let weights = cfg.loss.weights;
    let model_report = score_windows(&preds, &windows, &weights)?;
    let row = |model: &str, r| {
        if manifest.split == Split::Validation {
            ReportRow { model: model.into(), validation: Some(r), test: None }
        } else {
            ReportRow { model: model.into(), validation: None, test: Some(r) }
        }
    };
    let mut rows = vec![row(&a.name, model_report)];
    if a.baselines {
        let train = if a.train.is_empty() {
            vec![cfg.split.select(&ds, Split::Train)?]
        } else {
            a.train.iter().map(|p| read_dataset(p)).collect::<Result<Vec<_>>>()?
        };
        let mean = mean_baseline(&train)?;
        let mean_preds = windows.iter().map(|w| mean.predict(w)).collect::<Result<Vec<_>>>()?;
        rows.push(row("mean baseline", score_windows(&mean_preds, &windows, &weights)?));
        let pers: Vec<Grid4D> = windows.iter().map(persistence_baseline).collect();
        rows.push(row("persistence baseline", score_windows(&pers, &windows, &weights)?));
    }
    let format = match a.format {
        FormatArg::Text => ReportFormat::Text,
        FormatArg::Csv => ReportFormat::Csv,
    };
    say(out, report(&rows, format)?)?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        cfg.write_snapshot(dir)?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("report.csv", report(&rows, ReportFormat::Csv)?)?;
        write("leadtime.csv", leadtime_csv(&rows)?)?;
    }
    Ok(0)
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let results = gradcheck::suite(a.seed)?;
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &results {
        say(
            out,
            format!(
                "{:<width$}  {:>6} probes  max rel err {:.3e}  (tol {:.0e})  {}\n",
                r.name,
                r.probes,
                r.max_relative_error,
                r.tolerance,
                if r.passed() { "ok" } else { "FAIL" }
            ),
        )?;
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    if let Some(dir) = &a.out {
        let cfg = RunConfig {
            seed: a.seed,
            out: Some(dir.clone()),
            ..RunConfig::default()
        };
        cfg.write_snapshot(dir)?;
        write_json(&dir.join("gradcheck.json"), &results)?;
    }
    say(out, format!("{} of {} checks passed\n", results.len() - failed, results.len()))?;
    Ok(if failed == 0 { 0 } else { 1 })
}

fn cmd_lr_schedule(a: &LrScheduleArgs, out: &mut dyn Write) -> Result<i32> {
    let mut loaded = LoadedConfig::load(a.config.as_deref())?;
    if let Some(v) = a.lr_max {
        loaded.config.train.lr_max = v;
    }
    if let Some(v) = a.lr_min {
        loaded.config.train.lr_min = v;
    }
    loaded.config.out = a.out.clone();
    let cfg = loaded.resolve()?;
    let sched = ScheduleState::new(a.steps_per_cycle, cfg.train.lr_max, cfg.train.lr_min)?;
    let mut text = String::from("step,cycle,lr\n");
    for (k, lr) in sched.table(a.cycles) {
        text.push_str(&format!("{k},{},{lr:e}\n", k / a.steps_per_cycle + 1));
    }
    say(out, &text)?;
    if let Some(dir) = &a.out {
        cfg.write_snapshot(dir)?;
        let p = dir.join("lr_schedule.csv");
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(0)
}

/// Names of the 4 target variables, for image and column labels.
pub fn target_names() -> [&'static str; NUM_TARGETS] {
    TargetVariable::ALL.map(|v| v.name())
}
