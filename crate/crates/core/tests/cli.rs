use std::fs;
use std::path::{Path, PathBuf};

use vw4c::cli::{read_pgm, read_predictions, run_with_output, RESOLVED_CONFIG};
use vw4c::dataset::{blob, read_dataset, Channel};

const CONFIG: &str = r#"{
  "model": {"levels": 2, "base_width": 4, "latent_dim": 8, "input_size": 8},
  "train": {"cycles_max": 2, "batch_size": 4, "lr_max": 0.001},
  "split": {"validation_days": 1, "test_days": 1, "window_stride": 12},
  "synth": {"size": 8, "days": 4}
}"#;

struct Run {
    code: i32,
    stdout: String,
}

fn vw4c(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut full = vec!["vw4c"];
    full.extend_from_slice(args);
    let code = run_with_output(full, &mut out);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let config = root.join("cfg.json");
        fs::write(&config, CONFIG).unwrap();
        Self { _tmp: tmp, root, config }
    }

    fn p(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn synth(&self, out: &str, extra: &[&str]) -> Run {
        let o = self.p(out);
        let mut args = vec!["synth", "--out", s(&o), "--config", s(&self.config), "--regions", "2", "--seed", "5"];
        args.extend_from_slice(extra);
        vw4c(&args)
    }

    fn train(&self, out: &str, data: &[&str], extra: &[&str]) -> Run {
        let o = self.p(out);
        let dirs: Vec<PathBuf> = data.iter().map(|d| self.p(d)).collect();
        let mut args = vec!["train", "--config", s(&self.config), "--out", s(&o), "--data"];
        args.extend(dirs.iter().map(|d| s(d)));
        args.extend_from_slice(extra);
        vw4c(&args)
    }
}

fn tree_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_is_deterministic_and_writes_an_index() {
    let ws = Workspace::new();
    let r = ws.synth("a", &[]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(r.stdout.contains("R1") && r.stdout.contains("R2"));
    assert_eq!(ws.synth("b", &[]).code, 0);
    let (a, b) = (tree_bytes(&ws.p("a")), tree_bytes(&ws.p("b")));
    let strip = |v: Vec<(PathBuf, Vec<u8>)>| -> Vec<_> { v.into_iter().filter(|(p, _)| !p.ends_with(RESOLVED_CONFIG)).collect() };
    assert_eq!(strip(a), strip(b));
    assert!(ws.p("a/regions.json").exists());
    assert!(ws.p("a").join(RESOLVED_CONFIG).exists());
}

#[test]
fn synth_without_missing_data_has_full_masks() {
    let ws = Workspace::new();
    assert_eq!(ws.synth("d", &["--missing", "0"]).code, 0);
    let ds = read_dataset(&ws.p("d/R1")).unwrap();
    for day in &ds.days {
        for c in Channel::ALL {
            assert!(day.channel(c).valid.iter().all(|&v| v));
        }
    }
}

#[test]
fn bad_configuration_exits_with_2() {
    let ws = Workspace::new();
    assert_eq!(ws.synth("x", &["--missing", "1.5"]).code, 2);
    fs::write(ws.p("bad.json"), r#"{"model": {"levles": 2}}"#).unwrap();
    let bad = ws.p("bad.json");
    assert_eq!(vw4c(&["synth", "--out", s(&ws.p("y")), "--config", s(&bad)]).code, 2);
    assert_eq!(vw4c(&["lr-schedule", "--steps-per-cycle", "0"]).code, 2);
    assert_eq!(vw4c(&["no-such-command"]).code, 2);
}

#[test]
fn missing_inputs_exit_with_3() {
    let ws = Workspace::new();
    assert_eq!(ws.train("t", &["nowhere"], &[]).code, 3);
    let missing_cfg = ws.p("missing.json");
    assert_eq!(vw4c(&["synth", "--out", s(&ws.p("z")), "--config", s(&missing_cfg)]).code, 3);
}

#[test]
fn lr_schedule_restarts_at_lr_max() {
    let r = vw4c(&["lr-schedule", "--steps-per-cycle", "5", "--cycles", "2"]);
    assert_eq!(r.code, 0);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "step,cycle,lr");
    assert_eq!(lines.len(), 11);
    let lr = |l: &str| l.rsplit(',').next().unwrap().parse::<f64>().unwrap();
    assert_eq!(lr(lines[1]), 2.0e-4);
    assert_eq!(lr(lines[6]), 2.0e-4);
    assert!(lr(lines[5]) < lr(lines[4]));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let r = vw4c(&["gradcheck", "--out", s(dir.path())]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(r.stdout.contains("13 of 13 checks passed"));
    assert!(dir.path().join("gradcheck.json").exists());
}

#[test]
fn train_predict_evaluate_pipeline() {
    let ws = Workspace::new();
    assert_eq!(ws.synth("data", &[]).code, 0);

    let r = ws.train("run", &["data/R1", "data/R2"], &[]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(r.stdout.contains("from 2 region(s)"));
    for f in ["best/checkpoint.json", "final/checkpoint.json", "log.jsonl", "history.csv", RESOLVED_CONFIG] {
        assert!(ws.p("run").join(f).exists(), "{f}");
    }
    let history = fs::read_to_string(ws.p("run/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);

    // same config and seed: identical log
    assert_eq!(ws.train("run2", &["data/R1", "data/R2"], &[]).code, 0);
    assert_eq!(fs::read(ws.p("run/log.jsonl")).unwrap(), fs::read(ws.p("run2/log.jsonl")).unwrap());

    // the fine-tune adds exactly one cycle
    assert_eq!(ws.train("run3", &["data/R1", "data/R2"], &["--finetune-on-val"]).code, 0);
    let h3 = fs::read_to_string(ws.p("run3/history.csv")).unwrap();
    assert_eq!(h3.lines().count(), 4);
    assert!(h3.lines().last().unwrap().starts_with("3,true,"));

    let ckpt = ws.p("run/final");
    let predict = |out: &str, extra: &[&str]| {
        let o = ws.p(out);
        let d = ws.p("data/R1");
        let mut args = vec!["predict", "--ckpt", s(&ckpt), "--data", s(&d), "--out", s(&o), "--config", s(&ws.config)];
        args.extend_from_slice(extra);
        vw4c(&args)
    };
    assert_eq!(predict("p1", &["--pgm", "1"]).code, 0);
    assert_eq!(predict("p2", &[]).code, 0);
    let (m, v1) = read_predictions(&ws.p("p1")).unwrap();
    let (_, v2) = read_predictions(&ws.p("p2")).unwrap();
    assert_eq!(v1, v2);
    assert_eq!(m.shape, [m.windows.len(), 128, 8, 8]);
    let (w, h, px) = read_pgm(&ws.p("p1/images/w0000_temperature_t01.pgm")).unwrap();
    assert_eq!((w, h, px.len()), (8, 8, 64));
    assert_eq!(fs::read_dir(ws.p("p1/images")).unwrap().count(), 128);

    assert_eq!(predict("ens", &["--ensemble", "3"]).code, 0);
    for k in 0..3 {
        let (shape, _) = blob::read_values(&ws.p(&format!("ens/member_{k}/predictions.vw4c"))).unwrap();
        assert_eq!(shape, m.shape.to_vec());
    }
    let (_, mean) = blob::read_values(&ws.p("ens/mean/predictions.vw4c")).unwrap();
    let (_, std) = blob::read_values(&ws.p("ens/std/predictions.vw4c")).unwrap();
    let (_, top) = read_predictions(&ws.p("ens")).unwrap();
    assert_eq!(mean, top);
    assert!(std.iter().all(|&v| v >= 0.0));

    let d1 = ws.p("data/R1");
    let p1 = ws.p("p1");
    let plain = vw4c(&["evaluate", "--pred", s(&p1), "--data", s(&d1), "--format", "csv"]);
    let with = vw4c(&["evaluate", "--pred", s(&p1), "--data", s(&d1), "--format", "csv", "--baselines"]);
    assert_eq!((plain.code, with.code), (0, 0));
    assert_eq!(with.stdout.lines().count(), plain.stdout.lines().count() + 2);
    assert!(with.stdout.contains("mean baseline") && with.stdout.contains("persistence baseline"));

    let eval_out = ws.p("eval");
    let r = vw4c(&["evaluate", "--pred", s(&p1), "--data", s(&d1), "--out", s(&eval_out)]);
    assert_eq!(r.code, 0);
    assert!(eval_out.join("report.csv").exists() && eval_out.join("leadtime.csv").exists());

    // predictions scored against the wrong region
    let d2 = ws.p("data/R2");
    assert_eq!(vw4c(&["evaluate", "--pred", s(&p1), "--data", s(&d2)]).code, 2);

    // a corrupted prediction blob
    let blob_path = ws.p("p2/predictions.vw4c");
    let mut bytes = fs::read(&blob_path).unwrap();
    bytes[40] ^= 0xff;
    fs::write(&blob_path, bytes).unwrap();
    let p2 = ws.p("p2");
    assert_eq!(vw4c(&["evaluate", "--pred", s(&p2), "--data", s(&d1)]).code, 3);
}

#[test]
fn predict_rejects_mismatched_features() {
    let ws = Workspace::new();
    assert_eq!(ws.synth("data", &[]).code, 0);
    assert_eq!(ws.train("run", &["data/R1"], &["--cycles-max", "1"]).code, 0);
    fs::write(ws.p("alt.json"), r#"{"features": {"use_ctth_alt": true}, "split": {"validation_days": 1, "test_days": 1}}"#).unwrap();
    let (c, d, o, a) = (ws.p("run/final"), ws.p("data/R1"), ws.p("pp"), ws.p("alt.json"));
    let r = vw4c(&["predict", "--ckpt", s(&c), "--data", s(&d), "--out", s(&o), "--config", s(&a)]);
    assert_eq!(r.code, 2);
}
