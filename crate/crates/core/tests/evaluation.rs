use proptest::prelude::*;
use vw4c::dataset::{synth_generate, window_split, Channel, FeatureSpec, Provenance, SampleWindow, SynthConfig};
use vw4c::evaluation::{
    mean_baseline, persistence_baseline, report, score, score_windows, ReportFormat, ReportRow, ScoreReport,
    REPORT_COLUMNS,
};
use vw4c::losses::{masked_l2, VariableWeights, LEAD_TIMES, NUM_TARGETS};
use vw4c::{Error, Grid4D, Mask4D, RngStream};

fn synth(size: usize, frames: usize, days: usize, rate: f64, seed: u64) -> vw4c::dataset::RegionDataset {
    let cfg = SynthConfig {
        size,
        days,
        frames_per_day: frames,
        missing_rate: rate,
        region_index: 0,
    };
    synth_generate(&cfg, seed).unwrap()
}

fn random_case(batch: usize, seed: u64) -> (Grid4D, Grid4D, Mask4D) {
    let mut rng = RngStream::new(seed);
    let shape = [batch, 128, 4, 4];
    let pred = Grid4D::random_normal(shape, &mut rng);
    let target = Grid4D::random_normal(shape, &mut rng);
    let mask = Mask4D::from_vec(shape, (0..pred.len()).map(|_| rng.uniform() < 0.7).collect()).unwrap();
    (pred, target, mask)
}

fn w() -> VariableWeights {
    VariableWeights::default()
}

#[test]
fn perfect_prediction_scores_zero() {
    let (pred, _, mask) = random_case(3, 1);
    let r = score(&[pred.clone()], &[pred], &[mask], &w()).unwrap();
    assert_eq!(r.aggregate, 0.0);
    assert_eq!(r.per_leadtime, vec![0.0; LEAD_TIMES]);
}

#[test]
fn constant_temperature_offset() {
    let shape = [1, 128, 4, 4];
    let mut pred = Grid4D::zeros(shape);
    for t in 0..LEAD_TIMES {
        pred.plane_mut(0, t * NUM_TARGETS).fill(1.0);
    }
    let r = score(&[pred], &[Grid4D::zeros(shape)], &[Mask4D::filled(shape, true)], &w()).unwrap();
    assert!((r.aggregate - 7.9025).abs() < 1e-9);
    assert!((r.per_variable[0] - 7.9025).abs() < 1e-9);
    assert!(r.per_leadtime.iter().all(|&v| (v - 7.9025).abs() < 1e-9));
    assert_eq!(r.coverage, [1.0; NUM_TARGETS]);
}

#[test]
fn score_matches_training_l2() {
    for batch in [1, 3] {
        let (pred, target, mask) = random_case(batch, 10 + batch as u64);
        let l2 = masked_l2(&pred, &target, &mask, &w()).unwrap();
        let r = score(&[pred], &[target], &[mask], &w()).unwrap();
        assert!((r.aggregate - l2.value).abs() <= 1e-12 * l2.value.abs(), "{} vs {}", r.aggregate, l2.value);
        for v in 0..NUM_TARGETS {
            assert!((r.per_variable[v] - l2.per_variable[v]).abs() <= 1e-12 * l2.value);
        }
        assert_eq!(r.samples, batch);
    }
}

#[test]
fn breakdowns_are_consistent() {
    let (pred, target, mask) = random_case(2, 5);
    let r = score(&[pred], &[target], &[mask], &w()).unwrap();
    let pv: f64 = r.per_variable.iter().sum();
    let pl: f64 = r.per_leadtime.iter().sum::<f64>() / LEAD_TIMES as f64;
    assert!((pv - r.aggregate).abs() < 1e-12 * r.aggregate);
    assert!((pl - r.aggregate).abs() < 1e-12 * r.aggregate);
}

#[test]
fn empty_and_mismatched_inputs() {
    assert!(matches!(score(&[], &[], &[], &w()), Err(Error::Empty(_))));
    let (p, t, m) = random_case(1, 3);
    assert!(matches!(score(&[p.clone()], &[], &[m.clone()], &w()), Err(Error::Config(_))));
    let small = Grid4D::zeros([1, 128, 2, 2]);
    assert!(matches!(score(&[small], &[t.clone()], &[m.clone()], &w()), Err(Error::Config(_))));
    let odd = Grid4D::zeros([1, 6, 4, 4]);
    assert!(matches!(score(&[odd.clone()], &[odd], &[Mask4D::filled([1, 6, 4, 4], true)], &w()), Err(Error::Config(_))));
    assert!(score(&[p], &[t], &[m], &w()).is_ok());
}

fn window_with(last: Grid4D, target: Grid4D, mask: Mask4D) -> SampleWindow {
    let s = target.shape();
    SampleWindow {
        input: Grid4D::zeros([1, 35, s[2], s[3]]),
        target,
        target_mask: mask,
        last_observed: last,
        provenance: Provenance {
            region: "R1".into(),
            day: 0,
            start: 0,
        },
    }
}

#[test]
fn persistence_is_exact_on_a_static_scene() {
    let mut rng = RngStream::new(4);
    let last = Grid4D::random_normal([1, 4, 5, 5], &mut rng);
    let mut target = Grid4D::zeros([1, 128, 5, 5]);
    for c in 0..128 {
        target.plane_mut(0, c).copy_from_slice(last.plane(0, c % 4));
    }
    let win = window_with(last, target.clone(), Mask4D::filled(target.shape(), true));
    let pred = persistence_baseline(&win);
    assert_eq!(pred, target);
    assert_eq!(score_windows(&[pred], &[win], &w()).unwrap().aggregate, 0.0);
}

#[test]
fn persistence_error_grows_with_lead_time() {
    let ds = synth(16, 96, 2, 0.0, 21);
    let wins = window_split(&ds, &FeatureSpec::default(), 1).unwrap();
    assert!(wins.len() >= 100);
    let preds: Vec<Grid4D> = wins.iter().map(persistence_baseline).collect();
    let r = score_windows(&preds, &wins, &w()).unwrap();
    for t in 1..LEAD_TIMES {
        assert!(r.per_leadtime[t] >= r.per_leadtime[t - 1], "lead {t}: {:?}", r.per_leadtime);
    }
}

#[test]
fn mean_baseline_averages_valid_frames() {
    let mut ds = synth(4, 4, 1, 0.0, 3);
    let info = ds.catalog.dynamic(Channel::Temperature).clone();
    let series = ds.days[0].channel_mut(Channel::Temperature);
    series.valid.fill(false);
    // pixel 0 observed twice at 210 K and 220 K; pixel 1 constant 250 K with gaps
    for (t, v) in [(0, 210.0), (2, 220.0)] {
        series.values[t * 16] = v;
        series.valid[t * 16] = true;
    }
    for t in [0, 1, 3] {
        series.values[t * 16 + 1] = 250.0;
        series.valid[t * 16 + 1] = true;
    }
    let base = mean_baseline(std::slice::from_ref(&ds)).unwrap();
    let means = &base.regions["R1"].means[0];
    assert!((info.denormalize(means[0]) - 215.0).abs() < 1e-9);
    assert!((info.denormalize(means[1]) - 250.0).abs() < 1e-9);
    // never-observed pixels fall back to the regional mean
    let regional = (info.normalize(210.0) + info.normalize(220.0) + 3.0 * info.normalize(250.0)) / 5.0;
    assert!((means[5] - regional).abs() < 1e-12);

    let win = window_with(Grid4D::zeros([1, 4, 4, 4]), Grid4D::zeros([1, 128, 4, 4]), Mask4D::filled([1, 128, 4, 4], true));
    let pred = base.predict(&win).unwrap();
    for t in 0..LEAD_TIMES {
        assert_eq!(pred.plane(0, t * NUM_TARGETS), means.as_slice());
    }
    let mut other = win.clone();
    other.provenance.region = "R9".into();
    assert!(matches!(base.predict(&other), Err(Error::Config(_))));
    assert!(matches!(mean_baseline(&[]), Err(Error::Empty(_))));
}

fn sample_report(seed: u64) -> ScoreReport {
    let (p, t, m) = random_case(1, seed);
    score(&[p], &[t], &[m], &w()).unwrap()
}

#[test]
fn csv_report_round_trips() {
    let rows = vec![
        ReportRow {
            model: "vunet".into(),
            validation: Some(sample_report(1)),
            test: Some(sample_report(2)),
        },
        ReportRow {
            model: "mean, baseline".into(),
            validation: None,
            test: Some(sample_report(3)),
        },
    ];
    let text = report(&rows, ReportFormat::Csv).unwrap();
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), REPORT_COLUMNS.to_vec());
    let recs: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(recs.len(), 2);
    for (rec, row) in recs.iter().zip(&rows) {
        assert_eq!(&rec[0], row.model);
        let num = |i: usize| -> Option<f64> { (!rec[i].is_empty()).then(|| rec[i].parse().unwrap()) };
        assert_eq!(num(1), row.validation.as_ref().map(|r| r.aggregate));
        assert_eq!(num(2), row.test.as_ref().map(|r| r.aggregate));
        for v in 0..NUM_TARGETS {
            assert_eq!(num(3 + v), Some(row.test.as_ref().unwrap().per_variable[v]));
        }
    }
    let txt = report(&rows, ReportFormat::Text).unwrap();
    assert!(txt.contains("mean, baseline") && txt.contains("persistence baseline"));
}

#[test]
fn empty_report_is_header_only() {
    assert_eq!(report(&[], ReportFormat::Csv).unwrap(), format!("{}\n", REPORT_COLUMNS.join(",")));
    assert_eq!(report(&[], ReportFormat::Text).unwrap().lines().count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sample_order_barely_matters(seed in 0u64..1000, n in 2usize..6) {
        let cases: Vec<_> = (0..n).map(|i| random_case(1, seed * 10 + i as u64)).collect();
        let (mut p, mut t, mut m): (Vec<_>, Vec<_>, Vec<_>) = (vec![], vec![], vec![]);
        for (a, b, c) in &cases {
            p.push(a.clone());
            t.push(b.clone());
            m.push(c.clone());
        }
        let fwd = score(&p, &t, &m, &w()).unwrap();
        p.reverse();
        t.reverse();
        m.reverse();
        let rev = score(&p, &t, &m, &w()).unwrap();
        prop_assert!((fwd.aggregate - rev.aggregate).abs() <= 1e-12 * fwd.aggregate);
    }

    #[test]
    fn masked_pixels_never_change_the_score(seed in 0u64..10_000, fill in -1e6f64..1e6) {
        let (pred, target, mask) = random_case(1, seed);
        let base = score(&[pred.clone()], &[target.clone()], &[mask.clone()], &w()).unwrap();
        let (mut p2, mut t2) = (pred, target);
        for (i, &ok) in mask.as_slice().iter().enumerate() {
            if !ok {
                p2.as_mut_slice()[i] = fill;
                t2.as_mut_slice()[i] = -fill;
            }
        }
        let again = score(&[p2], &[t2], &[mask], &w()).unwrap();
        prop_assert_eq!(base.aggregate.to_bits(), again.aggregate.to_bits());
    }

    #[test]
    fn shrinking_the_mask_drops_exactly_the_removed_pixels(seed in 0u64..10_000, drop in 0.05f64..0.9) {
        let (pred, target, mask) = random_case(2, seed);
        let mut rng = RngStream::new(seed ^ 0xa5a5);
        let mut smaller = mask.clone();
        for v in smaller.as_mut_slice() {
            if *v && rng.uniform() < drop {
                *v = false;
            }
        }
        let got = score(&[pred.clone()], &[target.clone()], &[smaller.clone()], &w()).unwrap();
        // rebuild from per-pixel squared errors over the surviving pixels
        let [n, c, _, _] = pred.shape();
        let weights = w().in_channel_order();
        let mut expected = 0.0;
        for s in 0..n {
            for ch in 0..c {
                let keep = smaller.plane(s, ch);
                let count = keep.iter().filter(|&&k| k).count();
                if count == 0 {
                    continue;
                }
                let sse: f64 = pred.plane(s, ch).iter().zip(target.plane(s, ch)).zip(keep)
                    .filter(|(_, &k)| k)
                    .map(|((p, y), _)| (p - y) * (p - y))
                    .sum();
                expected += weights[ch % NUM_TARGETS] / count as f64 * sse / c as f64;
            }
        }
        expected /= n as f64;
        prop_assert!((got.aggregate - expected).abs() <= 1e-12 * expected.abs().max(1e-300));
        prop_assert!(smaller.count_valid() <= mask.count_valid());
    }
}
