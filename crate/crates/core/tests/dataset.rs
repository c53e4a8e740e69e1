use std::fs;

use proptest::prelude::*;
use vw4c::dataset::{
    assemble_input, blob, extract_targets, interpolate_temporal, read_dataset, synth_generate, window_split,
    write_dataset, Channel, ChannelSeries, FeatureSpec, SynthConfig, DATASET_MANIFEST, INPUT_FRAMES,
};
use vw4c::Error;

fn small(size: usize, frames: usize, days: usize, rate: f64) -> SynthConfig {
    SynthConfig {
        size,
        days,
        frames_per_day: frames,
        missing_rate: rate,
        region_index: 0,
    }
}

#[test]
fn default_input_has_35_channels_with_statics_last() {
    let ds = synth_generate(&small(8, 36, 1, 0.0), 1).unwrap();
    let spec = FeatureSpec::default();
    let frames: Vec<_> = (0..INPUT_FRAMES).map(|t| ds.days[0].frame(t)).collect();
    let x = assemble_input(&frames, &ds.statics, 8, 8, &ds.catalog, &spec).unwrap();
    assert_eq!(x.shape(), [1, 35, 8, 8]);
    let alt = ds.catalog.statics[0].clone();
    for (o, &v) in x.plane(0, 32).iter().zip(&ds.statics[0]) {
        assert!((o - alt.normalize(v as f64)).abs() < 1e-12);
    }
    // frame 1, feature 0 is temperature
    let temp = &ds.catalog.dynamic[Channel::Temperature.index()];
    let (vals, _) = ds.days[0].channel(Channel::Temperature).frame(1);
    for (o, &v) in x.plane(0, 8).iter().zip(vals) {
        assert!((o - temp.normalize(v as f64)).abs() < 1e-12);
    }
    // ctth_tempe_mask is all ones without gaps
    assert!(x.plane(0, 7).iter().all(|&v| v == 1.0));
}

#[test]
fn missing_temperature_frame_zeroes_value_and_mask_channels() {
    let mut ds = synth_generate(&small(8, 36, 1, 0.0), 1).unwrap();
    let plane = 64;
    let temp = ds.days[0].channel_mut(Channel::Temperature);
    temp.valid[2 * plane..3 * plane].iter_mut().for_each(|m| *m = false);
    let spec = FeatureSpec::default();
    let frames: Vec<_> = (0..INPUT_FRAMES).map(|t| ds.days[0].frame(t)).collect();
    let x = assemble_input(&frames, &ds.statics, 8, 8, &ds.catalog, &spec).unwrap();
    assert!(x.plane(0, 2 * 8).iter().all(|&v| v == 0.0));
    assert!(x.plane(0, 2 * 8 + 7).iter().all(|&v| v == 0.0));
    assert!(x.plane(0, 8 + 7).iter().all(|&v| v == 1.0));
}

#[test]
fn ctth_alt_spec_gives_39_channels() {
    let ds = synth_generate(&small(8, 36, 1, 0.0), 1).unwrap();
    let spec = FeatureSpec {
        use_ctth_alt: true,
        ..FeatureSpec::default()
    };
    let frames: Vec<_> = (0..INPUT_FRAMES).map(|t| ds.days[0].frame(t)).collect();
    let x = assemble_input(&frames, &ds.statics, 8, 8, &ds.catalog, &spec).unwrap();
    assert_eq!(x.channels(), 39);
}

#[test]
fn wrong_frame_count_or_grid_is_rejected() {
    let ds = synth_generate(&small(8, 36, 1, 0.0), 1).unwrap();
    let spec = FeatureSpec::default();
    let frames: Vec<_> = (0..3).map(|t| ds.days[0].frame(t)).collect();
    assert!(assemble_input(&frames, &ds.statics, 8, 8, &ds.catalog, &spec).is_err());
    let frames: Vec<_> = (0..4).map(|t| ds.days[0].frame(t)).collect();
    assert!(assemble_input(&frames, &ds.statics, 4, 4, &ds.catalog, &spec).is_err());
}

#[test]
fn targets_are_t_major_and_masked() {
    let mut ds = synth_generate(&small(8, 40, 1, 0.0), 2).unwrap();
    let plane = 64;
    let cma = ds.days[0].channel_mut(Channel::Cma);
    cma.valid[5 * plane..6 * plane].iter_mut().for_each(|m| *m = false);
    let frames: Vec<_> = (4..36).map(|t| ds.days[0].frame(t)).collect();
    let (y, mask) = extract_targets(&frames, 8, 8, &ds.catalog).unwrap();
    assert_eq!(y.shape(), [1, 128, 8, 8]);
    // frame 5 is lead time 1; cma is variable 3
    assert!(mask.plane(0, 4 + 3).iter().all(|&m| !m));
    assert_eq!(mask.count_valid(), 128 * 64 - 64);
    let info = &ds.catalog.dynamic[Channel::CrrIntensity.index()];
    let (raw, _) = ds.days[0].channel(Channel::CrrIntensity).frame(4 + 7);
    for (o, &v) in y.plane(0, 7 * 4 + 1).iter().zip(raw) {
        assert!((info.denormalize(*o) - v as f64).abs() < 1e-9);
    }
}

#[test]
fn windows_stay_within_days() {
    let ds = synth_generate(&small(8, 40, 3, 0.1), 3).unwrap();
    let spec = FeatureSpec::default();
    let windows = window_split(&ds, &spec, 2).unwrap();
    assert_eq!(windows.len(), 3 * 3);
    let starts: Vec<(u32, usize)> = windows.iter().map(|w| (w.provenance.day, w.provenance.start)).collect();
    assert_eq!(starts[..3], [(0, 0), (0, 2), (0, 4)]);
    assert!(windows.iter().all(|w| w.provenance.start + 36 <= 40));
    assert!(window_split(&ds, &spec, 0).is_err());

    let short = synth_generate(&small(8, 35, 2, 0.0), 3).unwrap();
    assert!(window_split(&short, &spec, 1).unwrap().is_empty());
}

#[test]
fn window_masks_follow_source_validity() {
    let ds = synth_generate(&small(8, 36, 1, 0.3), 4).unwrap();
    let w = &window_split(&ds, &FeatureSpec::default(), 1).unwrap()[0];
    for t in 0..32 {
        let (_, valid) = ds.days[0].channel(Channel::Temperature).frame(4 + t);
        assert_eq!(w.target_mask.plane(0, t * 4), valid);
    }
    let (_, last) = ds.days[0].channel(Channel::Cma).frame(3);
    for (v, &m) in w.last_observed.plane(0, 3).iter().zip(last) {
        if !m {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn interpolation_flag_fills_interior_temperature_only() {
    let mut ds = synth_generate(&small(4, 36, 1, 0.0), 5).unwrap();
    let plane = 16;
    let temp = ds.days[0].channel_mut(Channel::Temperature);
    temp.valid[plane..2 * plane].iter_mut().for_each(|m| *m = false);
    let spec = FeatureSpec {
        interpolate_temperature: true,
        ..FeatureSpec::default()
    };
    let w = &window_split(&ds, &spec, 1).unwrap()[0];
    // frame 1 temperature is interpolated, its mask channel still reports the gap
    assert!(w.input.plane(0, 8).iter().all(|&v| v != 0.0));
    assert!(w.input.plane(0, 8 + 7).iter().all(|&v| v == 0.0));
}

fn scanline_oracle(values: &[f32], valid: &[bool]) -> (Vec<f32>, Vec<bool>) {
    let mut v = values.to_vec();
    let mut m = valid.to_vec();
    for t in 0..values.len() {
        if valid[t] {
            continue;
        }
        let before = (0..t).rev().find(|&k| valid[k]);
        let after = (t + 1..values.len()).find(|&k| valid[k]);
        if let (Some(a), Some(b)) = (before, after) {
            let frac = (t - a) as f64 / (b - a) as f64;
            v[t] = (values[a] as f64 + (values[b] as f64 - values[a] as f64) * frac) as f32;
            m[t] = true;
        }
    }
    (v, m)
}

proptest! {
    #[test]
    fn interpolation_matches_scanline_oracle(
        frames in 1usize..20,
        seed_vals in prop::collection::vec(-100.0f32..100.0, 60),
        seed_mask in prop::collection::vec(any::<bool>(), 60),
    ) {
        let plane = 3;
        let n = frames * plane;
        let series = ChannelSeries { frames, values: seed_vals[..n].to_vec(), valid: seed_mask[..n].to_vec() };
        let out = interpolate_temporal(&series);
        for p in 0..plane {
            let vals: Vec<f32> = (0..frames).map(|t| series.values[t * plane + p]).collect();
            let mask: Vec<bool> = (0..frames).map(|t| series.valid[t * plane + p]).collect();
            let (ov, om) = scanline_oracle(&vals, &mask);
            for t in 0..frames {
                prop_assert_eq!(out.valid[t * plane + p], om[t]);
                prop_assert_eq!(out.values[t * plane + p].to_bits(), ov[t].to_bits());
                if mask[t] {
                    prop_assert_eq!(out.values[t * plane + p].to_bits(), vals[t].to_bits());
                }
            }
        }
    }

    #[test]
    fn zero_fill_matches_select(vals in prop::collection::vec(-1e3f64..1e3, 0..50), bits in any::<u64>()) {
        let mask: Vec<bool> = (0..vals.len()).map(|i| bits >> (i % 64) & 1 == 1).collect();
        let out = vw4c::dataset::zero_fill(&vals, &mask).unwrap();
        for i in 0..vals.len() {
            prop_assert_eq!(out[i], if mask[i] { vals[i] } else { 0.0 });
        }
    }

    #[test]
    fn input_channel_count_matches_spec(use_alt in any::<bool>(), drop in 0usize..8, one_hot in any::<bool>()) {
        let mut spec = FeatureSpec { use_ctth_alt: use_alt, ..FeatureSpec::default() };
        spec.dynamic.remove(drop);
        if one_hot { spec.ct_encoding = vw4c::dataset::CtEncoding::OneHot; }
        let ds = synth_generate(&small(4, 36, 1, 0.0), 1).unwrap();
        let frames: Vec<_> = (0..4).map(|t| ds.days[0].frame(t)).collect();
        let x = assemble_input(&frames, &ds.statics, 4, 4, &ds.catalog, &spec).unwrap();
        prop_assert_eq!(x.channels(), spec.input_channels());
        prop_assert_eq!(spec.channel_names().len(), spec.input_channels());
    }
}

#[test]
fn write_read_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_generate(&small(8, 12, 2, 0.2), 7).unwrap();
    let manifest = write_dataset(&ds, dir.path()).unwrap();
    assert_eq!(manifest.frame_count(), 24);
    let back = read_dataset(dir.path()).unwrap();
    assert_eq!(back, ds);
    for (a, b) in back.days.iter().zip(&ds.days) {
        for (sa, sb) in a.channels.iter().zip(&b.channels) {
            assert!(sa.values.iter().zip(&sb.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

#[test]
fn same_seed_writes_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ds = synth_generate(&small(6, 8, 1, 0.1), 11).unwrap();
    write_dataset(&ds, a.path()).unwrap();
    write_dataset(&synth_generate(&small(6, 8, 1, 0.1), 11).unwrap(), b.path()).unwrap();
    for name in [DATASET_MANIFEST, "days/day000/cma.vw4c", "days/day000/cma.vw4m", "statics/altitude.vw4c"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn corrupted_byte_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&synth_generate(&small(6, 8, 1, 0.0), 1).unwrap(), dir.path()).unwrap();
    let path = dir.path().join("days/day000/temperature.vw4c");
    let mut bytes = fs::read(&path).unwrap();
    bytes[40] ^= 0xff;
    fs::write(&path, bytes).unwrap();
    let err = read_dataset(dir.path()).unwrap_err();
    assert!(matches!(&err, Error::Checksum { path: p, .. } if p.ends_with("temperature.vw4c")), "{err}");
    assert!(err.to_string().contains("temperature.vw4c"));
}

#[test]
fn missing_file_and_version_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&synth_generate(&small(6, 8, 1, 0.0), 1).unwrap(), dir.path()).unwrap();
    fs::remove_file(dir.path().join("days/day000/ct.vw4m")).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(Error::MissingFile(p)) if p.ends_with("ct.vw4m")));

    let dir = tempfile::tempdir().unwrap();
    write_dataset(&synth_generate(&small(6, 8, 1, 0.0), 1).unwrap(), dir.path()).unwrap();
    let mpath = dir.path().join(DATASET_MANIFEST);
    let text = fs::read_to_string(&mpath).unwrap().replace("\"format_version\": 1", "\"format_version\": 9");
    fs::write(&mpath, text).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(Error::Version { found: 9, .. })));
}

#[test]
fn manifest_shape_disagreeing_with_blob_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_generate(&small(6, 8, 1, 0.0), 1).unwrap();
    write_dataset(&ds, dir.path()).unwrap();
    // overwrite one blob with a valid file of a different frame count
    let plane = 36;
    blob::write_values(&dir.path().join("days/day000/cma.vw4c"), &[7, 6, 6], &vec![0.0; 7 * plane]).unwrap();
    let mpath = dir.path().join(DATASET_MANIFEST);
    let mut manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&mpath).unwrap()).unwrap();
    let bytes = fs::read(dir.path().join("days/day000/cma.vw4c")).unwrap();
    let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    manifest["days"][0]["channels"][6]["values"]["crc32"] = crc.into();
    fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(Error::Validation(_))));

    let mut m2 = manifest.clone();
    m2["days"][0]["channels"].as_array_mut().unwrap().pop();
    fs::write(&mpath, serde_json::to_string(&m2).unwrap()).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(Error::Validation(_))));
}
