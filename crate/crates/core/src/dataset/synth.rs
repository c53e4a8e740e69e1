//! Deterministic synthetic regions.
//!
//! Each day carries two smooth latent fields built from Gaussian blobs that
//! drift with a common per-day velocity and grow and decay over a few hours:
//! a cloud field `C` and a turbulence field `D`. Every product is a fixed
//! function of them and of the statics:
//!
//! * temperature: a climatology falling with latitude and altitude plus a
//!   diurnal cycle, cooled by `80 * tanh(C)` K
//! * cma: `C > 0.3`; ct: `C` binned into 5 classes
//! * ctth_pres / ctth_alt: monotone in `tanh(C)`
//! * crr_intensity: `6 * clamp((C - 0.8) / 0.8, 0, 1)^2` mm/h, sparse
//! * crr_accum: mean crr_intensity over the current and 3 previous frames
//! * asii_turb_trop_prob: `0.4 * logistic(6 (D - 0.5))`
//!
//! Amplitudes are chosen so that, under the default variable weights, each
//! target contributes a comparable share of the mean baseline's score.
//!
//! Missing data are rectangles: each (frame, channel) independently loses a
//! random rectangle with probability `missing_rate`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dataset::channels::{Channel, ChannelCatalog, StaticChannel};
use crate::dataset::region::{ChannelSeries, DayRecord, RegionDataset, MAX_FRAMES_PER_DAY};
use crate::error::{config_err, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Grid side length in pixels.
    pub size: usize,
    pub days: usize,
    pub frames_per_day: usize,
    pub missing_rate: f64,
    /// Selects the region's location; region ids are `R{index + 1}`.
    pub region_index: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 32,
            days: 20,
            frames_per_day: MAX_FRAMES_PER_DAY,
            missing_rate: 0.05,
            region_index: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(config_err!("synthetic grid size must be at least 2, got {}", self.size));
        }
        if self.frames_per_day == 0 || self.frames_per_day > MAX_FRAMES_PER_DAY {
            return Err(config_err!(
                "frames_per_day must be in 1..={MAX_FRAMES_PER_DAY}, got {}",
                self.frames_per_day
            ));
        }
        if !(0.0..=1.0).contains(&self.missing_rate) {
            return Err(config_err!("missing rate must be in [0, 1], got {}", self.missing_rate));
        }
        Ok(())
    }
}

struct Blob {
    x: f64,
    y: f64,
    radius: f64,
    amplitude: f64,
    peak: f64,
    lifetime: f64,
}

impl Blob {
    fn draw(rng: &mut RngStream, size: f64, scale: f64, frames: f64, amp: (f64, f64)) -> Self {
        Self {
            x: rng.uniform_range(0.0, size),
            y: rng.uniform_range(0.0, size),
            radius: rng.uniform_range(2.5, 6.0) * scale,
            amplitude: rng.uniform_range(amp.0, amp.1),
            peak: rng.uniform_range(-0.25 * frames, 1.25 * frames),
            lifetime: rng.uniform_range(8.0, 24.0),
        }
    }
}

/// Shortest signed distance on a periodic axis of length `size`.
fn wrap(d: f64, size: f64) -> f64 {
    d - size * (d / size).round()
}

fn blob_field(blobs: &[Blob], velocity: (f64, f64), t: f64, size: usize, out: &mut [f64]) {
    let s = size as f64;
    out.iter_mut().for_each(|v| *v = 0.0);
    for b in blobs {
        let life = ((t - b.peak) / b.lifetime).powi(2);
        if life > 30.0 {
            continue;
        }
        let amp = b.amplitude * (-life).exp();
        let cx = b.x + velocity.0 * t;
        let cy = b.y + velocity.1 * t;
        let inv = 1.0 / (2.0 * b.radius * b.radius);
        for y in 0..size {
            let dy = wrap(y as f64 + 0.5 - cy, s);
            for x in 0..size {
                let dx = wrap(x as f64 + 0.5 - cx, s);
                out[y * size + x] += amp * (-(dx * dx + dy * dy) * inv).exp();
            }
        }
    }
}

fn statics(cfg: &SynthConfig, rng: &mut RngStream) -> Vec<Vec<f32>> {
    let n = cfg.size;
    let s = n as f64;
    let scale = s / 32.0;
    let lat0 = 36.0 + 7.0 * (cfg.region_index % 4) as f64;
    let lon0 = -8.0 + 11.0 * cfg.region_index as f64;
    let span = 8.0;
    let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.uniform_range(0.0, s),
                rng.uniform_range(0.0, s),
                rng.uniform_range(4.0, 10.0) * scale,
                rng.uniform_range(300.0, 2500.0),
            )
        })
        .collect();
    let mut alt = vec![0.0f32; n * n];
    let mut lat = vec![0.0f32; n * n];
    let mut lon = vec![0.0f32; n * n];
    for y in 0..n {
        for x in 0..n {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let h: f64 = 100.0
                + bumps
                    .iter()
                    .map(|&(bx, by, r, a)| a * (-((fx - bx).powi(2) + (fy - by).powi(2)) / (2.0 * r * r)).exp())
                    .sum::<f64>();
            alt[y * n + x] = h.clamp(0.0, 4000.0) as f32;
            lat[y * n + x] = (lat0 + span * (1.0 - fy / s)) as f32;
            lon[y * n + x] = (lon0 + span * fx / s) as f32;
        }
    }
    let mut out = vec![Vec::new(); StaticChannel::ALL.len()];
    out[StaticChannel::Altitude.index()] = alt;
    out[StaticChannel::Latitude.index()] = lat;
    out[StaticChannel::Longitude.index()] = lon;
    out
}

fn cloud_type(c: f64) -> f32 {
    match c {
        c if c < 0.3 => 0.0,
        c if c < 0.6 => 1.0,
        c if c < 0.9 => 2.0,
        c if c < 1.2 => 3.0,
        _ => 4.0,
    }
}

fn generate_day(cfg: &SynthConfig, day: usize, statics: &[Vec<f32>], rng: &mut RngStream) -> DayRecord {
    let n = cfg.size;
    let plane = n * n;
    let frames = cfg.frames_per_day;
    let s = n as f64;
    let scale = s / 32.0;
    let mut fields = rng.fork();
    let mut holes = rng.fork();

    let speed = fields.uniform_range(0.05, 0.25) * scale;
    let angle = fields.uniform_range(0.0, 2.0 * PI);
    let velocity = (speed * angle.cos(), speed * angle.sin());
    let clouds: Vec<Blob> = (0..14)
        .map(|_| Blob::draw(&mut fields, s, scale, frames as f64, (0.6, 1.4)))
        .collect();
    let turbulence: Vec<Blob> = (0..8)
        .map(|_| Blob::draw(&mut fields, s, scale, frames as f64, (0.4, 1.2)))
        .collect();

    let mut channels: Vec<ChannelSeries> = Channel::ALL.iter().map(|_| ChannelSeries::new(frames, plane)).collect();
    let alt = &statics[StaticChannel::Altitude.index()];
    let lat = &statics[StaticChannel::Latitude.index()];
    let mut c_field = vec![0.0; plane];
    let mut d_field = vec![0.0; plane];
    for t in 0..frames {
        let tf = t as f64;
        blob_field(&clouds, velocity, tf, n, &mut c_field);
        blob_field(&turbulence, velocity, tf, n, &mut d_field);
        let diurnal = 4.0 * (2.0 * PI * (tf / MAX_FRAMES_PER_DAY as f64 - 0.3)).sin();
        for p in 0..plane {
            let c = c_field[p];
            let cover = c.tanh();
            let clim = 295.0 - 0.6 * (lat[p] as f64 - 40.0) - 0.0065 * alt[p] as f64 + diurnal;
            let rain = 6.0 * ((c - 0.8) / 0.8).clamp(0.0, 1.0).powi(2);
            let i = t * plane + p;
            let mut set = |ch: Channel, v: f64| channels[ch.index()].values[i] = v as f32;
            set(Channel::Temperature, (clim - 80.0 * cover).clamp(200.0, 320.0));
            set(Channel::CtthPres, (1000.0 - 750.0 * cover).clamp(100.0, 1000.0));
            set(Channel::CtthAlt, 12_000.0 * cover);
            set(Channel::CrrIntensity, rain);
            set(Channel::AsiiTurbTropProb, 0.4 / (1.0 + (-6.0 * (d_field[p] - 0.5)).exp()));
            set(Channel::Cma, if c > 0.3 { 1.0 } else { 0.0 });
            channels[Channel::Ct.index()].values[i] = cloud_type(c);
        }
    }
    for t in 0..frames {
        let lo = t.saturating_sub(3);
        for p in 0..plane {
            let rain = &channels[Channel::CrrIntensity.index()].values;
            let sum: f64 = (lo..=t).map(|k| rain[k * plane + p] as f64).sum();
            channels[Channel::CrrAccum.index()].values[t * plane + p] = (sum / (t - lo + 1) as f64) as f32;
        }
    }

    if cfg.missing_rate > 0.0 {
        let (min_side, max_side) = ((n / 8).max(1), (n / 2).max(1));
        for series in channels.iter_mut() {
            for t in 0..frames {
                if holes.uniform() >= cfg.missing_rate {
                    continue;
                }
                let h = min_side + holes.below(max_side - min_side + 1);
                let w = min_side + holes.below(max_side - min_side + 1);
                let y0 = holes.below(n - h + 1);
                let x0 = holes.below(n - w + 1);
                for y in y0..y0 + h {
                    for x in x0..x0 + w {
                        let i = t * plane + y * n + x;
                        series.valid[i] = false;
                        series.values[i] = 0.0;
                    }
                }
            }
        }
    }

    DayRecord {
        day: day as u32,
        frames,
        channels,
    }
}

/// Generates one region; identical `(cfg, seed)` give bit-identical output.
pub fn synth_generate(cfg: &SynthConfig, seed: u64) -> Result<RegionDataset> {
    cfg.validate()?;
    let mut rng = RngStream::new(seed);
    let statics = statics(cfg, &mut rng.fork());
    let days = (0..cfg.days)
        .map(|d| generate_day(cfg, d, &statics, &mut rng.fork()))
        .collect();
    Ok(RegionDataset {
        region_id: format!("R{}", cfg.region_index + 1),
        height: cfg.size,
        width: cfg.size,
        catalog: ChannelCatalog::default(),
        statics,
        days,
    })
}

/// Generates `regions` regions; region `i` uses seed `seed + i`.
pub fn synth_regions(cfg: &SynthConfig, regions: usize, seed: u64) -> Result<Vec<RegionDataset>> {
    (0..regions)
        .map(|i| {
            let cfg = SynthConfig {
                region_index: i,
                ..cfg.clone()
            };
            synth_generate(&cfg, seed.wrapping_add(i as u64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(rate: f64) -> SynthConfig {
        SynthConfig {
            size: 16,
            days: 2,
            frames_per_day: 40,
            missing_rate: rate,
            region_index: 1,
        }
    }

    #[test]
    fn deterministic_by_seed() {
        let a = synth_generate(&small(0.1), 5).unwrap();
        let b = synth_generate(&small(0.1), 5).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&small(0.1), 6).unwrap();
        assert_ne!(a, c);
        a.validate().unwrap();
    }

    #[test]
    fn zero_rate_means_full_masks() {
        let ds = synth_generate(&small(0.0), 1).unwrap();
        assert!(ds.days.iter().all(|d| d.channels.iter().all(|s| s.valid.iter().all(|&m| m))));
    }

    #[test]
    fn missingness_does_not_change_fields() {
        let a = synth_generate(&small(0.0), 3).unwrap();
        let b = synth_generate(&small(0.5), 3).unwrap();
        let (sa, sb) = (a.days[0].channel(Channel::Temperature), b.days[0].channel(Channel::Temperature));
        let mut holes = 0;
        for i in 0..sa.values.len() {
            if sb.valid[i] {
                assert_eq!(sa.values[i], sb.values[i]);
            } else {
                holes += 1;
            }
        }
        assert!(holes > 0);
    }

    #[test]
    fn value_ranges() {
        let ds = synth_generate(&small(0.2), 9).unwrap();
        for day in &ds.days {
            let vals = |c: Channel| day.channel(c).values.clone();
            assert!(vals(Channel::Cma).iter().all(|&v| v == 0.0 || v == 1.0));
            assert!(vals(Channel::CrrIntensity).iter().all(|&v| (0.0..=50.0).contains(&v)));
            assert!(vals(Channel::AsiiTurbTropProb).iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(vals(Channel::Ct).iter().all(|&v| v.fract() == 0.0 && (0.0..=4.0).contains(&v)));
            let temp = day.channel(Channel::Temperature);
            assert!(temp
                .values
                .iter()
                .zip(&temp.valid)
                .all(|(&v, &m)| !m || (200.0..=320.0).contains(&v)));
        }
        assert!(ds.days.iter().any(|d| d.channel(Channel::Cma).values.iter().any(|&v| v == 1.0)));
    }
}
