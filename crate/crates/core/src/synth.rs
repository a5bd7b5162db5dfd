//! Synthetic container scenes for desk-scale experiments.
//!
//! A scene models the lid-mounted buzzer and microphone as a sparse impulse
//! response: a direct path followed by a flutter echo between lid and fill
//! surface. The first reflection arrives after a delay that shrinks linearly
//! as the container fills, its gain grows as the path shortens, and every
//! later echo alternates sign and shrinks by the material's flutter ratio.
//! Fractional delays are split linearly over the two neighbouring samples.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetMeta, LabeledDataset, LabeledRow};
use crate::dsp::{generate_stepped_sweep, RirPipeline, SampledSignal, SweepConfig, WindowKind};
use crate::error::{Error, Result};
use crate::seed::{child_rng, derive_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FillBucket {
    pub label: i32,
    /// Fill percentages generated for this bucket.
    pub fine_fills: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub name: String,
    /// Gain ratio between consecutive flutter echoes, in `[0, 1)`.
    pub flutter_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub sweep: SweepConfig,
    pub buckets: Vec<FillBucket>,
    /// Rows cycle through the materials in order.
    pub materials: Vec<Material>,
    pub direct_delay: usize,
    pub direct_gain: f64,
    /// First-reflection delay in samples for an empty container.
    pub delay_empty: f64,
    /// First-reflection delay in samples for a full container.
    pub delay_full: f64,
    /// Reflection gain is `(delay_full / delay) ^ gain_exponent`.
    pub gain_exponent: f64,
    pub ir_len: usize,
    pub snr_db: f64,
    /// Relative gain jitter, uniform in `±gain_jitter`.
    pub gain_jitter: f64,
    /// Delay jitter in samples, uniform in `±delay_jitter`.
    pub delay_jitter: f64,
    pub alpha: f64,
    pub window: WindowKind,
    /// Rotate each RIR so index 0 is the sweep onset.
    pub align: bool,
    /// Leading RIR samples kept per row.
    pub rir_samples: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let bucket = |label: i32, fills: [f64; 3]| FillBucket {
            label,
            fine_fills: fills.to_vec(),
        };
        SceneConfig {
            sweep: SweepConfig::default(),
            buckets: vec![
                bucket(0, [0.0, 5.0, 10.0]),
                bucket(25, [20.0, 25.0, 30.0]),
                bucket(50, [45.0, 50.0, 55.0]),
                bucket(75, [70.0, 75.0, 80.0]),
                bucket(100, [90.0, 95.0, 100.0]),
            ],
            materials: vec![
                Material {
                    name: "straw".into(),
                    flutter_ratio: 0.5,
                },
                Material {
                    name: "cardboard".into(),
                    flutter_ratio: 0.4,
                },
            ],
            direct_delay: 0,
            direct_gain: 0.1,
            delay_empty: 140.0,
            delay_full: 12.0,
            gain_exponent: 0.3,
            ir_len: 1000,
            snr_db: 20.0,
            gain_jitter: 0.03,
            delay_jitter: 0.25,
            alpha: 1.0,
            window: WindowKind::Hann,
            align: true,
            rir_samples: 512,
        }
    }
}

/// One impulse-response tap at a possibly fractional delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: f64,
    pub gain: f64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.sweep.validate()?;
        if self.buckets.is_empty() || self.materials.is_empty() {
            return bad("scene needs at least one bucket and one material".into());
        }
        let mut labels: Vec<i32> = self.buckets.iter().map(|b| b.label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("bucket labels must be distinct".into());
        }
        for b in &self.buckets {
            if b.fine_fills.is_empty() || b.fine_fills.iter().any(|f| !(0.0..=100.0).contains(f)) {
                return bad(format!(
                    "bucket {}: fine fills must be non-empty and within 0..=100",
                    b.label
                ));
            }
        }
        for m in &self.materials {
            if !(0.0..1.0).contains(&m.flutter_ratio) {
                return bad(format!("material {}: flutter_ratio must be in [0, 1)", m.name));
            }
        }
        if !(self.delay_full >= 1.0 && self.delay_full <= self.delay_empty) {
            return bad("need 1 <= delay_full <= delay_empty".into());
        }
        if !(0.0..1.0).contains(&self.gain_jitter) || !(0.0..=f64::INFINITY).contains(&self.delay_jitter) {
            return bad("jitter must be non-negative (gain jitter below 1)".into());
        }
        if self.delay_jitter >= self.delay_full {
            return bad("delay_jitter must be smaller than delay_full".into());
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return bad("snr_db must be a number above -inf".into());
        }
        if !(self.direct_gain.is_finite() && self.gain_exponent.is_finite() && self.gain_exponent >= 0.0) {
            return bad("direct_gain and gain_exponent must be finite, gain_exponent >= 0".into());
        }
        let tail = self.sweep.frame_len - self.sweep.end_sample;
        if self.ir_len == 0 || self.ir_len > tail {
            return bad(format!(
                "ir_len {} must be in 1..={tail} so the response ends inside the frame",
                self.ir_len
            ));
        }
        if self.direct_delay + 1 >= self.ir_len || self.delay_empty + self.delay_jitter + 1.0 >= self.ir_len as f64 {
            return bad("all delays must fall inside ir_len".into());
        }
        if self.rir_samples == 0 || self.rir_samples > self.sweep.frame_len {
            return bad("rir_samples must be in 1..=frame_len".into());
        }
        if self.sweep.sample_rate_hz.fract() != 0.0 || self.sweep.sample_rate_hz > u32::MAX as f64 {
            return bad("sample rate must be a whole number of Hz".into());
        }
        Ok(())
    }

    pub fn classes(&self) -> Vec<i32> {
        let mut labels: Vec<i32> = self.buckets.iter().map(|b| b.label).collect();
        labels.sort();
        labels
    }

    /// Noise-free first-reflection delay for a fill level.
    pub fn first_reflection_delay(&self, fill_percent: f64) -> f64 {
        self.delay_full + (self.delay_empty - self.delay_full) * (1.0 - fill_percent / 100.0)
    }

    pub fn dataset_meta(&self) -> DatasetMeta {
        DatasetMeta {
            sample_rate_hz: self.sweep.sample_rate_hz as u32,
            frame_len: self.sweep.frame_len,
            rir_offset: if self.align { self.sweep.start_sample } else { 0 },
            samples: self.rir_samples,
            classes: self.classes(),
        }
    }
}

/// Taps of one jittered scene instance. Tap delays are strictly increasing.
pub fn class_taps<R: Rng + ?Sized>(
    class_id: i32,
    fine_fill_percent: f64,
    material: usize,
    rng: &mut R,
    cfg: &SceneConfig,
) -> Result<Vec<Tap>> {
    if !cfg.buckets.iter().any(|b| b.label == class_id) {
        return Err(Error::UnknownLabel(class_id));
    }
    let flutter = cfg
        .materials
        .get(material)
        .ok_or_else(|| Error::Config(format!("material index {material} out of range")))?
        .flutter_ratio;
    if !(0.0..=100.0).contains(&fine_fill_percent) {
        return Err(Error::Config(format!("fill {fine_fill_percent}% outside 0..=100")));
    }
    let mut delay = cfg.first_reflection_delay(fine_fill_percent);
    if cfg.delay_jitter > 0.0 {
        delay += rng.random_range(-cfg.delay_jitter..=cfg.delay_jitter);
    }
    let mut gain = (cfg.delay_full / delay).powf(cfg.gain_exponent);
    if cfg.gain_jitter > 0.0 {
        gain *= 1.0 + rng.random_range(-cfg.gain_jitter..=cfg.gain_jitter);
    }

    let mut taps = vec![Tap {
        delay: cfg.direct_delay as f64,
        gain: cfg.direct_gain,
    }];
    let last = (cfg.ir_len - 1) as f64;
    let mut k = 1.0;
    while cfg.direct_delay as f64 + k * delay < last {
        taps.push(Tap {
            delay: cfg.direct_delay as f64 + k * delay,
            gain,
        });
        gain *= -flutter;
        k += 1.0;
        if gain == 0.0 {
            break;
        }
    }
    Ok(taps)
}

/// Samples the taps into an impulse response of `len` samples.
pub fn render_taps(taps: &[Tap], len: usize) -> Vec<f64> {
    let mut h = vec![0.0; len];
    for t in taps {
        let i = t.delay.floor() as usize;
        let frac = t.delay - i as f64;
        if i < len {
            h[i] += t.gain * (1.0 - frac);
        }
        if frac > 0.0 && i + 1 < len {
            h[i + 1] += t.gain * frac;
        }
    }
    h
}

pub fn make_class_ir<R: Rng + ?Sized>(
    class_id: i32,
    fine_fill_percent: f64,
    material: usize,
    rng: &mut R,
    cfg: &SceneConfig,
) -> Result<Vec<f64>> {
    let taps = class_taps(class_id, fine_fill_percent, material, rng, cfg)?;
    Ok(render_taps(&taps, cfg.ir_len))
}

/// Linear convolution of `x` with `h`, truncated to `x.len()` samples.
pub fn convolve_truncated(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (j, &hj) in h.iter().enumerate() {
        if hj == 0.0 {
            continue;
        }
        for (yi, &xi) in y[j.min(x.len())..].iter_mut().zip(x) {
            *yi += hj * xi;
        }
    }
    y
}

/// Plays `sweep` through `ir` and adds white noise over the whole frame.
///
/// The noise variance is the mean square of the noise-free frame divided by
/// `10^(snr_db/10)`; `f64::INFINITY` gives a clean recording.
pub fn simulate_recording<R: Rng + ?Sized>(
    ir: &[f64],
    sweep: &SampledSignal,
    snr_db: f64,
    rng: &mut R,
) -> Result<SampledSignal> {
    if snr_db.is_nan() {
        return Err(Error::Config("snr_db is NaN".into()));
    }
    let mut y = convolve_truncated(&sweep.samples, ir);
    if snr_db.is_finite() {
        let power = y.iter().map(|v| v * v).sum::<f64>() / y.len().max(1) as f64;
        let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
            for v in &mut y {
                *v += noise.sample(rng);
            }
        }
    }
    SampledSignal::new(y, sweep.sample_rate_hz)
}

/// The (label, fine fill, material) of every row, in generation order.
pub fn row_plan(cfg: &SceneConfig, rows_per_fine_fill: usize) -> Vec<(i32, f64, usize)> {
    let mut plan = Vec::new();
    for b in &cfg.buckets {
        for &fill in &b.fine_fills {
            for r in 0..rows_per_fine_fill {
                plan.push((b.label, fill, r % cfg.materials.len()));
            }
        }
    }
    plan
}

/// Simulates every row of `row_plan`, runs the RIR pipeline on each and keeps
/// the leading `rir_samples` samples. Row `i` draws from its own stream
/// derived from `(seed, i)`.
pub fn generate_dataset(cfg: &SceneConfig, rows_per_fine_fill: usize, seed: u64) -> Result<LabeledDataset> {
    cfg.validate()?;
    let sweep = generate_stepped_sweep(&cfg.sweep)?;
    let pipeline = RirPipeline::new(&cfg.sweep, cfg.alpha, cfg.window, cfg.align)?;
    let rows = row_plan(cfg, rows_per_fine_fill)
        .into_par_iter()
        .enumerate()
        .map(|(i, (label, fill, material))| {
            let mut rng = child_rng(seed, i as u64);
            let ir = make_class_ir(label, fill, material, &mut rng, cfg)?;
            let recording = simulate_recording(&ir, &sweep, cfg.snr_db, &mut rng)?;
            let mut rir = pipeline.measure(&recording)?;
            rir.truncate(cfg.rir_samples);
            Ok(LabeledRow {
                rir,
                label,
                fine_fill_percent: Some(fill),
                material: cfg.materials[material].name.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(cfg.dataset_meta(), rows)
}

/// Independent train and test sets from one seed.
pub fn generate_split(
    cfg: &SceneConfig,
    train_rows_per_fine_fill: usize,
    test_rows_per_fine_fill: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    Ok((
        generate_dataset(cfg, train_rows_per_fine_fill, derive_seed(seed, 0))?,
        generate_dataset(cfg, test_rows_per_fine_fill, derive_seed(seed, 1))?,
    ))
}
