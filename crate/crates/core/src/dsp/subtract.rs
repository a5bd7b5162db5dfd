use std::ops::Range;

use super::{resynthesize, windowed_bins, FftPlan, SampledSignal, SweepConfig, WindowKind};
use crate::error::{Error, Result};

/// Gap between the end of the noise estimate and the sweep onset.
pub const NOISE_GUARD_SAMPLES: usize = 200;
/// Length of the noise-only slice used for the noise spectrum.
pub const NOISE_WINDOW_LEN: usize = 1024;

/// Noise-only slice of the recording frame that precedes the sweep.
pub fn noise_window(cfg: &SweepConfig) -> Result<Range<usize>> {
    let end = cfg.start_sample.checked_sub(NOISE_GUARD_SAMPLES);
    let start = end.and_then(|e| e.checked_sub(NOISE_WINDOW_LEN));
    match (start, end) {
        (Some(start), Some(end)) if end <= cfg.frame_len => Ok(start..end),
        _ => Err(Error::Config(format!(
            "noise window needs {} samples before the sweep start, but it starts at {}",
            NOISE_WINDOW_LEN + NOISE_GUARD_SAMPLES,
            cfg.start_sample
        ))),
    }
}

/// Magnitude-domain spectral subtraction.
///
/// The noise slice keeps its position inside an otherwise silent frame, both
/// frames are windowed with the same weights, and each bin keeps
/// `max(0, |Y| - alpha * |N|)` with the recording's phase.
pub fn spectral_subtract(
    recording: &SampledSignal,
    cfg: &SweepConfig,
    alpha: f64,
    window: WindowKind,
) -> Result<SampledSignal> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
    }
    if recording.len() != cfg.frame_len {
        return Err(Error::LengthMismatch {
            expected: cfg.frame_len,
            actual: recording.len(),
        });
    }
    let noise_range = noise_window(cfg)?;
    let plan = FftPlan::new(cfg.frame_len)?;
    let weights = window.weights(cfg.frame_len);

    let mut noise = vec![0.0; cfg.frame_len];
    noise[noise_range.clone()].copy_from_slice(&recording.samples[noise_range]);

    let rec_bins = windowed_bins(&recording.samples, &weights, &plan);
    let noise_bins = windowed_bins(&noise, &weights, &plan);
    let cleaned: Vec<f64> = rec_bins
        .iter()
        .zip(&noise_bins)
        .map(|(y, n)| (y.norm() - alpha * n.norm()).max(0.0))
        .collect();
    let samples = resynthesize(&cleaned, &rec_bins, &plan)?;
    SampledSignal::new(samples, recording.sample_rate_hz)
}
