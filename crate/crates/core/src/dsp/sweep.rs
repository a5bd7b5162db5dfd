use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::SampledSignal;
use crate::error::{Error, Result};

/// Stepped linear sweep placed inside a recording frame.
///
/// The audible part occupies `[start_sample, end_sample)`; everything else in
/// the frame is silence. Frequencies rise from `f0_hz` in `f_step_hz`
/// increments, each held for the same number of samples, and the last step is
/// pinned to `f1_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub f0_hz: f64,
    pub f1_hz: f64,
    pub f_step_hz: f64,
    pub start_sample: usize,
    pub end_sample: usize,
    pub frame_len: usize,
    pub sample_rate_hz: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            f0_hz: 500.0,
            f1_hz: 4500.0,
            f_step_hz: 50.0,
            start_sample: 2048,
            end_sample: 3072,
            frame_len: 4096,
            sample_rate_hz: 10_000.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad(format!("sample_rate_hz must be positive, got {}", self.sample_rate_hz));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        if !(self.f0_hz > 0.0 && self.f0_hz <= self.f1_hz && self.f1_hz <= nyquist) {
            return bad(format!(
                "need 0 < f0 <= f1 <= {nyquist} Hz, got f0={} f1={}",
                self.f0_hz, self.f1_hz
            ));
        }
        if self.f1_hz > self.f0_hz && !(self.f_step_hz.is_finite() && self.f_step_hz > 0.0) {
            return bad(format!("f_step_hz must be positive, got {}", self.f_step_hz));
        }
        if !self.frame_len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.frame_len));
        }
        if !(self.start_sample < self.end_sample && self.end_sample <= self.frame_len) {
            return bad(format!(
                "need start_sample < end_sample <= frame_len, got {}..{} in {}",
                self.start_sample, self.end_sample, self.frame_len
            ));
        }
        if self.step_frequencies().len() > self.sweep_len() {
            return bad(format!(
                "{} frequency steps do not fit {} sweep samples",
                self.step_frequencies().len(),
                self.sweep_len()
            ));
        }
        Ok(())
    }

    pub fn sweep_len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    /// Frequency of every step, non-decreasing from `f0_hz` to `f1_hz`.
    pub fn step_frequencies(&self) -> Vec<f64> {
        if self.f1_hz <= self.f0_hz || self.f_step_hz.is_nan() || self.f_step_hz <= 0.0 {
            return vec![self.f0_hz];
        }
        let span = self.f1_hz - self.f0_hz;
        let full_steps = (span / self.f_step_hz + 1e-9).floor() as usize;
        let mut freqs: Vec<f64> = (0..=full_steps)
            .map(|k| self.f0_hz + k as f64 * self.f_step_hz)
            .collect();
        let last = freqs[freqs.len() - 1];
        if self.f1_hz - last > 1e-9 * self.f1_hz {
            freqs.push(self.f1_hz);
        } else {
            let n = freqs.len();
            freqs[n - 1] = self.f1_hz;
        }
        freqs
    }

    /// Samples each step is held for; the final step absorbs the remainder.
    pub fn hold_samples(&self) -> usize {
        self.sweep_len() / self.step_frequencies().len()
    }

    /// Step index active at `offset` samples after the sweep start.
    pub fn step_at(&self, offset: usize) -> usize {
        let steps = self.step_frequencies().len();
        (offset / self.hold_samples()).min(steps - 1)
    }
}

/// Phase-continuous stepped sweep over the full frame.
pub fn generate_stepped_sweep(cfg: &SweepConfig) -> Result<SampledSignal> {
    cfg.validate()?;
    let freqs = cfg.step_frequencies();
    let hold = cfg.hold_samples();
    let mut samples = vec![0.0; cfg.frame_len];
    let mut phase = 0.0_f64;
    for (k, slot) in samples[cfg.start_sample..cfg.end_sample].iter_mut().enumerate() {
        *slot = phase.sin();
        let f = freqs[(k / hold).min(freqs.len() - 1)];
        phase += 2.0 * PI * f / cfg.sample_rate_hz;
        if phase > 2.0 * PI {
            phase -= 2.0 * PI;
        }
    }
    SampledSignal::new(samples, cfg.sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let cfg = SweepConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.step_frequencies().len(), 81);
        assert_eq!(cfg.hold_samples(), 12);
    }

    #[test]
    fn silence_outside_sweep() {
        let cfg = SweepConfig::default();
        let s = generate_stepped_sweep(&cfg).unwrap();
        assert_eq!(s.len(), 4096);
        assert!(s.samples[..2048].iter().all(|&v| v == 0.0));
        assert!(s.samples[3072..].iter().all(|&v| v == 0.0));
        assert_eq!(s.samples[2048], 0.0);
    }

    #[test]
    fn single_step_is_a_pure_tone() {
        let cfg = SweepConfig {
            f0_hz: 1000.0,
            f1_hz: 1000.0,
            ..SweepConfig::default()
        };
        let s = generate_stepped_sweep(&cfg).unwrap();
        for k in 0..cfg.sweep_len() {
            let expected = (2.0 * PI * 1000.0 * k as f64 / 10_000.0).sin();
            assert!((s.samples[2048 + k] - expected).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn uneven_span_ends_on_f1() {
        let cfg = SweepConfig {
            f0_hz: 500.0,
            f1_hz: 1030.0,
            f_step_hz: 100.0,
            ..SweepConfig::default()
        };
        let freqs = cfg.step_frequencies();
        assert_eq!(freqs.first(), Some(&500.0));
        assert_eq!(freqs.last(), Some(&1030.0));
        assert!(freqs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn invalid_configs() {
        let base = SweepConfig::default();
        for cfg in [
            SweepConfig {
                f1_hz: 6000.0,
                ..base.clone()
            },
            SweepConfig {
                f0_hz: 0.0,
                ..base.clone()
            },
            SweepConfig {
                f0_hz: 5000.0,
                f1_hz: 4000.0,
                ..base.clone()
            },
            SweepConfig {
                frame_len: 4000,
                ..base.clone()
            },
            SweepConfig {
                start_sample: 3072,
                ..base.clone()
            },
            SweepConfig {
                end_sample: 5000,
                ..base.clone()
            },
            SweepConfig {
                f_step_hz: 0.0,
                ..base.clone()
            },
            SweepConfig {
                f_step_hz: 1.0,
                ..base.clone()
            },
            SweepConfig {
                sample_rate_hz: -1.0,
                ..base.clone()
            },
        ] {
            assert!(generate_stepped_sweep(&cfg).is_err(), "{cfg:?}");
        }
    }
}
