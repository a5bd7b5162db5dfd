//! Excitation, transforms, windowing, spectral subtraction and impulse
//! response estimation.

pub mod fft;
mod rir;
mod subtract;
mod sweep;
mod window;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use fft::FftPlan;
pub use rir::{estimate_rir, RirPipeline, DEFAULT_RIR_EPSILON};
pub use subtract::{noise_window, spectral_subtract, NOISE_GUARD_SAMPLES, NOISE_WINDOW_LEN};
pub use sweep::{generate_stepped_sweep, SweepConfig};
pub use window::{apply_window, WindowKind};

/// Uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(SampledSignal {
            samples,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Magnitude and phase of every DFT bin of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    magnitudes: Vec<f64>,
    phases: Vec<f64>,
}

impl Spectrum {
    pub fn new(magnitudes: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if magnitudes.len() != phases.len() {
            return Err(Error::LengthMismatch {
                expected: magnitudes.len(),
                actual: phases.len(),
            });
        }
        if !magnitudes.len().is_power_of_two() {
            return Err(Error::NotPowerOfTwo(magnitudes.len()));
        }
        if let Some(m) = magnitudes.iter().find(|m| m.is_nan() || **m < 0.0) {
            return Err(Error::Config(format!("negative or NaN magnitude {m}")));
        }
        Ok(Spectrum { magnitudes, phases })
    }

    /// Polar form of complex bins; phases are `atan2(im, re)`.
    pub fn from_bins(bins: &[Complex64]) -> Self {
        Spectrum {
            magnitudes: bins.iter().map(|z| z.norm()).collect(),
            phases: bins.iter().map(|z| z.im.atan2(z.re)).collect(),
        }
    }

    pub fn to_bins(&self) -> Vec<Complex64> {
        self.magnitudes
            .iter()
            .zip(&self.phases)
            .map(|(&m, &p)| Complex64::new(m * p.cos(), m * p.sin()))
            .collect()
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn frame_len(&self) -> usize {
        self.magnitudes.len()
    }
}

/// DFT of a power-of-two frame.
pub fn forward_transform(frame: &[f64]) -> Result<Spectrum> {
    let plan = FftPlan::new(frame.len())?;
    Ok(Spectrum::from_bins(&plan.forward_real(frame)))
}

/// Inverse DFT back to a real frame.
///
/// Fails with [`Error::NonRealSpectrum`] when the imaginary part of the
/// result exceeds `1e-6` relative to the frame's peak, which only happens for
/// spectra that are not conjugate-symmetric.
pub fn inverse_transform(spec: &Spectrum) -> Result<Vec<f64>> {
    let plan = FftPlan::new(spec.frame_len())?;
    let mut bins = spec.to_bins();
    plan.inverse(&mut bins);
    real_part(&bins)
}

pub(crate) fn real_part(bins: &[Complex64]) -> Result<Vec<f64>> {
    let peak = bins.iter().fold(1.0_f64, |acc, z| acc.max(z.re.abs()));
    let residue = bins.iter().fold(0.0_f64, |acc, z| acc.max(z.im.abs()));
    if residue > 1e-6 * peak {
        return Err(Error::NonRealSpectrum(residue));
    }
    Ok(bins.iter().map(|z| z.re).collect())
}

/// Windowed frame transformed with `plan`.
pub(crate) fn windowed_bins(frame: &[f64], weights: &[f64], plan: &FftPlan) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = frame
        .iter()
        .zip(weights)
        .map(|(x, w)| Complex64::new(x * w, 0.0))
        .collect();
    plan.forward(&mut buf);
    buf
}

/// Rebuild a real frame from per-bin magnitudes and the phases of `phase_src`.
pub(crate) fn resynthesize(magnitudes: &[f64], phase_src: &[Complex64], plan: &FftPlan) -> Result<Vec<f64>> {
    let mut bins: Vec<Complex64> = magnitudes
        .iter()
        .zip(phase_src)
        .map(|(&m, z)| {
            let phase = z.im.atan2(z.re);
            Complex64::new(m * phase.cos(), m * phase.sin())
        })
        .collect();
    plan.inverse(&mut bins);
    real_part(&bins)
}
