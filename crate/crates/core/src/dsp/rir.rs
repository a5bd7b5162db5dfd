use super::{
    generate_stepped_sweep, resynthesize, spectral_subtract, windowed_bins, FftPlan, SampledSignal, SweepConfig,
    WindowKind,
};
use crate::error::{Error, Result};

/// Bins whose reference magnitude is below this fraction of the reference
/// peak are treated as dead and produce a zero response magnitude.
pub const DEFAULT_RIR_EPSILON: f64 = 1e-6;

/// Magnitude-ratio impulse response estimate.
///
/// Each bin's magnitude is `|Y| / |X|` and its phase is the recording's own
/// phase. `epsilon` is relative: bins with `|X| < epsilon * max|X|` are set to
/// zero.
pub fn estimate_rir(
    recording: &SampledSignal,
    reference: &SampledSignal,
    epsilon: f64,
    window: WindowKind,
) -> Result<SampledSignal> {
    if recording.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: recording.len(),
        });
    }
    if recording.sample_rate_hz != reference.sample_rate_hz {
        return Err(Error::Config(format!(
            "sample rates differ: recording {} Hz, reference {} Hz",
            recording.sample_rate_hz, reference.sample_rate_hz
        )));
    }
    let reference = ReferenceSpectrum::new(&reference.samples, epsilon, window)?;
    let samples = reference.deconvolve(&recording.samples)?;
    SampledSignal::new(samples, recording.sample_rate_hz)
}

struct ReferenceSpectrum {
    plan: FftPlan,
    weights: Vec<f64>,
    magnitudes: Vec<f64>,
    floor: f64,
}

impl ReferenceSpectrum {
    fn new(reference: &[f64], epsilon: f64, window: WindowKind) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let plan = FftPlan::new(reference.len())?;
        let weights = window.weights(reference.len());
        let magnitudes: Vec<f64> = windowed_bins(reference, &weights, &plan)
            .iter()
            .map(|z| z.norm())
            .collect();
        let peak = magnitudes.iter().fold(0.0_f64, |a, &m| a.max(m));
        Ok(ReferenceSpectrum {
            plan,
            weights,
            magnitudes,
            floor: epsilon * peak,
        })
    }

    fn deconvolve(&self, recording: &[f64]) -> Result<Vec<f64>> {
        let rec_bins = windowed_bins(recording, &self.weights, &self.plan);
        let ratio: Vec<f64> = rec_bins
            .iter()
            .zip(&self.magnitudes)
            .map(|(y, &x)| {
                if x < self.floor || x == 0.0 {
                    0.0
                } else {
                    (y.norm() / x).max(0.0)
                }
            })
            .collect();
        resynthesize(&ratio, &rec_bins, &self.plan)
    }
}

/// Recording-to-response chain: spectral subtraction, then magnitude-ratio
/// deconvolution of the resynthesized frame (windowed again) against the
/// generated sweep, then optional rotation so that index 0 of the result is
/// the sweep onset.
///
/// Because the deconvolution keeps the recording's phase, the response energy
/// sits where the sweep was played; alignment moves it to the front of the
/// frame, which is where the classifier reads its segment.
pub struct RirPipeline {
    sweep: SweepConfig,
    alpha: f64,
    window: WindowKind,
    align: bool,
    reference: ReferenceSpectrum,
}

impl RirPipeline {
    pub fn new(sweep: &SweepConfig, alpha: f64, window: WindowKind, align: bool) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
        }
        // The reference takes the same subtraction pass as recordings. Its
        // noise slice is silent, so this only applies the window, and both
        // sides of the ratio end up windowed twice.
        let reference_sweep = spectral_subtract(&generate_stepped_sweep(sweep)?, sweep, alpha, window)?;
        let reference = ReferenceSpectrum::new(&reference_sweep.samples, DEFAULT_RIR_EPSILON, window)?;
        Ok(RirPipeline {
            sweep: sweep.clone(),
            alpha,
            window,
            align,
            reference,
        })
    }

    pub fn sweep(&self) -> &SweepConfig {
        &self.sweep
    }

    pub fn measure(&self, recording: &SampledSignal) -> Result<Vec<f64>> {
        if recording.sample_rate_hz != self.sweep.sample_rate_hz {
            return Err(Error::Config(format!(
                "recording is sampled at {} Hz, sweep at {} Hz",
                recording.sample_rate_hz, self.sweep.sample_rate_hz
            )));
        }
        let cleaned = spectral_subtract(recording, &self.sweep, self.alpha, self.window)?;
        let mut rir = self.reference.deconvolve(&cleaned.samples)?;
        if self.align {
            rir.rotate_left(self.sweep.start_sample);
        }
        Ok(rir)
    }
}
