//! Per-tree interval sampling and the three interval features.
//!
//! Each tree owns one random interval, used for the spectral min/max ratio,
//! and one fixed interval of the same length anchored at sample 0, used for
//! the mean and standard deviation of adjacent-sample differences.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::FftPlan;
use crate::error::{Error, Result};

/// Allowed interval lengths, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalBounds {
    pub min_len: usize,
    pub max_len: usize,
}

impl IntervalBounds {
    pub fn new(min_len: usize, max_len: usize) -> Self {
        IntervalBounds { min_len, max_len }
    }

    pub fn validate(&self, segment_length: usize) -> Result<()> {
        if 2 <= self.min_len && self.min_len <= self.max_len && self.max_len <= segment_length {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "interval bounds need 2 <= min_len <= max_len <= segment_length, got {}..={} for segment {}",
                self.min_len, self.max_len, segment_length
            )))
        }
    }
}

/// A random interval and its start-anchored fixed twin of equal length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntervalPair {
    pub rnd_start: usize,
    pub length: usize,
}

impl IntervalPair {
    pub fn check(&self, segment_length: usize) -> Result<()> {
        let end = self.rnd_start.checked_add(self.length);
        match end {
            Some(end) if self.length >= 2 && end <= segment_length => Ok(()),
            _ => Err(Error::IntervalOutOfBounds {
                start: self.rnd_start,
                end: end.unwrap_or(usize::MAX),
                segment: segment_length,
            }),
        }
    }

    pub fn random_range(&self) -> std::ops::Range<usize> {
        self.rnd_start..self.rnd_start + self.length
    }

    pub fn fixed_range(&self) -> std::ops::Range<usize> {
        0..self.length
    }

    /// Transform length used for the random interval.
    pub fn padded_len(&self) -> usize {
        self.length.next_power_of_two()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub spectral_ratio: f64,
    pub diff_mean: f64,
    pub diff_std: f64,
}

impl FeatureVector {
    pub const LEN: usize = 3;

    pub fn to_array(self) -> [f64; 3] {
        [self.spectral_ratio, self.diff_mean, self.diff_std]
    }
}

/// Which one-sided bins enter the min/max ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RatioBins {
    /// Bins `1..=N/2`.
    #[default]
    ExcludeDc,
    /// Bins `0..=N/2`.
    IncludeDc,
}

pub fn sample_interval_pair<R: Rng + ?Sized>(
    rng: &mut R,
    segment_length: usize,
    bounds: IntervalBounds,
) -> Result<IntervalPair> {
    bounds.validate(segment_length)?;
    let length = rng.random_range(bounds.min_len..=bounds.max_len);
    let rnd_start = rng.random_range(0..=segment_length - length);
    Ok(IntervalPair { rnd_start, length })
}

fn require_diffs(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            actual: values.len(),
        });
    }
    Ok(())
}

/// Mean of `v[k] - v[k+1]` over all adjacent pairs.
pub fn diff_mean(values: &[f64]) -> Result<f64> {
    require_diffs(values)?;
    let sum: f64 = values.windows(2).map(|w| w[0] - w[1]).sum();
    Ok(sum / (values.len() - 1) as f64)
}

/// Standard deviation of `v[k] - v[k+1]`, normalized by the number of
/// differences.
pub fn diff_std(values: &[f64]) -> Result<f64> {
    let mean = diff_mean(values)?;
    let ss: f64 = values
        .windows(2)
        .map(|w| {
            let d = w[0] - w[1] - mean;
            d * d
        })
        .sum();
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

/// Ratio of the smallest to the largest one-sided magnitude of the segment's
/// zero-padded power-of-two spectrum, DC excluded. Returns 0.0 for silent or
/// single-sample input.
pub fn spectral_min_max_ratio(segment: &[f64]) -> f64 {
    spectral_min_max_ratio_with(segment, RatioBins::ExcludeDc)
}

pub fn spectral_min_max_ratio_with(segment: &[f64], bins: RatioBins) -> f64 {
    if segment.is_empty() {
        return 0.0;
    }
    let plan = FftPlan::new(segment.len().next_power_of_two()).expect("power of two");
    ratio_with_plan(segment, &plan, bins)
}

fn ratio_with_plan(segment: &[f64], plan: &FftPlan, bins: RatioBins) -> f64 {
    let spectrum = plan.forward_real(segment);
    let first = match bins {
        RatioBins::ExcludeDc => 1,
        RatioBins::IncludeDc => 0,
    };
    let last = plan.len() / 2;
    if first > last {
        return 0.0;
    }
    let (min, max) = spectrum[first..=last]
        .iter()
        .map(|z| z.norm())
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
    if max > 0.0 {
        (min / max).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Features of one RIR segment for one interval pair.
pub fn extract_features(segment: &[f64], pair: IntervalPair) -> Result<FeatureVector> {
    FeatureExtractor::new(pair)?.extract(segment)
}

/// Feature extraction with the transform plan for one interval pair kept
/// around, for evaluating the same tree over many rows.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    pair: IntervalPair,
    plan: FftPlan,
}

impl FeatureExtractor {
    pub fn new(pair: IntervalPair) -> Result<Self> {
        if pair.length < 2 {
            return Err(Error::IntervalOutOfBounds {
                start: pair.rnd_start,
                end: pair.rnd_start + pair.length,
                segment: pair.rnd_start + pair.length,
            });
        }
        Ok(FeatureExtractor {
            pair,
            plan: FftPlan::new(pair.padded_len())?,
        })
    }

    pub fn pair(&self) -> IntervalPair {
        self.pair
    }

    pub fn extract(&self, segment: &[f64]) -> Result<FeatureVector> {
        self.pair.check(segment.len())?;
        let fixed = &segment[self.pair.fixed_range()];
        Ok(FeatureVector {
            spectral_ratio: ratio_with_plan(&segment[self.pair.random_range()], &self.plan, RatioBins::ExcludeDc),
            diff_mean: diff_mean(fixed)?,
            diff_std: diff_std(fixed)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn naive_ratio(segment: &[f64]) -> f64 {
        let n = segment.len().next_power_of_two();
        let mags: Vec<f64> = (1..=n / 2)
            .map(|k| {
                segment
                    .iter()
                    .enumerate()
                    .fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| {
                        acc + Complex64::from_polar(v, -2.0 * PI * ((k * t) % n) as f64 / n as f64)
                    })
                    .norm()
            })
            .collect();
        let max = mags.iter().cloned().fold(0.0, f64::max);
        let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    }

    #[test]
    fn diff_examples() {
        assert_eq!(diff_mean(&[4.0; 10]).unwrap(), 0.0);
        assert_eq!(diff_std(&[4.0; 10]).unwrap(), 0.0);
        assert!((diff_mean(&[3.0, 1.0, 4.0]).unwrap() - -0.5).abs() < 1e-15);
        assert!((diff_std(&[3.0, 1.0, 4.0]).unwrap() - 2.5).abs() < 1e-15);
        assert!((diff_mean(&[1.0, 2.0, 3.0]).unwrap() - -1.0).abs() < 1e-15);
        assert_eq!(diff_std(&[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn diff_needs_two_values() {
        assert!(matches!(diff_mean(&[1.0]), Err(Error::TooShort { .. })));
        assert!(matches!(diff_std(&[]), Err(Error::TooShort { .. })));
    }

    #[test]
    fn ratio_examples() {
        let mut delta = vec![0.0; 16];
        delta[0] = 1.0;
        assert!((spectral_min_max_ratio(&delta) - 1.0).abs() < 1e-15);
        assert_eq!(spectral_min_max_ratio(&[0.0; 16]), 0.0);
        assert_eq!(spectral_min_max_ratio(&[]), 0.0);

        let mut rng = rng_from_seed(5);
        let seg: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!((spectral_min_max_ratio(&seg) - naive_ratio(&seg)).abs() < 1e-9);
    }

    #[test]
    fn dc_flag_changes_bin_range() {
        // bins are 6, 2, 2
        let seg = [3.0, 1.0, 1.0, 1.0];
        assert!((spectral_min_max_ratio_with(&seg, RatioBins::ExcludeDc) - 1.0).abs() < 1e-12);
        assert!((spectral_min_max_ratio_with(&seg, RatioBins::IncludeDc) - 1.0 / 3.0).abs() < 1e-12);
        // a constant only lives in DC
        assert_eq!(spectral_min_max_ratio_with(&[1.0; 4], RatioBins::ExcludeDc), 0.0);
    }

    #[test]
    fn forced_full_interval() {
        let mut rng = rng_from_seed(1);
        let pair = sample_interval_pair(&mut rng, 40, IntervalBounds::new(40, 40)).unwrap();
        assert_eq!(
            pair,
            IntervalPair {
                rnd_start: 0,
                length: 40
            }
        );
    }

    #[test]
    fn same_seed_same_pair() {
        let bounds = IntervalBounds::new(17, 153);
        let a = sample_interval_pair(&mut rng_from_seed(9), 300, bounds).unwrap();
        let b = sample_interval_pair(&mut rng_from_seed(9), 300, bounds).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn interval_draws_cover_bounds() {
        let bounds = IntervalBounds::new(17, 153);
        let mut rng = rng_from_seed(2024);
        let mut seen_min = false;
        let mut seen_max = false;
        for _ in 0..10_000 {
            let p = sample_interval_pair(&mut rng, 300, bounds).unwrap();
            assert!((17..=153).contains(&p.length));
            assert!(p.rnd_start + p.length <= 300);
            seen_min |= p.length == 17;
            seen_max |= p.length == 153;
        }
        assert!(seen_min && seen_max);
    }

    #[test]
    fn invalid_bounds() {
        let mut rng = rng_from_seed(0);
        for b in [
            IntervalBounds::new(1, 10),
            IntervalBounds::new(20, 10),
            IntervalBounds::new(5, 400),
        ] {
            assert!(sample_interval_pair(&mut rng, 300, b).is_err());
        }
    }

    #[test]
    fn extract_examples() {
        let zeros = vec![0.0; 64];
        let f = extract_features(
            &zeros,
            IntervalPair {
                rnd_start: 10,
                length: 20,
            },
        )
        .unwrap();
        assert_eq!(f.to_array(), [0.0, 0.0, 0.0]);

        let mut seg = vec![3.0, 1.0, 4.0];
        seg.extend(std::iter::repeat_n(0.0, 13));
        let pair = IntervalPair {
            rnd_start: 0,
            length: 3,
        };
        let f = extract_features(&seg, pair).unwrap();
        assert!((f.diff_mean - -0.5).abs() < 1e-15);
        assert!((f.diff_std - 2.5).abs() < 1e-15);
        assert!((f.spectral_ratio - naive_ratio(&seg[..3])).abs() < 1e-12);
        assert_eq!(f, extract_features(&seg, pair).unwrap());

        assert!(matches!(
            extract_features(
                &seg,
                IntervalPair {
                    rnd_start: 10,
                    length: 8
                }
            ),
            Err(Error::IntervalOutOfBounds { .. })
        ));
    }

    proptest! {
        #[test]
        fn diff_mean_telescopes(v in prop::collection::vec(-1e3..1e3f64, 2..300)) {
            let n = v.len();
            let expected = (v[0] - v[n - 1]) / (n - 1) as f64;
            prop_assert!((diff_mean(&v).unwrap() - expected).abs() < 1e-12);
        }

        #[test]
        fn diff_stats_shift_invariant(v in prop::collection::vec(-10.0..10.0f64, 2..200), c in -100.0..100.0f64) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            prop_assert!((diff_mean(&shifted).unwrap() - diff_mean(&v).unwrap()).abs() < 1e-9);
            prop_assert!((diff_std(&shifted).unwrap() - diff_std(&v).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn diff_stats_scale(v in prop::collection::vec(-10.0..10.0f64, 2..200), a in -5.0..5.0f64) {
            let scaled: Vec<f64> = v.iter().map(|x| a * x).collect();
            prop_assert!((diff_mean(&scaled).unwrap() - a * diff_mean(&v).unwrap()).abs() < 1e-9);
            prop_assert!((diff_std(&scaled).unwrap() - a.abs() * diff_std(&v).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn ratio_in_unit_interval(v in prop::collection::vec(-10.0..10.0f64, 0..130)) {
            let r = spectral_min_max_ratio(&v);
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
