//! Iterative radix-2 FFT.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Precomputed twiddles and bit-reversal permutation for one transform size.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        // Each twiddle is evaluated directly instead of by repeated
        // multiplication, so the error does not grow with the index.
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        let bits = len.trailing_zeros();
        let bitrev = (0..len)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        Ok(FftPlan { len, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform, `X[k] = sum x[n] e^{-2 pi i k n / N}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer does not match plan length");
        for i in 0..self.len {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.len {
            let stride = self.len / (2 * half);
            for start in (0..self.len).step_by(2 * half) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let even = buf[start + k];
                    let odd = buf[start + k + half] * w;
                    buf[start + k] = even + odd;
                    buf[start + k + half] = even - odd;
                }
            }
            half *= 2;
        }
    }

    /// In-place inverse transform including the `1/N` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for z in buf.iter_mut() {
            *z = z.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.len as f64;
        for z in buf.iter_mut() {
            *z = z.conj() * scale;
        }
    }

    /// Forward transform of a real frame, zero-padded to the plan length.
    pub fn forward_real(&self, frame: &[f64]) -> Vec<Complex64> {
        assert!(frame.len() <= self.len);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (z, &x) in buf.iter_mut().zip(frame) {
            z.re = x;
        }
        self.forward(&mut buf);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(FftPlan::new(0), Err(Error::NotPowerOfTwo(0))));
        assert!(matches!(FftPlan::new(12), Err(Error::NotPowerOfTwo(12))));
        assert!(FftPlan::new(1).is_ok());
    }

    #[test]
    fn length_one_and_two() {
        let p = FftPlan::new(1).unwrap();
        assert_eq!(p.forward_real(&[3.0]), vec![Complex64::new(3.0, 0.0)]);
        let p = FftPlan::new(2).unwrap();
        let out = p.forward_real(&[1.0, 2.0]);
        assert_eq!(out, vec![Complex64::new(3.0, 0.0), Complex64::new(-1.0, 0.0)]);
    }

    #[test]
    fn pure_tone_lands_in_one_bin() {
        let n = 32;
        let p = FftPlan::new(n).unwrap();
        let frame: Vec<f64> = (0..n).map(|i| (2.0 * PI * 3.0 * i as f64 / n as f64).cos()).collect();
        let out = p.forward_real(&frame);
        for (k, z) in out.iter().enumerate() {
            let expected = if k == 3 || k == n - 3 { n as f64 / 2.0 } else { 0.0 };
            assert!((z.norm() - expected).abs() < 1e-12, "bin {k}: {}", z.norm());
        }
    }
}
