//! Discrete Fourier transforms on the circle `p in [0, 2pi)`.

use crate::{Real, C};
use num_traits::Zero;
use rustfft::FftPlanner;

/// Coefficients `c_k = (1/N) sum_m f(2 pi m / N) e^{-i k 2 pi m / N}` for
/// `|k| <= band`, returned in the order `k = -band..=band`.
pub fn coefficients<T: Real>(samples: &[C<T>], band: usize) -> Vec<C<T>> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let inv_n = T::one() / T::int(n as i64);
    (-(band as i64)..=band as i64)
        .map(|k| buf[k.rem_euclid(n as i64) as usize] * inv_n)
        .collect()
}

/// Samples `f(2 pi m / N) = sum_k c_k e^{i k p}` from coefficients ordered
/// `k = -band..=band`.
pub fn synthesize<T: Real>(coeffs: &[C<T>], n: usize) -> Vec<C<T>> {
    let band = (coeffs.len() - 1) / 2;
    let mut buf = vec![C::zero(); n];
    for (i, &c) in coeffs.iter().enumerate() {
        let k = i as i64 - band as i64;
        let slot = k.rem_euclid(n as i64) as usize;
        buf[slot] = buf[slot] + c;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Full-length spectrum `(1/N) * FFT(samples)`, index `k mod N`.
pub fn spectrum<T: Real>(samples: &[C<T>]) -> Vec<C<T>> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let inv_n = T::one() / T::int(n as i64);
    buf.iter_mut().for_each(|z| *z = *z * inv_n);
    buf
}

/// Inverse of [`spectrum`].
pub fn from_spectrum<T: Real>(spec: &[C<T>]) -> Vec<C<T>> {
    let mut buf = spec.to_vec();
    FftPlanner::new().plan_fft_inverse(spec.len()).process(&mut buf);
    buf
}

/// Signed frequency of FFT slot `i` for length `n` (Nyquist mapped to `-n/2`).
pub fn frequency(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let c: Vec<C<f64>> = (0..7).map(|i| C::new(i as f64, -(i as f64) * 0.5)).collect();
        let s = synthesize(&c, 32);
        let back = coefficients(&s, 3);
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode() {
        let s: Vec<C<f64>> = (0..16)
            .map(|m| C::from_polar(1.0, std::f64::consts::TAU * m as f64 / 16.0))
            .collect();
        let c = coefficients(&s, 2);
        assert!((c[3] - C::new(1.0, 0.0)).norm() < 1e-14);
        assert!(c[2].norm() < 1e-14);
    }
}
