//! Arbitrary-length DFTs via the chirp-z (Bluestein) identity
//! `jk = (j² + k² − (k−j)²) / 2`, which turns a length-`n` DFT into a
//! circular convolution of power-of-two length.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::Real;

/// `e^{sign·2πi·num/den}` evaluated in `f64` from an exact reduced fraction.
fn unit(num: u64, den: u64, sign: f64) -> (f64, f64) {
    let angle = sign * std::f64::consts::TAU * (num as f64 / den as f64);
    (angle.cos(), angle.sin())
}

fn cplx<T: Real>((re, im): (f64, f64)) -> Complex<T> {
    Complex::new(T::from_f64_lossy(re), T::from_f64_lossy(im))
}

/// Forward DFT `X_k = Σ_j x_j e^{-2πi jk/n}` of a fixed length.
pub struct PrimeDft<T: Real> {
    n: usize,
    m: usize,
    /// `e^{-πi j²/n}`.
    chirp: Vec<Complex<T>>,
    /// Spectrum of the conjugate chirp, pre-scaled by `1/m`.
    kernel: Vec<Complex<T>>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> PrimeDft<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "transform length must be positive");
        let m = (2 * n - 1).next_power_of_two();
        let two_n = 2 * n as u128;
        let chirp: Vec<Complex<T>> = (0..n)
            .map(|j| {
                let sq = ((j as u128 * j as u128) % two_n) as u64;
                cplx(unit(sq, two_n as u64, -1.0))
            })
            .collect();
        let mut planner = FftPlanner::<T>::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let scale = T::one() / T::from_usize(m).expect("length fits");
        let mut kernel = vec![Complex::new(T::zero(), T::zero()); m];
        for j in 0..n {
            let c = chirp[j].conj() * scale;
            kernel[j] = c;
            if j > 0 {
                kernel[m - j] = c;
            }
        }
        forward.process(&mut kernel);
        PrimeDft {
            n,
            m,
            chirp,
            kernel,
            forward,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Returns the forward transform of `input`.
    pub fn transform(&self, input: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(input.len(), self.n, "input length must match the plan");
        if self.n == 1 {
            return input.to_vec();
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.m];
        for ((b, &x), &w) in buf.iter_mut().zip(input).zip(&self.chirp) {
            *b = x * w;
        }
        self.forward.process(&mut buf);
        for (b, &k) in buf.iter_mut().zip(&self.kernel) {
            *b = *b * k;
        }
        self.inverse.process(&mut buf);
        buf.truncate(self.n);
        for (b, &w) in buf.iter_mut().zip(&self.chirp) {
            *b = *b * w;
        }
        buf
    }
}

/// Reference `O(n²)` DFT with exact twiddle indices `jk mod n`.
pub fn naive_dft<T: Real>(input: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = input.len();
    let tw: Vec<Complex<T>> = (0..n as u64).map(|m| cplx(unit(m, n as u64, -1.0))).collect();
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (j, &x) in input.iter().enumerate() {
                acc = acc + x * tw[((j as u128 * k as u128) % n as u128) as usize];
            }
            acc
        })
        .collect()
}

/// `e^{+2πi m/n}` for `m = 0..n`.
pub(crate) fn twiddles<T: Real>(n: u64) -> Vec<Complex<T>> {
    (0..n).map(|m| cplx(unit(m, n, 1.0))).collect()
}
