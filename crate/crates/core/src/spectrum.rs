//! FFT helpers shared by the denoiser, the embedder and the tests.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioBuffer;

/// Periodic Hann window (sums to a constant at 50% overlap).
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).collect()
}

/// Symmetric Hamming window.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len).map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos()).collect()
}

/// A cached forward/inverse FFT pair of one size.
pub struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
    pub len: usize,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { forward: planner.plan_fft_forward(len), inverse: planner.plan_fft_inverse(len), len }
    }

    /// Power spectrum (bins `0..=len/2`) of `frame`, zero-padded to the FFT length.
    pub fn power_spectrum(&self, frame: &[f64], scratch: &mut Vec<Complex64>) -> Vec<f64> {
        scratch.clear();
        scratch.extend(frame.iter().map(|&x| Complex64::new(x, 0.0)));
        scratch.resize(self.len, Complex64::new(0.0, 0.0));
        self.forward.process(scratch);
        scratch[..=self.len / 2].iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Frequency (Hz) of the strongest spectral peak, refined by parabolic
/// interpolation of the log magnitude around the maximum bin.
pub fn peak_frequency(buf: &AudioBuffer) -> f64 {
    peak_frequency_of(&buf.to_f64(), buf.sample_rate())
}

pub fn peak_frequency_of(samples: &[f64], sample_rate: u32) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let n_fft = (samples.len() * 4).next_power_of_two();
    let window = hann_periodic(samples.len());
    let frame: Vec<f64> = samples.iter().zip(&window).map(|(s, w)| s * w).collect();
    let fft = FftPair::new(n_fft);
    let power = fft.power_spectrum(&frame, &mut Vec::new());
    let (k, _) = power
        .iter()
        .enumerate()
        .skip(1)
        .fold((1, f64::MIN), |best, (i, &p)| if p > best.1 { (i, p) } else { best });
    let offset = if k + 1 < power.len() {
        let (a, b, c) = (power[k - 1].max(1e-300).ln(), power[k].max(1e-300).ln(), power[k + 1].max(1e-300).ln());
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-300 { 0.5 * (a - c) / denom } else { 0.0 }
    } else {
        0.0
    };
    (k as f64 + offset) * sample_rate as f64 / n_fft as f64
}

/// Normalized cross-correlation at zero lag over the common prefix.
pub fn correlation(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len().min(b.len());
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (x, y) = (a[i] as f64, b[i] as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return 0.0;
    }
    ab / (aa * bb).sqrt()
}
