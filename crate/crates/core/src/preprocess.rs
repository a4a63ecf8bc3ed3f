//! Loudness normalization, SNR measurement and spectral-gate noise reduction.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::spectrum::{hann_periodic, FftPair};

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("input is silent (zero RMS)")]
    SilentInput,
    #[error("noise power is zero; SNR is +infinity")]
    ZeroNoise,
    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),
    #[error("buffer of {len} samples is shorter than one frame ({frame_len})")]
    TooShort { len: usize, frame_len: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Result of [`rms_normalize`].
#[derive(Debug, Clone)]
pub struct Normalized {
    pub buffer: AudioBuffer,
    /// The single positive scalar applied to every sample.
    pub gain: f64,
    /// Set when the scaled signal exceeded full scale and was clipped.
    pub clipped: bool,
}

pub const DEFAULT_TARGET_RMS: f64 = 0.1;

/// Scales `buf` so its RMS equals `target_rms`.
pub fn rms_normalize(buf: &AudioBuffer, target_rms: f64) -> Result<Normalized, DspError> {
    if !(target_rms > 0.0 && target_rms < 1.0) {
        return Err(DspError::InvalidParams(format!("target RMS {target_rms} outside (0, 1)")));
    }
    let rms = buf.rms();
    if rms == 0.0 {
        return Err(DspError::SilentInput);
    }
    let gain = target_rms / rms;
    if (gain - 1.0).abs() < 1e-12 {
        return Ok(Normalized { buffer: buf.clone(), gain: 1.0, clipped: false });
    }
    let mut clipped = false;
    let samples = buf
        .samples()
        .iter()
        .map(|&s| {
            let v = s as f64 * gain;
            if v.abs() > 1.0 {
                clipped = true;
            }
            v.clamp(-1.0, 1.0) as f32
        })
        .collect();
    Ok(Normalized { buffer: buf.with_samples(samples), gain, clipped })
}

fn mean_power(samples: &[f64]) -> f64 {
    samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
}

/// `10 log10(P_signal / P_noise)` with `P` the mean squared amplitude.
///
/// A zero-power noise buffer yields [`DspError::ZeroNoise`], the +infinity outcome.
pub fn snr_db(signal: &AudioBuffer, noise: &AudioBuffer) -> Result<f64, DspError> {
    if signal.is_empty() || noise.is_empty() {
        return Err(DspError::EmptyInput);
    }
    snr_from_powers(signal.power(), noise.power())
}

fn snr_from_powers(p_signal: f64, p_noise: f64) -> Result<f64, DspError> {
    if p_noise == 0.0 {
        return Err(DspError::ZeroNoise);
    }
    Ok(10.0 * (p_signal / p_noise).log10())
}

/// SNR of `noisy` against a known clean reference: `snr_db(clean, noisy - clean)`.
pub fn estimate_snr_db(noisy: &AudioBuffer, clean_ref: &AudioBuffer) -> Result<f64, DspError> {
    if noisy.len() != clean_ref.len() {
        return Err(DspError::LengthMismatch(noisy.len(), clean_ref.len()));
    }
    if noisy.is_empty() {
        return Err(DspError::EmptyInput);
    }
    let clean = clean_ref.to_f64();
    let residual: Vec<f64> = noisy.samples().iter().zip(&clean).map(|(&n, &c)| n as f64 - c).collect();
    snr_from_powers(mean_power(&clean), mean_power(&residual))
}

/// Spectral-gate parameters. Frame sizes are in samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseParams {
    pub frame_len: usize,
    pub hop: usize,
    pub noise_percentile: f64,
    pub gate_threshold_db: f64,
    pub attenuation_db: f64,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self { frame_len: 512, hop: 256, noise_percentile: 0.2, gate_threshold_db: 6.0, attenuation_db: 20.0 }
    }
}

impl DenoiseParams {
    pub fn validate(&self) -> Result<(), DspError> {
        let bad = |m: &str| Err(DspError::InvalidParams(m.to_string()));
        if self.frame_len < 2 || self.hop == 0 {
            return bad("frame_len and hop must be positive");
        }
        if self.hop > self.frame_len {
            return bad("hop must not exceed frame_len");
        }
        if !(self.noise_percentile > 0.0 && self.noise_percentile <= 1.0) {
            return bad("noise_percentile must lie in (0, 1]");
        }
        if !(self.gate_threshold_db > 0.0 && self.attenuation_db > 0.0) {
            return bad("gate threshold and attenuation must be positive");
        }
        Ok(())
    }
}

/// Nearest-rank percentile of an unsorted slice.
pub(crate) fn percentile(values: &[f64], fraction: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = ((fraction * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// STFT magnitude gating with overlap-add resynthesis.
///
/// Each bin's noise floor is a low percentile of its (3x3 time-frequency
/// smoothed) power across frames, capped at the median floor over all bins
/// so that stationary tonal components are kept; cells whose smoothed power stays below
/// `floor + gate_threshold_db` are attenuated by `attenuation_db`. Analysis
/// and synthesis both use a square-root Hann window, so at 50% overlap the
/// transform is a tight frame and gating can only remove energy.
pub fn spectral_gate_denoise(buf: &AudioBuffer, params: &DenoiseParams) -> Result<AudioBuffer, DspError> {
    params.validate()?;
    let n = params.frame_len;
    let hop = params.hop;
    if buf.len() < n {
        return Err(DspError::TooShort { len: buf.len(), frame_len: n });
    }

    let pad = n;
    let mut padded = vec![0.0; pad];
    padded.extend(buf.to_f64());
    let n_frames = (padded.len() + pad).div_ceil(hop);
    padded.resize((n_frames - 1) * hop + n, 0.0);

    let window: Vec<f64> = hann_periodic(n).iter().map(|w| w.sqrt()).collect();
    let fft = FftPair::new(n);
    let half = n / 2 + 1;

    let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let start = f * hop;
        let mut frame: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(padded[start + i] * window[i], 0.0)).collect();
        fft.forward.process(&mut frame);
        spectra.push(frame);
    }

    let power: Vec<Vec<f64>> = spectra.iter().map(|s| s[..half].iter().map(|c| c.norm_sqr()).collect()).collect();
    let mut smoothed = vec![vec![0.0; half]; n_frames];
    for f in 0..n_frames {
        for k in 0..half {
            let mut acc = 0.0;
            let mut count = 0.0;
            for ff in f.saturating_sub(1)..=(f + 1).min(n_frames - 1) {
                for kk in k.saturating_sub(1)..=(k + 1).min(half - 1) {
                    acc += power[ff][kk];
                    count += 1.0;
                }
            }
            smoothed[f][k] = acc / count;
        }
    }

    // frames lying entirely inside the original signal, for floor estimation
    let first_inner = pad.div_ceil(hop);
    let last_inner = (pad + buf.len()).saturating_sub(n) / hop;
    let inner: Vec<usize> =
        if last_inner >= first_inner { (first_inner..=last_inner).collect() } else { (0..n_frames).collect() };

    let gate_ratio = 10f64.powf(params.gate_threshold_db / 10.0);
    let attenuation = 10f64.powf(-params.attenuation_db / 20.0);
    let mut column = Vec::with_capacity(inner.len());
    let mut floors = Vec::with_capacity(half);
    for k in 0..half {
        column.clear();
        column.extend(inner.iter().map(|&f| smoothed[f][k]));
        floors.push(percentile(&column, params.noise_percentile));
    }
    // a bin that is busy in nearly every frame is signal, not noise
    let floor_cap = percentile(&floors, 0.5);
    for k in 0..half {
        let threshold = floors[k].min(floor_cap) * gate_ratio;
        for f in 0..n_frames {
            if smoothed[f][k] < threshold {
                spectra[f][k] *= attenuation;
                if k != 0 && k != n / 2 {
                    spectra[f][n - k] *= attenuation;
                }
            }
        }
    }

    let mut out = vec![0.0; padded.len()];
    let mut weight = vec![0.0; padded.len()];
    let scale = 1.0 / n as f64;
    for (f, spectrum) in spectra.iter_mut().enumerate() {
        fft.inverse.process(spectrum);
        let start = f * hop;
        for i in 0..n {
            out[start + i] += spectrum[i].re * scale * window[i];
            weight[start + i] += window[i] * window[i];
        }
    }
    let samples = out[pad..pad + buf.len()]
        .iter()
        .zip(&weight[pad..pad + buf.len()])
        .map(|(&v, &w)| if w > 1e-9 { (v / w) as f32 } else { 0.0 })
        .collect();
    Ok(buf.with_samples(samples))
}
