//! Training-time augmentation: additive noise, pitch shift and playback-rate change.
//!
//! Ranges default to noise at 5% of the signal RMS, pitch within +-5
//! semitones and speed within 0.9x..1.1x. [`augment_file`] composes the
//! three as speed, then pitch, then noise, so the noise level is measured
//! against the final clean signal. A speed change rescales time; callers
//! must rescale reference turns by `1 / speed_factor` (see
//! [`crate::rttm::rescale_turns`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::corpus::{profile_pool, synth_utterance, PROFILE_POOL_SEED};
use crate::resample::resample_by_step;
use crate::spectrum::hann_periodic;

pub const DEFAULT_NOISE_INTENSITY: f64 = 0.05;
pub const PITCH_RANGE_SEMITONES: f64 = 5.0;
pub const SPEED_RANGE: (f64, f64) = (0.9, 1.1);
/// WSOLA analysis window and similarity search tolerance.
pub const WSOLA_WINDOW_S: f64 = 0.030;
pub const WSOLA_TOLERANCE_S: f64 = 0.0075;
const BABBLE_STREAMS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("input is silent; noise level relative to its RMS is undefined")]
    SilentInput,
    #[error("invalid augmentation parameter: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    White,
    Babble,
}

impl std::str::FromStr for NoiseKind {
    type Err = AugmentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "white" => Ok(Self::White),
            "babble" => Ok(Self::Babble),
            other => Err(AugmentError::InvalidSpec(format!("unknown noise kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSpec {
    /// Noise RMS as a fraction of the signal RMS.
    pub noise_intensity: f64,
    pub noise_kind: NoiseKind,
    pub pitch_semitones: f64,
    pub speed_factor: f64,
    pub rng_seed: u64,
    /// Lifts the default pitch/speed ranges.
    pub allow_out_of_range: bool,
}

impl Default for AugmentSpec {
    /// The identity augmentation.
    fn default() -> Self {
        Self {
            noise_intensity: 0.0,
            noise_kind: NoiseKind::White,
            pitch_semitones: 0.0,
            speed_factor: 1.0,
            rng_seed: 0,
            allow_out_of_range: false,
        }
    }
}

impl AugmentSpec {
    /// Draws pitch and speed uniformly from the default ranges, with the default noise level.
    pub fn sample(seed: u64, noise_kind: NoiseKind) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            noise_intensity: DEFAULT_NOISE_INTENSITY,
            noise_kind,
            pitch_semitones: rng.random_range(-PITCH_RANGE_SEMITONES..=PITCH_RANGE_SEMITONES),
            speed_factor: rng.random_range(SPEED_RANGE.0..=SPEED_RANGE.1),
            rng_seed: rng.random(),
            allow_out_of_range: false,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.noise_intensity == 0.0 && self.pitch_semitones == 0.0 && self.speed_factor == 1.0
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |m: String| Err(AugmentError::InvalidSpec(m));
        if !(self.noise_intensity >= 0.0 && self.noise_intensity.is_finite()) {
            return bad(format!("noise intensity {} must be >= 0", self.noise_intensity));
        }
        if !(self.speed_factor > 0.0 && self.speed_factor.is_finite()) {
            return bad(format!("speed factor {} must be > 0", self.speed_factor));
        }
        if !(self.pitch_semitones.abs() <= 12.0) {
            return bad(format!("pitch shift {} exceeds 12 semitones", self.pitch_semitones));
        }
        if !self.allow_out_of_range {
            if self.pitch_semitones.abs() > PITCH_RANGE_SEMITONES {
                return bad(format!("pitch shift {} outside +-5 semitones", self.pitch_semitones));
            }
            if self.speed_factor < SPEED_RANGE.0 || self.speed_factor > SPEED_RANGE.1 {
                return bad(format!("speed factor {} outside 0.9..1.1", self.speed_factor));
            }
        }
        Ok(())
    }
}

fn to_buffer(template: &AudioBuffer, samples: Vec<f64>) -> AudioBuffer {
    template.with_samples(samples.into_iter().map(|s| s as f32).collect())
}

/// Adds noise whose RMS is exactly `intensity * RMS(buf)`; deterministic in `seed`.
pub fn add_noise(buf: &AudioBuffer, intensity: f64, kind: NoiseKind, seed: u64) -> Result<AudioBuffer, AugmentError> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(AugmentError::InvalidSpec(format!("noise intensity {intensity} must be >= 0")));
    }
    if intensity == 0.0 || buf.is_empty() {
        return Ok(buf.clone());
    }
    let rms = buf.rms();
    if rms == 0.0 {
        return Err(AugmentError::SilentInput);
    }
    let noise = match kind {
        NoiseKind::White => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..buf.len()).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>()
        }
        NoiseKind::Babble => babble(buf.len(), buf.sample_rate(), seed),
    };
    let noise_rms = (noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64).sqrt();
    if noise_rms == 0.0 {
        return Ok(buf.clone());
    }
    let k = intensity * rms / noise_rms;
    let out = buf.samples().iter().zip(&noise).map(|(&s, n)| s as f64 + k * n).collect();
    Ok(to_buffer(buf, out))
}

/// Background conversation: four synthetic talkers, each circularly time-shifted.
fn babble(len: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    let pool = profile_pool(PROFILE_POOL_SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = (len as f64 / sample_rate as f64).max(0.5);
    let mut out = vec![0.0; len];
    for _ in 0..BABBLE_STREAMS {
        let profile = &pool[rng.random_range(0..pool.len())];
        let talker = synth_utterance(profile, duration, rng.random(), sample_rate)
            .expect("babble duration is at least 0.5 s")
            .to_f64();
        let shift = rng.random_range(0..talker.len());
        for (i, o) in out.iter_mut().enumerate() {
            *o += talker[(i + shift) % talker.len()];
        }
    }
    out
}

/// Changes playback rate: duration divides by `factor` and every frequency multiplies by it.
pub fn speed_change(buf: &AudioBuffer, factor: f64) -> Result<AudioBuffer, AugmentError> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(AugmentError::InvalidSpec(format!("speed factor {factor} must be > 0")));
    }
    if factor == 1.0 {
        return Ok(buf.clone());
    }
    let out_len = (buf.len() as f64 / factor).round() as usize;
    Ok(to_buffer(buf, resample_by_step(&buf.to_f64(), factor, out_len)))
}

/// Shifts pitch by `semitones` while keeping duration: a playback-rate change
/// by `2^(st/12)` followed by a WSOLA stretch back to the original length.
pub fn pitch_shift(buf: &AudioBuffer, semitones: f64) -> Result<AudioBuffer, AugmentError> {
    if !(semitones.abs() <= 12.0) {
        return Err(AugmentError::InvalidSpec(format!("pitch shift {semitones} exceeds 12 semitones")));
    }
    if semitones == 0.0 || buf.is_empty() {
        return Ok(buf.clone());
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let sped = resample_by_step(&buf.to_f64(), ratio, (buf.len() as f64 / ratio).round() as usize);
    let sr = buf.sample_rate() as f64;
    let window = ((WSOLA_WINDOW_S * sr).round() as usize).max(4) & !1;
    let tolerance = (WSOLA_TOLERANCE_S * sr).round() as usize;
    Ok(to_buffer(buf, wsola_stretch(&sped, buf.len(), window, tolerance)))
}

/// Waveform-similarity overlap-add time stretch of `input` to exactly `out_len` samples.
///
/// Frames of `window` samples are laid down every `window / 2` output
/// samples. Each frame is read near its nominal input position, shifted by
/// up to `tolerance` samples to best match the natural continuation of the
/// previously copied frame.
pub fn wsola_stretch(input: &[f64], out_len: usize, window: usize, tolerance: usize) -> Vec<f64> {
    if input.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let synthesis_hop = window / 2;
    let analysis_hop = synthesis_hop as f64 * input.len() as f64 / out_len as f64;
    let w = hann_periodic(window);

    // zero guard bands so every candidate read is in bounds
    let guard = tolerance + window;
    let mut x = vec![0.0; guard];
    x.extend_from_slice(input);
    x.resize(x.len() + guard + window + synthesis_hop, 0.0);
    let max_start = x.len() - window;

    let mut out = vec![0.0; out_len + window];
    let mut norm = vec![0.0; out_len + window];
    let mut prev_start: Option<usize> = None;
    let mut k = 0usize;
    while k * synthesis_hop < out_len {
        let nominal = guard as isize + (k as f64 * analysis_hop).round() as isize;
        let start = match prev_start {
            None => nominal as usize,
            Some(prev) => {
                let target = &x[prev + synthesis_hop..prev + synthesis_hop + window];
                let lo = (nominal - tolerance as isize).max(0) as usize;
                let hi = ((nominal + tolerance as isize) as usize).min(max_start);
                let mut best = (f64::NEG_INFINITY, nominal.clamp(0, max_start as isize) as usize);
                for cand in lo..=hi {
                    let seg = &x[cand..cand + window];
                    let score: f64 = seg.iter().zip(target).map(|(a, b)| a * b).sum();
                    if score > best.0 {
                        best = (score, cand);
                    }
                }
                best.1
            }
        };
        let at = k * synthesis_hop;
        for i in 0..window {
            out[at + i] += x[start + i] * w[i];
            norm[at + i] += w[i];
        }
        prev_start = Some(start);
        k += 1;
    }
    out.truncate(out_len);
    out.iter().zip(&norm).map(|(&v, &n)| if n > 1e-6 { v / n } else { v }).collect()
}

/// Applies speed, pitch and noise in that order.
pub fn augment_file(buf: &AudioBuffer, spec: &AugmentSpec) -> Result<AudioBuffer, AugmentError> {
    spec.validate()?;
    let sped = speed_change(buf, spec.speed_factor)?;
    let shifted = pitch_shift(&sped, spec.pitch_semitones)?;
    add_noise(&shifted, spec.noise_intensity, spec.noise_kind, spec.rng_seed)
}
