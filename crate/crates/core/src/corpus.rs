//! Synthetic labelled corpus with the five-folder layout (0 to 4 speakers per file).
//!
//! Speech is additive harmonic synthesis: a jittered fundamental, harmonic
//! amplitudes shaped by a spectral tilt and three formant resonances, and a
//! syllabic amplitude envelope. Every turn time is a whole number of
//! milliseconds, so emitted RTTM reproduces the ground truth exactly.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{write_wav, AudioBuffer, AudioError, BitDepth, CANONICAL_RATE_HZ};
use crate::rttm::{emit_rttm, Turn};

/// Seed of the profile pool used when no corpus seed is in play (babble noise, ad-hoc mixtures).
pub const PROFILE_POOL_SEED: u64 = 0x5eed_0f_5ba1;
pub const PROFILE_POOL_SIZE: usize = 24;
pub const MAX_SPEAKERS: usize = 4;
pub const MIN_UTTERANCE_S: f64 = 0.5;
/// Per-utterance RMS before the per-speaker gain.
pub const UTTERANCE_RMS: f64 = 0.1;
/// Background floor of speech files, relative to utterance RMS.
const BACKGROUND_DB: f64 = -50.0;
const BLOCK: usize = 32;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duration {0:.3} s is too short")]
    TooShort(f64),
    #[error("speaker count {0} outside 0..={MAX_SPEAKERS}")]
    BadSpeakerCount(usize),
    #[error("bad split: {0}")]
    BadSplit(String),
    #[error("bad layout: {0}")]
    BadLayout(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Formant {
    pub freq_hz: f64,
    pub bandwidth_hz: f64,
}

/// Voice parameters of one synthetic talker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    pub f0_hz: f64,
    pub formants: [Formant; 3],
    pub harmonic_tilt_db_per_octave: f64,
    pub seed: u64,
}

impl SpeakerProfile {
    pub fn is_valid(&self) -> bool {
        (90.0..=280.0).contains(&self.f0_hz)
            && self.formants.windows(2).all(|w| w[0].freq_hz < w[1].freq_hz)
            && self.formants.iter().all(|f| f.bandwidth_hz > 0.0)
    }
}

/// Deterministic pool of [`PROFILE_POOL_SIZE`] distinct voices.
///
/// Fundamentals are stratified over 90..280 Hz so no two voices share a pitch band.
pub fn profile_pool(seed: u64) -> Vec<SpeakerProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: Vec<usize> = (0..PROFILE_POOL_SIZE).collect();
    strata.shuffle(&mut rng);
    let band = (280.0 - 90.0) / PROFILE_POOL_SIZE as f64;
    strata
        .into_iter()
        .map(|s| {
            let f0_hz = 90.0 + band * (s as f64 + rng.random_range(0.1..0.9));
            let f1 = rng.random_range(320.0..850.0);
            let f2 = rng.random_range(950.0..2300.0);
            let f3 = rng.random_range(2450.0..3400.0);
            SpeakerProfile {
                f0_hz,
                formants: [
                    Formant { freq_hz: f1, bandwidth_hz: rng.random_range(60.0..120.0) },
                    Formant { freq_hz: f2, bandwidth_hz: rng.random_range(80.0..160.0) },
                    Formant { freq_hz: f3, bandwidth_hz: rng.random_range(120.0..220.0) },
                ],
                harmonic_tilt_db_per_octave: rng.random_range(-14.0..-5.0),
                seed: rng.random(),
            }
        })
        .collect()
}

fn resonance(freq: f64, formant: &Formant, shift: f64) -> f64 {
    let f0 = formant.freq_hz * shift;
    let b = formant.bandwidth_hz;
    f0 * f0 / ((f0 * f0 - freq * freq).powi(2) + (b * freq).powi(2)).sqrt()
}

fn harmonic_amplitude(profile: &SpeakerProfile, k: usize, freq: f64, shifts: &[f64; 3]) -> f64 {
    let tilt = 10f64.powf(profile.harmonic_tilt_db_per_octave * (k as f64).log2() / 20.0);
    tilt * profile.formants.iter().zip(shifts).map(|(f, &s)| resonance(freq, f, s)).product::<f64>()
}

struct Syllable {
    start: usize,
    len: usize,
    formant_shift: [f64; 3],
    pitch_offset: f64,
}

/// Renders `duration_s` of synthetic speech for `profile`, scaled to [`UTTERANCE_RMS`].
///
/// The fundamental carries a slow random jitter of up to +-3%, and the
/// amplitude follows syllables at 3-5 per second with dips between them.
pub fn synth_utterance(
    profile: &SpeakerProfile,
    duration_s: f64,
    seed: u64,
    sample_rate: u32,
) -> Result<AudioBuffer, CorpusError> {
    if !(duration_s >= MIN_UTTERANCE_S) {
        return Err(CorpusError::TooShort(duration_s));
    }
    let sr = sample_rate as f64;
    let n = (duration_s * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ profile.seed.rotate_left(17));

    let rate = rng.random_range(3.0..5.0);
    let mut syllables = Vec::new();
    let mut pos = 0usize;
    while pos < n {
        let len = ((sr / rate) * rng.random_range(0.75..1.25)).round() as usize;
        syllables.push(Syllable {
            start: pos,
            len: len.max(1),
            formant_shift: [rng.random_range(0.85..1.15), rng.random_range(0.88..1.12), rng.random_range(0.94..1.06)],
            pitch_offset: rng.random_range(-0.04..0.04),
        });
        pos += len.max(1);
    }

    let nyquist_guard = 0.45 * sr;
    let max_harmonics = (nyquist_guard / (profile.f0_hz * 0.9)).floor() as usize;
    let mut phasors: Vec<(f64, f64)> = (0..max_harmonics)
        .map(|_| {
            let p = rng.random_range(0.0..2.0 * PI);
            (p.cos(), p.sin())
        })
        .collect();
    let mut amps_prev = vec![0.0; max_harmonics];
    let mut amps = vec![0.0; max_harmonics];
    let mut jitter = 0.0f64;
    let mut out = vec![0.0f64; n];
    let mut syl = 0usize;

    let mut block_start = 0;
    while block_start < n {
        let block_end = (block_start + BLOCK).min(n);
        while syl + 1 < syllables.len() && syllables[syl + 1].start <= block_start {
            syl += 1;
        }
        let s = &syllables[syl];
        jitter = (0.97 * jitter + 0.004 * rng.sample::<f64, _>(StandardNormal)).clamp(-0.03, 0.03);
        let f0 = profile.f0_hz * (1.0 + s.pitch_offset + jitter);
        let step = 2.0 * PI * f0 / sr;
        let base = (step.cos(), step.sin());
        let mut rot = base;
        for k in 0..max_harmonics {
            let freq = f0 * (k + 1) as f64;
            amps[k] = if freq < nyquist_guard { harmonic_amplitude(profile, k + 1, freq, &s.formant_shift) } else { 0.0 };
            let (c, si) = phasors[k];
            let mag = (c * c + si * si).sqrt();
            phasors[k] = (c / mag, si / mag);
            let len = (block_end - block_start) as f64;
            let (mut zc, mut zs) = phasors[k];
            let (a0, a1) = (amps_prev[k], amps[k]);
            for (i, o) in out[block_start..block_end].iter_mut().enumerate() {
                let nz = (zc * rot.0 - zs * rot.1, zc * rot.1 + zs * rot.0);
                zc = nz.0;
                zs = nz.1;
                *o += (a0 + (a1 - a0) * i as f64 / len) * zs;
            }
            phasors[k] = (zc, zs);
            rot = (rot.0 * base.0 - rot.1 * base.1, rot.0 * base.1 + rot.1 * base.0);
        }
        std::mem::swap(&mut amps_prev, &mut amps);
        block_start = block_end;
    }

    // syllabic envelope with inter-syllable dips, plus light aspiration
    for s in &syllables {
        let end = (s.start + s.len).min(n);
        for (i, o) in out[s.start..end].iter_mut().enumerate() {
            let phase = (i as f64 + 0.5) / s.len as f64;
            let env = 0.12 + 0.88 * (PI * phase).sin().powf(0.7);
            let breath = 0.01 * rng.sample::<f64, _>(StandardNormal);
            *o = *o * env + breath * env;
        }
    }

    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let gain = if rms > 0.0 { UTTERANCE_RMS / rms } else { 0.0 };
    let samples = out.into_iter().map(|v| (v * gain) as f32).collect();
    Ok(AudioBuffer::new(samples, sample_rate)?)
}

/// One generated recording and its exact reference annotation.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub audio: AudioBuffer,
    pub turns: Vec<Turn>,
    /// Pool indices of the talkers, in speaker-id order.
    pub speakers: Vec<usize>,
}

pub fn speaker_label(pool_index: usize) -> String {
    format!("spk{pool_index:02}")
}

#[derive(Debug, Clone, Copy)]
struct PlannedTurn {
    speaker: usize,
    onset_ms: i64,
    dur_ms: i64,
}

fn plan_turns(n_speakers: usize, duration_ms: i64, overlap_fraction: f64, rng: &mut ChaCha8Rng) -> Vec<PlannedTurn> {
    let lead = rng.random_range(200..=800i64);
    let trail = 300i64;
    let avail = duration_ms - lead - trail;

    let mut order: Vec<usize> = (0..n_speakers).collect();
    order.shuffle(rng);
    let mut durs: Vec<i64> = Vec::new();
    let mut pauses: Vec<i64> = Vec::new();
    let mut speakers: Vec<usize> = Vec::new();

    // mandatory first round so every speaker talks at least once
    for &s in &order {
        speakers.push(s);
        durs.push(rng.random_range(1500..=4500));
        pauses.push(rng.random_range(400..=1000));
    }
    let used = |durs: &[i64], pauses: &[i64]| -> i64 {
        durs.iter().sum::<i64>() + pauses[..pauses.len() - 1].iter().sum::<i64>()
    };
    if used(&durs, &pauses) > avail {
        // squeeze the first round into short files
        pauses.iter_mut().for_each(|p| *p = 250);
        let per_turn = ((avail - 250 * (n_speakers as i64 - 1)) / n_speakers as i64).max(500);
        durs.iter_mut().for_each(|d| *d = (*d).min(per_turn));
    }
    loop {
        let cursor = used(&durs, &pauses) + pauses[pauses.len() - 1];
        let remaining = avail - cursor;
        if remaining < 1500 {
            break;
        }
        let prev = *speakers.last().unwrap();
        let mut next = rng.random_range(0..n_speakers);
        if n_speakers > 1 {
            while next == prev {
                next = rng.random_range(0..n_speakers);
            }
        }
        speakers.push(next);
        durs.push(rng.random_range(1500..=4500).min(remaining));
        pauses.push(rng.random_range(400..=1000));
    }

    // overlaps replace chosen pauses, pulling later turns earlier
    let total: i64 = durs.iter().sum();
    let mut budget = (overlap_fraction * total as f64 / 2.0).round() as i64;
    let mut gaps: Vec<i64> = pauses[..pauses.len() - 1].to_vec();
    let mut transitions: Vec<usize> = (0..gaps.len()).collect();
    transitions.shuffle(rng);
    for i in transitions {
        if budget <= 0 {
            break;
        }
        let amount = (3 * durs[i].min(durs[i + 1]) / 10).min(budget);
        if amount > 0 && speakers[i] != speakers[i + 1] {
            gaps[i] = -amount;
            budget -= amount;
        }
    }

    let mut turns = Vec::with_capacity(durs.len());
    let mut onset = lead;
    for i in 0..durs.len() {
        turns.push(PlannedTurn { speaker: speakers[i], onset_ms: onset, dur_ms: durs[i] });
        if i < gaps.len() {
            onset += durs[i] + gaps[i];
        }
    }
    turns
}

fn sub_seed(rng: &mut ChaCha8Rng) -> u64 {
    rng.random()
}

/// Mixture drawn from the default profile pool; see [`generate_mixture_from`].
pub fn generate_mixture(
    n_speakers: usize,
    duration_s: f64,
    overlap_fraction: f64,
    seed: u64,
) -> Result<Mixture, CorpusError> {
    let pool = profile_pool(PROFILE_POOL_SEED);
    generate_mixture_from(&pool, "mix", n_speakers, duration_s, overlap_fraction, seed, CANONICAL_RATE_HZ)
}

/// Renders a recording with `n_speakers` distinct talkers drawn from `pool`.
///
/// Zero speakers gives low-level white noise and no turns. Otherwise turns
/// alternate between talkers with pauses; `overlap_fraction` of the total
/// per-speaker turn time lies in two-speaker overlap.
pub fn generate_mixture_from(
    pool: &[SpeakerProfile],
    file_id: &str,
    n_speakers: usize,
    duration_s: f64,
    overlap_fraction: f64,
    seed: u64,
    sample_rate: u32,
) -> Result<Mixture, CorpusError> {
    if n_speakers > MAX_SPEAKERS || n_speakers > pool.len() {
        return Err(CorpusError::BadSpeakerCount(n_speakers));
    }
    if !(0.0..=0.3).contains(&overlap_fraction) {
        return Err(CorpusError::BadLayout(format!("overlap fraction {overlap_fraction} outside [0, 0.3]")));
    }
    let min_duration = if n_speakers == 0 { MIN_UTTERANCE_S } else { 4.0 };
    if !(duration_s >= min_duration) {
        return Err(CorpusError::TooShort(duration_s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration_ms = (duration_s * 1000.0).round() as i64;
    let n = (duration_ms as usize) * sample_rate as usize / 1000;
    let mut mix = vec![0.0f64; n];

    let mut noise_rng = ChaCha8Rng::seed_from_u64(sub_seed(&mut rng));
    if n_speakers == 0 {
        let level_db = rng.random_range(-80.0..-50.0);
        let rms = 10f64.powf(level_db / 20.0);
        mix.iter_mut().for_each(|v| *v = rms * noise_rng.sample::<f64, _>(StandardNormal));
        let audio = AudioBuffer::from_f64(&mix, sample_rate)?;
        return Ok(Mixture { audio, turns: Vec::new(), speakers: Vec::new() });
    }

    let mut chosen: Vec<usize> = (0..pool.len()).collect();
    chosen.shuffle(&mut rng);
    chosen.truncate(n_speakers);
    chosen.sort_unstable();
    let gains: Vec<f64> = (0..n_speakers).map(|_| 10f64.powf(rng.random_range(-3.0..3.0) / 20.0)).collect();

    let planned = plan_turns(n_speakers, duration_ms, overlap_fraction, &mut rng);
    let samples_per_ms = sample_rate as usize / 1000;
    let fade = (sample_rate as usize / 100).max(1);
    let mut turns = Vec::with_capacity(planned.len());
    for t in &planned {
        let profile = &pool[chosen[t.speaker]];
        let utt = synth_utterance(profile, t.dur_ms as f64 / 1000.0, sub_seed(&mut rng), sample_rate)?;
        let start = t.onset_ms as usize * samples_per_ms;
        let len = utt.len();
        for (i, &s) in utt.samples().iter().enumerate() {
            let ramp = ((i.min(len - 1 - i) as f64 + 0.5) / fade as f64).min(1.0);
            if let Some(slot) = mix.get_mut(start + i) {
                *slot += s as f64 * gains[t.speaker] * ramp;
            }
        }
        turns.push(Turn::new(
            file_id,
            speaker_label(chosen[t.speaker]),
            t.onset_ms as f64 / 1000.0,
            t.dur_ms as f64 / 1000.0,
        ));
    }
    let floor = UTTERANCE_RMS * 10f64.powf(BACKGROUND_DB / 20.0);
    for v in mix.iter_mut() {
        *v = (*v + floor * noise_rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0);
    }
    turns.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
    Ok(Mixture { audio: AudioBuffer::from_f64(&mix, sample_rate)?, turns, speakers: chosen })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

/// Folder index (speaker count) to file count.
pub type Layout = BTreeMap<usize, usize>;

pub fn default_layout() -> Layout {
    [(0, 60), (1, 58), (2, 51), (3, 50), (4, 50)].into_iter().collect()
}

/// Parses `"0:60,1:58"` style layouts.
pub fn parse_layout(text: &str) -> Result<Layout, CorpusError> {
    let mut layout = Layout::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (folder, count) =
            part.split_once(':').ok_or_else(|| CorpusError::BadLayout(format!("expected folder:count, got {part:?}")))?;
        let folder: usize = folder.trim().parse().map_err(|_| CorpusError::BadLayout(format!("bad folder {folder:?}")))?;
        let count: usize = count.trim().parse().map_err(|_| CorpusError::BadLayout(format!("bad count {count:?}")))?;
        if folder > MAX_SPEAKERS {
            return Err(CorpusError::BadSpeakerCount(folder));
        }
        layout.insert(folder, count);
    }
    if layout.is_empty() {
        return Err(CorpusError::BadLayout("empty layout".into()));
    }
    Ok(layout)
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.7, val: 0.2, test: 0.1 }
    }
}

impl SplitFractions {
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CorpusError::BadSplit(format!("expected three fractions, got {text:?}")))?;
        match parts[..] {
            [train, val, test] => {
                let s = Self { train, val, test };
                s.validate()?;
                Ok(s)
            }
            _ => Err(CorpusError::BadSplit(format!("expected three fractions, got {text:?}"))),
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(CorpusError::BadSplit("fractions must be non-negative".into()));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CorpusError::BadSplit("fractions must sum to 1".into()));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` items; ties go to the earlier split.
    pub fn apportion(&self, n: usize) -> [usize; 3] {
        let quotas = [self.train, self.val, self.test].map(|f| f * n as f64);
        let mut counts = quotas.map(|q| (q + 1e-9).floor() as usize);
        let assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        let rem = quotas.map(|q| ((q - q.floor()) * 1e9).round() as i64);
        order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            counts[i] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub layout: Layout,
    pub split: SplitFractions,
    pub seed: u64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub overlap_fraction: f64,
    pub sample_rate: u32,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            layout: default_layout(),
            split: SplitFractions::default(),
            seed: 0,
            min_duration_s: 15.0,
            max_duration_s: 45.0,
            overlap_fraction: 0.1,
            sample_rate: CANONICAL_RATE_HZ,
        }
    }
}

/// One manifest row. Paths are relative to the corpus root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub folder: usize,
    pub duration_s: f64,
    pub speakers: Vec<String>,
    pub rttm: String,
    pub split: Split,
    /// Rendering seed, enough to regenerate the file in memory.
    pub seed: u64,
}

impl ManifestEntry {
    pub fn file_id(&self) -> &str {
        Path::new(&self.path).file_stem().and_then(|s| s.to_str()).unwrap_or(&self.path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub overlap_fraction: f64,
    pub sample_rate: u32,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn count_by_folder(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.folder).or_insert(0) += 1;
        }
        counts
    }

    pub fn count_by_split(&self, folder: usize) -> [usize; 3] {
        let mut counts = [0; 3];
        for e in self.entries.iter().filter(|e| e.folder == folder) {
            counts[e.split as usize] += 1;
        }
        counts
    }
}

/// Lays out every file (ids, durations, splits, seeds) without rendering audio.
pub fn plan_dataset(config: &CorpusConfig) -> Result<CorpusManifest, CorpusError> {
    config.split.validate()?;
    if !(config.min_duration_s >= 4.0 && config.max_duration_s >= config.min_duration_s) {
        return Err(CorpusError::BadLayout("file durations must be at least 4 s".into()));
    }
    let pool_size = PROFILE_POOL_SIZE;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut entries = Vec::new();
    for (&folder, &count) in &config.layout {
        if folder > MAX_SPEAKERS {
            return Err(CorpusError::BadSpeakerCount(folder));
        }
        let [n_train, n_val, _] = config.split.apportion(count);
        let mut slots: Vec<usize> = (0..count).collect();
        slots.shuffle(&mut rng);
        let mut split_of = vec![Split::Test; count];
        for (rank, &idx) in slots.iter().enumerate() {
            split_of[idx] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
        }
        for (idx, split) in split_of.into_iter().enumerate() {
            let min_ms = (config.min_duration_s * 1000.0).round() as i64;
            let max_ms = (config.max_duration_s * 1000.0).round() as i64;
            let dur_ms = rng.random_range(min_ms..=max_ms);
            let seed: u64 = rng.random();
            let file_id = format!("f{folder}_{idx:03}");
            // speaker ids come from the same draw generate_mixture_from makes
            let mut mix_rng = ChaCha8Rng::seed_from_u64(seed);
            let _ = sub_seed(&mut mix_rng);
            let speakers = if folder == 0 {
                Vec::new()
            } else {
                let mut chosen: Vec<usize> = (0..pool_size).collect();
                chosen.shuffle(&mut mix_rng);
                chosen.truncate(folder);
                chosen.sort_unstable();
                chosen.into_iter().map(speaker_label).collect()
            };
            entries.push(ManifestEntry {
                path: format!("{folder}/{file_id}.wav"),
                folder,
                duration_s: dur_ms as f64 / 1000.0,
                speakers,
                rttm: format!("{folder}/{file_id}.rttm"),
                split,
                seed,
            });
        }
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(CorpusManifest {
        seed: config.seed,
        overlap_fraction: config.overlap_fraction,
        sample_rate: config.sample_rate,
        entries,
    })
}

/// Renders one planned entry in memory.
pub fn render_entry(manifest: &CorpusManifest, entry: &ManifestEntry) -> Result<Mixture, CorpusError> {
    let pool = profile_pool(manifest.seed);
    render_entry_with(&pool, manifest, entry)
}

fn render_entry_with(
    pool: &[SpeakerProfile],
    manifest: &CorpusManifest,
    entry: &ManifestEntry,
) -> Result<Mixture, CorpusError> {
    generate_mixture_from(
        pool,
        entry.file_id(),
        entry.folder,
        entry.duration_s,
        manifest.overlap_fraction,
        entry.seed,
        manifest.sample_rate,
    )
}

/// Writes `<out_dir>/<folder>/<file>.wav`, matching `.rttm` files and `manifest.json`.
pub fn generate_dataset(config: &CorpusConfig, out_dir: impl AsRef<Path>) -> Result<CorpusManifest, CorpusError> {
    let out_dir = out_dir.as_ref();
    let manifest = plan_dataset(config)?;
    let pool = profile_pool(config.seed);
    fs::create_dir_all(out_dir)?;
    for folder in config.layout.keys() {
        fs::create_dir_all(out_dir.join(folder.to_string()))?;
    }
    manifest.entries.par_iter().try_for_each(|entry| -> Result<(), CorpusError> {
        let mixture = render_entry_with(&pool, &manifest, entry)?;
        write_wav(out_dir.join(&entry.path), &mixture.audio, BitDepth::Pcm16)?;
        fs::write(out_dir.join(&entry.rttm), emit_rttm(&mixture.turns))?;
        Ok(())
    })?;
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

/// Absolute path of a manifest-relative file.
pub fn resolve(root: &Path, relative: &str) -> PathBuf {
    root.join(relative)
}
