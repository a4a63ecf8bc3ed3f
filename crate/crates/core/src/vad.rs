//! Energy-based speech activity detection and sliding-window segmentation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::preprocess::percentile;
use crate::spectrum::{hann_periodic, FftPair};

#[derive(Debug, Error, PartialEq)]
pub enum VadError {
    #[error("buffer of {len} samples is shorter than one {frame}-sample frame")]
    TooShort { len: usize, frame: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechRegion {
    pub onset_s: f64,
    pub offset_s: f64,
}

impl SpeechRegion {
    pub fn duration_s(&self) -> f64 {
        self.offset_s - self.onset_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VadParams {
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Speech threshold above the noise floor.
    pub threshold_db: f64,
    /// Gaps shorter than this are bridged.
    pub hangover_ms: f64,
    pub min_region_ms: f64,
    /// Percentile of frame energies taken as the noise floor.
    pub floor_percentile: f64,
    /// Spectral flatness below which a buffer with no energy dynamics counts as voiced.
    pub tonal_flatness: f64,
    /// Block length for sample-level edge refinement; 0 keeps frame-level edges.
    pub refine_ms: f64,
}

impl Default for VadParams {
    fn default() -> Self {
        Self {
            frame_ms: 30.0,
            hop_ms: 10.0,
            threshold_db: 10.0,
            hangover_ms: 200.0,
            min_region_ms: 100.0,
            floor_percentile: 0.1,
            tonal_flatness: 0.3,
            refine_ms: 2.0,
        }
    }
}

impl VadParams {
    pub fn validate(&self) -> Result<(), VadError> {
        if !(self.frame_ms > 0.0 && self.hop_ms > 0.0 && self.hop_ms <= self.frame_ms) {
            return Err(VadError::InvalidParams("need 0 < hop_ms <= frame_ms".into()));
        }
        if !(self.threshold_db > 0.0 && self.hangover_ms >= 0.0 && self.min_region_ms >= 0.0) {
            return Err(VadError::InvalidParams("threshold must be positive, hangover and minimum length non-negative".into()));
        }
        if !(self.refine_ms >= 0.0 && self.refine_ms <= self.frame_ms) {
            return Err(VadError::InvalidParams("refine_ms must lie in [0, frame_ms]".into()));
        }
        if !(self.floor_percentile > 0.0 && self.floor_percentile <= 1.0) {
            return Err(VadError::InvalidParams("floor_percentile must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Mean spectral flatness (geometric over arithmetic mean power, DC excluded) across frames.
fn mean_flatness(x: &[f64], frame: usize, hop: usize) -> f64 {
    let n_fft = frame.next_power_of_two();
    let fft = FftPair::new(n_fft);
    let window = hann_periodic(frame);
    let mut scratch = Vec::new();
    let mut total = 0.0;
    let mut count = 0usize;
    let mut start = 0;
    while start + frame <= x.len() {
        let windowed: Vec<f64> = x[start..start + frame].iter().zip(&window).map(|(s, w)| s * w).collect();
        let power = fft.power_spectrum(&windowed, &mut scratch);
        let bins = &power[1..];
        let arith = bins.iter().sum::<f64>() / bins.len() as f64;
        if arith > 0.0 {
            let geo = (bins.iter().map(|p| (p + arith * 1e-12).ln()).sum::<f64>() / bins.len() as f64).exp();
            total += geo / arith;
            count += 1;
        }
        start += hop;
    }
    if count == 0 { 1.0 } else { total / count as f64 }
}

/// Moves region edges to the first/last `block`-sample block (within one
/// frame of the frame-level edge) whose mean power reaches `level`.
fn refine_edges(r: &mut SpeechRegion, x: &[f64], sr: f64, block: usize, frame: usize, level: f64) {
    let loud = |start: usize| {
        let end = (start + block).min(x.len());
        end > start && x[start..end].iter().map(|v| v * v).sum::<f64>() / (end - start) as f64 >= level
    };
    let onset = (r.onset_s * sr).round() as usize;
    let offset = ((r.offset_s * sr).round() as usize).min(x.len());
    let lo = onset.saturating_sub(frame);
    let hi = (onset + frame).min(offset);
    if let Some(start) = (lo..hi).step_by(block).find(|&b| loud(b)) {
        r.onset_s = start as f64 / sr;
    }
    let lo = offset.saturating_sub(frame).max((r.onset_s * sr).round() as usize);
    let hi = (offset + frame).min(x.len());
    let mut blocks: Vec<usize> = (lo..hi).step_by(block).collect();
    blocks.reverse();
    if let Some(start) = blocks.into_iter().find(|&b| loud(b)) {
        r.offset_s = ((start + block).min(x.len())) as f64 / sr;
    }
}

/// Marks frames whose energy clears the buffer's own noise floor by
/// `threshold_db`, bridges short gaps and drops short blips.
///
/// The floor is a low percentile of frame energies, so the result does not
/// depend on overall gain; the mean is removed first, so it does not depend
/// on DC offset either. A buffer without energy dynamics (max within
/// `threshold_db` of the floor) is judged as a whole: tonal content is one
/// region, noise-like content none.
pub fn energy_vad(buf: &AudioBuffer, params: &VadParams) -> Result<Vec<SpeechRegion>, VadError> {
    params.validate()?;
    let sr = buf.sample_rate() as f64;
    let frame = ((params.frame_ms / 1000.0 * sr).round() as usize).max(1);
    let hop = ((params.hop_ms / 1000.0 * sr).round() as usize).max(1);
    if buf.len() < frame {
        return Err(VadError::TooShort { len: buf.len(), frame });
    }
    let raw = buf.to_f64();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let x: Vec<f64> = raw.iter().map(|v| v - mean).collect();

    let n_frames = 1 + (x.len() - frame) / hop;
    let energies: Vec<f64> = (0..n_frames)
        .map(|i| x[i * hop..i * hop + frame].iter().map(|v| v * v).sum::<f64>() / frame as f64)
        .collect();
    if energies.iter().all(|&e| e == 0.0) {
        return Ok(Vec::new());
    }
    let db: Vec<f64> = energies.iter().map(|&e| 10.0 * (e + 1e-20).log10()).collect();
    let floor = percentile(&db, params.floor_percentile);
    let peak = db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let duration = buf.duration_s();

    if peak - floor < params.threshold_db {
        return Ok(if mean_flatness(&x, frame, hop) < params.tonal_flatness {
            vec![SpeechRegion { onset_s: 0.0, offset_s: duration }]
        } else {
            Vec::new()
        });
    }

    let speech: Vec<bool> = db.iter().map(|&e| e >= floor + params.threshold_db).collect();
    let half_gap = (frame - hop.min(frame)) as f64 / 2.0;
    let frame_start = |i: usize| if i == 0 { 0.0 } else { (i * hop) as f64 + half_gap };
    let frame_end =
        |i: usize| if i + 1 == n_frames { x.len() as f64 } else { (i * hop) as f64 + half_gap + hop as f64 };

    let mut regions: Vec<SpeechRegion> = Vec::new();
    let mut i = 0;
    while i < n_frames {
        if !speech[i] {
            i += 1;
            continue;
        }
        let first = i;
        while i < n_frames && speech[i] {
            i += 1;
        }
        let onset_s = frame_start(first) / sr;
        let offset_s = (frame_end(i - 1) / sr).min(duration);
        match regions.last_mut() {
            Some(prev) if onset_s - prev.offset_s < params.hangover_ms / 1000.0 => prev.offset_s = offset_s,
            _ => regions.push(SpeechRegion { onset_s, offset_s }),
        }
    }
    let block = (params.refine_ms / 1000.0 * sr).round() as usize;
    if block > 0 {
        let level = 10f64.powf((floor + params.threshold_db) / 10.0);
        for r in regions.iter_mut() {
            refine_edges(r, &x, sr, block, frame, level);
        }
    }
    regions.retain(|r| r.duration_s() >= params.min_region_ms / 1000.0);
    Ok(regions)
}

/// A fixed-length analysis window inside a speech region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub file_id: String,
    pub onset_s: f64,
    pub offset_s: f64,
    pub index: usize,
}

impl Segment {
    pub fn duration_s(&self) -> f64 {
        self.offset_s - self.onset_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentParams {
    pub window_s: f64,
    pub hop_s: f64,
    /// Shortest tail window emitted at the end of a region.
    pub min_tail_s: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self { window_s: 1.5, hop_s: 0.75, min_tail_s: 0.5 }
    }
}

const TIME_EPS: f64 = 1e-9;

/// Slides `window_s` windows every `hop_s` through each region, then adds
/// one shorter tail window (if at least `min_tail_s` long) reaching the
/// region end. Segments never leave their region.
pub fn uniform_segment(regions: &[SpeechRegion], params: &SegmentParams, file_id: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut sorted = regions.to_vec();
    sorted.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
    for r in &sorted {
        let mut k = 0usize;
        loop {
            let start = r.onset_s + k as f64 * params.hop_s;
            if start + params.window_s > r.offset_s + TIME_EPS {
                if r.offset_s - start >= params.min_tail_s - TIME_EPS && r.offset_s - start > TIME_EPS {
                    let prev_end = if k == 0 { f64::NEG_INFINITY } else { start - params.hop_s + params.window_s };
                    if prev_end < r.offset_s - TIME_EPS {
                        out.push((start, r.offset_s));
                    }
                }
                break;
            }
            out.push((start, (start + params.window_s).min(r.offset_s)));
            k += 1;
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(index, (onset_s, offset_s))| Segment { file_id: file_id.to_string(), onset_s, offset_s, index })
        .collect()
}
