//! MFCC features, segment pooling and the embedding-matrix file format.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::spectrum::{hamming, FftPair};
use crate::vad::Segment;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("segment [{onset_s:.3}, {offset_s:.3}] lies outside the {duration_s:.3} s buffer")]
    SegmentOutOfRange { onset_s: f64, offset_s: f64, duration_s: f64 },
    #[error("segment of {len} samples is shorter than one {frame}-sample frame")]
    TooShort { len: usize, frame: usize },
    #[error("need at least 2 frames to pool, got {0}")]
    TooFewFrames(usize),
    #[error("corrupt embedding header: {0}")]
    CorruptHeader(String),
    #[error("embedding file truncated: expected {expected} bytes of data, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("embedding dimension {found} does not match the configured {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("no external embedding for segment {0}")]
    MissingIndex(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub vector: Vec<f64>,
    /// Index of the segment this vector describes.
    pub segment_index: usize,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Anything that maps a segment of a buffer to a fixed-length vector.
pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, buf: &AudioBuffer, segment: &Segment) -> Result<Embedding, EmbedError>;
}

/// Embeds every segment (in parallel), keeping segment order.
pub fn embed_segments<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    buf: &AudioBuffer,
    segments: &[Segment],
) -> Result<Vec<Embedding>, EmbedError> {
    segments.par_iter().map(|s| provider.embed(buf, s)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccParams {
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub n_fft: usize,
    pub f_min_hz: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub f_max_hz: Option<f64>,
    /// Regression half-width for deltas.
    pub delta_width: usize,
    /// Subtract the segment's mean cepstrum from every frame.
    pub mean_subtraction: bool,
}

impl Default for MfccParams {
    fn default() -> Self {
        Self {
            n_mels: 40,
            n_coeffs: 13,
            frame_ms: 25.0,
            hop_ms: 10.0,
            n_fft: 512,
            f_min_hz: 0.0,
            f_max_hz: None,
            delta_width: 2,
            mean_subtraction: true,
        }
    }
}

impl MfccParams {
    pub fn validate(&self, sample_rate: u32) -> Result<(), EmbedError> {
        let nyquist = sample_rate as f64 / 2.0;
        let f_max = self.f_max_hz.unwrap_or(nyquist);
        let frame = (self.frame_ms / 1000.0 * sample_rate as f64).round() as usize;
        if self.n_mels == 0 || self.n_coeffs == 0 || self.n_coeffs >= self.n_mels {
            return Err(EmbedError::InvalidParams("need 0 < n_coeffs < n_mels".into()));
        }
        if !(self.hop_ms > 0.0 && frame > 0 && frame <= self.n_fft) {
            return Err(EmbedError::InvalidParams(format!("frame of {frame} samples must fit n_fft {}", self.n_fft)));
        }
        if !(self.f_min_hz >= 0.0 && self.f_min_hz < f_max && f_max <= nyquist) {
            return Err(EmbedError::InvalidParams("need 0 <= f_min < f_max <= Nyquist".into()));
        }
        if self.delta_width == 0 {
            return Err(EmbedError::InvalidParams("delta_width must be positive".into()));
        }
        Ok(())
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters over bins `0..=n_fft/2`, one row per band.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64)).collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;
    (0..n_mels)
        .map(|m| {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..=n_fft / 2)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= l || f >= r {
                        0.0
                    } else if f <= c {
                        (f - l) / (c - l)
                    } else {
                        (r - f) / (r - c)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II rows `1..=n_coeffs` (row 0, the energy term, is skipped).
fn dct_rows(n_in: usize, n_coeffs: usize) -> Vec<Vec<f64>> {
    let scale = (2.0 / n_in as f64).sqrt();
    (1..=n_coeffs)
        .map(|k| {
            (0..n_in)
                .map(|n| scale * (std::f64::consts::PI * k as f64 * (n as f64 + 0.5) / n_in as f64).cos())
                .collect()
        })
        .collect()
}

/// Regression deltas with edge replication.
pub fn deltas(rows: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    let t_len = rows.len();
    if t_len == 0 {
        return Vec::new();
    }
    let dim = rows[0].len();
    let denom = 2.0 * (1..=width).map(|n| (n * n) as f64).sum::<f64>();
    (0..t_len)
        .map(|t| {
            (0..dim)
                .map(|d| {
                    (1..=width)
                        .map(|n| {
                            let ahead = rows[(t + n).min(t_len - 1)][d];
                            let behind = rows[t.saturating_sub(n)][d];
                            n as f64 * (ahead - behind)
                        })
                        .sum::<f64>()
                        / denom
                })
                .collect()
        })
        .collect()
}

/// Frames x (cepstra, deltas, delta-deltas) for one segment.
///
/// Cepstra are c1..c`n_coeffs` of the log-mel spectrum; c0 is dropped, so a
/// gain change only shifts the discarded term.
pub fn mfcc_features(buf: &AudioBuffer, segment: &Segment, params: &MfccParams) -> Result<Vec<Vec<f64>>, EmbedError> {
    let sr = buf.sample_rate();
    params.validate(sr)?;
    let duration_s = buf.duration_s();
    let slack = 0.5 / sr as f64;
    if segment.onset_s < -slack || segment.offset_s > duration_s + slack || segment.offset_s < segment.onset_s {
        return Err(EmbedError::SegmentOutOfRange { onset_s: segment.onset_s, offset_s: segment.offset_s, duration_s });
    }
    let samples: Vec<f64> = buf.slice_s(segment.onset_s, segment.offset_s).iter().map(|&s| s as f64).collect();
    let frame = (params.frame_ms / 1000.0 * sr as f64).round() as usize;
    let hop = ((params.hop_ms / 1000.0 * sr as f64).round() as usize).max(1);
    if samples.len() < frame {
        return Err(EmbedError::TooShort { len: samples.len(), frame });
    }
    let f_max = params.f_max_hz.unwrap_or(sr as f64 / 2.0);
    let bank = mel_filterbank(params.n_mels, params.n_fft, sr, params.f_min_hz, f_max);
    let dct = dct_rows(params.n_mels, params.n_coeffs);
    let window = hamming(frame);
    let fft = FftPair::new(params.n_fft);
    let mut scratch = Vec::with_capacity(params.n_fft);

    let n_frames = 1 + (samples.len() - frame) / hop;
    let mut ceps: Vec<Vec<f64>> = (0..n_frames)
        .map(|i| {
            let windowed: Vec<f64> = samples[i * hop..i * hop + frame].iter().zip(&window).map(|(s, w)| s * w).collect();
            let power = fft.power_spectrum(&windowed, &mut scratch);
            let log_mel: Vec<f64> = bank
                .iter()
                .map(|row| (row.iter().zip(&power).map(|(w, p)| w * p).sum::<f64>() / frame as f64 + 1e-12).ln())
                .collect();
            dct.iter().map(|row| row.iter().zip(&log_mel).map(|(a, b)| a * b).sum()).collect()
        })
        .collect();

    if params.mean_subtraction {
        for d in 0..params.n_coeffs {
            let mean = ceps.iter().map(|r| r[d]).sum::<f64>() / n_frames as f64;
            ceps.iter_mut().for_each(|r| r[d] -= mean);
        }
    }
    let d1 = deltas(&ceps, params.delta_width);
    let d2 = deltas(&d1, params.delta_width);
    Ok(ceps
        .into_iter()
        .zip(d1)
        .zip(d2)
        .map(|((mut c, a), b)| {
            c.extend(a);
            c.extend(b);
            c
        })
        .collect())
}

/// Per-dimension mean then standard deviation over frames, using the first
/// `base_dims` columns of `features`.
pub fn pool_embedding(features: &[Vec<f64>], base_dims: usize) -> Result<Vec<f64>, EmbedError> {
    if features.len() < 2 {
        return Err(EmbedError::TooFewFrames(features.len()));
    }
    let width = features[0].len();
    if base_dims == 0 || base_dims > width {
        return Err(EmbedError::DimMismatch { expected: base_dims, found: width });
    }
    let n = features.len() as f64;
    let mut out = vec![0.0; 2 * base_dims];
    for d in 0..base_dims {
        let mean = features.iter().map(|r| r[d]).sum::<f64>() / n;
        let var = features.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
        out[d] = mean;
        out[base_dims + d] = var.sqrt();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderConfig {
    pub mfcc: MfccParams,
    /// Leading feature columns pooled (13 cepstra + 13 deltas by default).
    pub base_dims: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        // Pooled means of mean-subtracted cepstra would be identically zero.
        Self { mfcc: MfccParams { mean_subtraction: false, ..MfccParams::default() }, base_dims: 26 }
    }
}

/// The built-in spectral embedder: MFCC mean+std pooling.
#[derive(Debug, Clone, Default)]
pub struct MfccEmbedder {
    pub config: EmbedderConfig,
}

impl MfccEmbedder {
    pub fn new(config: EmbedderConfig) -> Self {
        Self { config }
    }
}

impl EmbeddingProvider for MfccEmbedder {
    fn dim(&self) -> usize {
        2 * self.config.base_dims
    }

    fn embed(&self, buf: &AudioBuffer, segment: &Segment) -> Result<Embedding, EmbedError> {
        let feats = mfcc_features(buf, segment, &self.config.mfcc)?;
        Ok(Embedding { vector: pool_embedding(&feats, self.config.base_dims)?, segment_index: segment.index })
    }
}

/// Precomputed vectors looked up by segment index.
#[derive(Debug, Clone)]
pub struct ExternalEmbeddings {
    dim: usize,
    rows: BTreeMap<usize, Embedding>,
}

impl ExternalEmbeddings {
    pub fn new(dim: usize, rows: BTreeMap<usize, Embedding>) -> Self {
        Self { dim, rows }
    }

    pub fn load(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Self, EmbedError> {
        let (dim, rows) = read_embedding_matrix(path)?;
        if let Some(expected) = expected_dim {
            if expected != dim {
                return Err(EmbedError::DimMismatch { expected, found: dim });
            }
        }
        Ok(Self { dim, rows: to_embeddings(rows) })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Embedding> {
        self.rows.get(&index)
    }
}

impl EmbeddingProvider for ExternalEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _buf: &AudioBuffer, segment: &Segment) -> Result<Embedding, EmbedError> {
        self.rows.get(&segment.index).cloned().ok_or(EmbedError::MissingIndex(segment.index))
    }
}

fn to_embeddings(rows: Vec<Vec<f32>>) -> BTreeMap<usize, Embedding> {
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| (i, Embedding { vector: r.into_iter().map(f64::from).collect(), segment_index: i }))
        .collect()
}

/// Serializes rows as `u32 count, u32 dim` (little endian) then row-major f32.
pub fn encode_embedding_matrix(rows: &[Vec<f32>], dim: usize) -> Result<Vec<u8>, EmbedError> {
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(EmbedError::DimMismatch { expected: dim, found: bad.len() });
    }
    let mut out = Vec::with_capacity(8 + 4 * dim * rows.len());
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for v in rows.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_embedding_matrix(bytes: &[u8]) -> Result<(usize, Vec<Vec<f32>>), EmbedError> {
    if bytes.len() < 8 {
        return Err(EmbedError::CorruptHeader(format!("{} bytes, need an 8-byte header", bytes.len())));
    }
    let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(EmbedError::CorruptHeader("dimension 0".into()));
    }
    let body = &bytes[8..];
    let expected = count * dim * 4;
    if body.len() < expected {
        return Err(EmbedError::TruncatedFile { expected, found: body.len() });
    }
    if body.len() > expected {
        return Err(EmbedError::CorruptHeader(format!("{} trailing bytes", body.len() - expected)));
    }
    let values: Vec<f32> = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((dim, values.chunks(dim).map(<[f32]>::to_vec).collect()))
}

pub fn write_embedding_matrix(path: impl AsRef<Path>, rows: &[Vec<f32>], dim: usize) -> Result<(), EmbedError> {
    let bytes = encode_embedding_matrix(rows, dim)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_embedding_matrix(path: impl AsRef<Path>) -> Result<(usize, Vec<Vec<f32>>), EmbedError> {
    decode_embedding_matrix(&std::fs::read(path)?)
}

/// Loads an embedding-matrix file as a map from segment index to embedding.
pub fn load_external_embeddings(
    path: impl AsRef<Path>,
    expected_dim: Option<usize>,
) -> Result<BTreeMap<usize, Embedding>, EmbedError> {
    Ok(ExternalEmbeddings::load(path, expected_dim)?.rows)
}

/// Writes embeddings in segment order.
pub fn export_embeddings(path: impl AsRef<Path>, embs: &[Embedding]) -> Result<(), EmbedError> {
    let dim = embs.first().map_or(1, Embedding::dim);
    let rows: Vec<Vec<f32>> = embs.iter().map(|e| e.vector.iter().map(|&v| v as f32).collect()).collect();
    write_embedding_matrix(path, &rows, dim)
}
