//! Mono PCM audio buffers and RIFF/WAVE encoding.
//!
//! Only what the toolkit needs is supported: a single channel of either
//! 16-bit integer PCM or 32-bit IEEE float samples. 16-bit samples decode
//! as `s / 32768` and encode with round-to-nearest plus clamping, so any
//! buffer whose values are multiples of `1/32768` survives a round trip
//! unchanged.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

/// Sample rate every pipeline stage expects.
pub const CANONICAL_RATE_HZ: u32 = 16_000;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("file not found: {0}")]
    NotFound(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("cannot encode an empty buffer")]
    EmptyBuffer,
    #[error("invalid audio buffer: {0}")]
    InvalidBuffer(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A mono sequence of amplitudes plus its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Builds a buffer, rejecting a zero rate or non-finite samples.
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidBuffer("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::InvalidBuffer(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Builds a buffer from f64 samples (rounded to f32).
    pub fn from_f64(samples: &[f64], sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(samples.iter().map(|&s| s as f32).collect(), sample_rate)
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self { samples: vec![0.0; len], sample_rate: sample_rate.max(1) }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Samples widened to f64, the precision all DSP runs at.
    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| s as f64).collect()
    }

    /// Mean squared amplitude; zero for an empty buffer.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.power().sqrt()
    }

    /// Same rate, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<f32>) -> Self {
        Self { samples, sample_rate: self.sample_rate }
    }

    /// Slice in seconds, clamped to the buffer.
    pub fn slice_s(&self, onset_s: f64, offset_s: f64) -> &[f32] {
        let sr = self.sample_rate as f64;
        let a = ((onset_s * sr).round().max(0.0) as usize).min(self.samples.len());
        let b = ((offset_s * sr).round().max(0.0) as usize).min(self.samples.len());
        &self.samples[a..b.max(a)]
    }
}

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitDepth {
    Pcm16,
    F32,
}

/// Quantizes one sample to 16-bit with round-to-nearest and clamping.
pub fn quantize_i16(sample: f32) -> i16 {
    let scaled = (sample as f64 * 32768.0).round();
    scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Serializes a buffer as a RIFF/WAVE byte stream.
pub fn encode_wav(buf: &AudioBuffer, depth: BitDepth) -> Result<Vec<u8>, AudioError> {
    if buf.is_empty() {
        return Err(AudioError::EmptyBuffer);
    }
    let (format_tag, bits): (u16, u16) = match depth {
        BitDepth::Pcm16 => (FORMAT_PCM, 16),
        BitDepth::F32 => (FORMAT_IEEE_FLOAT, 32),
    };
    let block_align = bits / 8;
    let data_len = buf.len() * block_align as usize;
    let data_len_u32 = u32::try_from(data_len)
        .map_err(|_| AudioError::UnsupportedFormat("buffer too long for RIFF".into()))?;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len_u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len_u32.to_le_bytes());
    match depth {
        BitDepth::Pcm16 => {
            for &s in &buf.samples {
                out.extend_from_slice(&quantize_i16(s).to_le_bytes());
            }
        }
        BitDepth::F32 => {
            for &s in &buf.samples {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Parses a RIFF/WAVE byte stream, returning the buffer and its stored depth.
pub fn decode_wav(bytes: &[u8]) -> Result<(AudioBuffer, BitDepth), AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return Err(AudioError::CorruptHeader("missing RIFF tag".into()));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(AudioError::CorruptHeader("missing WAVE tag".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| AudioError::CorruptHeader(format!("chunk {:?} overruns file", String::from_utf8_lossy(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(AudioError::CorruptHeader("fmt chunk too short".into()));
                }
                let mut tag = u16_at(body, 0);
                let channels = u16_at(body, 2);
                let rate = u32_at(body, 4);
                let bits = u16_at(body, 14);
                if tag == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(AudioError::CorruptHeader("extensible fmt chunk too short".into()));
                    }
                    // first two bytes of the subformat GUID carry the codec
                    tag = u16_at(body, 24);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (len & 1);
    }

    let (tag, channels, rate, bits) =
        fmt.ok_or_else(|| AudioError::CorruptHeader("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::CorruptHeader("no data chunk".into()))?;
    if channels != 1 {
        return Err(AudioError::UnsupportedFormat(format!("{channels} channels, expected mono")));
    }
    if rate == 0 {
        return Err(AudioError::CorruptHeader("zero sample rate".into()));
    }
    let (samples, depth) = match (tag, bits) {
        (FORMAT_PCM, 16) => (
            data.chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
                .collect::<Vec<_>>(),
            BitDepth::Pcm16,
        ),
        (FORMAT_IEEE_FLOAT, 32) => (
            data.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect::<Vec<_>>(),
            BitDepth::F32,
        ),
        (tag, bits) => {
            return Err(AudioError::UnsupportedFormat(format!("codec {tag} at {bits} bits")));
        }
    };
    let buf = AudioBuffer::new(samples, rate).map_err(|e| AudioError::CorruptHeader(e.to_string()))?;
    Ok((buf, depth))
}

/// Reads a mono WAV file. No resampling happens here.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    read_wav_with_depth(path).map(|(buf, _)| buf)
}

pub fn read_wav_with_depth(path: impl AsRef<Path>) -> Result<(AudioBuffer, BitDepth), AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => AudioError::NotFound(path.display().to_string()),
        _ => AudioError::Io(e),
    })?;
    decode_wav(&bytes)
}

pub fn write_wav(path: impl AsRef<Path>, buf: &AudioBuffer, depth: BitDepth) -> Result<(), AudioError> {
    let bytes = encode_wav(buf, depth)?;
    fs::write(path, bytes)?;
    Ok(())
}
