//! End-to-end diarization of one buffer and the shared configuration document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioBuffer, CANONICAL_RATE_HZ};
use crate::augment::AugmentSpec;
use crate::cluster::{agglomerative_cluster, labels_to_turns, ClusterError, ClusterResult, StopRule};
use crate::embed::{embed_segments, EmbedError, EmbedderConfig, Embedding, EmbeddingProvider, MfccEmbedder};
use crate::losses::TrainConfig;
use crate::preprocess::{spectral_gate_denoise, DenoiseParams, DspError};
use crate::resample::resample;
use crate::rttm::Turn;
use crate::vad::{energy_vad, uniform_segment, Segment, SegmentParams, SpeechRegion, VadError, VadParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Vad(#[from] VadError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Json(#[from] serde_json::Error),
}

/// Every tunable of the toolkit in one JSON document; absent fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub vad: VadParams,
    pub segment: SegmentParams,
    pub embedder: EmbedderConfig,
    pub stop: StopRule,
    pub collar_s: f64,
    /// Run the spectral gate before VAD.
    pub denoise: bool,
    pub denoise_params: DenoiseParams,
    pub augment: AugmentSpec,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vad: VadParams::default(),
            segment: SegmentParams::default(),
            embedder: EmbedderConfig::default(),
            stop: StopRule::default(),
            collar_s: 0.0,
            denoise: false,
            denoise_params: DenoiseParams::default(),
            augment: AugmentSpec::default(),
            train: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.vad.validate()?;
        let s = &self.segment;
        if !(s.window_s > 0.0 && s.hop_s > 0.0 && s.min_tail_s >= 0.0 && s.min_tail_s <= s.window_s) {
            return Err(PipelineError::Config("segment window/hop must be positive, 0 <= min_tail_s <= window_s".into()));
        }
        self.embedder.mfcc.validate(CANONICAL_RATE_HZ)?;
        if self.embedder.base_dims == 0 || self.embedder.base_dims > 3 * self.embedder.mfcc.n_coeffs {
            return Err(PipelineError::Config("embedder.base_dims out of range".into()));
        }
        match self.stop {
            StopRule::K(0) => return Err(PipelineError::Config("k must be positive".into())),
            StopRule::Threshold(t) if !t.is_finite() => return Err(PipelineError::Config("threshold must be finite".into())),
            _ => {}
        }
        if !(self.collar_s >= 0.0 && self.collar_s.is_finite()) {
            return Err(PipelineError::Config("collar_s must be non-negative".into()));
        }
        self.denoise_params.validate()?;
        self.augment.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Intermediate products of a diarization run.
#[derive(Debug, Clone)]
pub struct Diarization {
    pub regions: Vec<SpeechRegion>,
    pub segments: Vec<Segment>,
    pub embeddings: Vec<Embedding>,
    pub clusters: Option<ClusterResult>,
    pub turns: Vec<Turn>,
}

/// Canonical-rate, optionally denoised copy of the input.
pub fn prepare(buf: &AudioBuffer, config: &PipelineConfig) -> Result<AudioBuffer, PipelineError> {
    let canonical = resample(buf, CANONICAL_RATE_HZ);
    if !config.denoise {
        return Ok(canonical);
    }
    match spectral_gate_denoise(&canonical, &config.denoise_params) {
        Ok(clean) => Ok(clean),
        Err(DspError::TooShort { .. }) => Ok(canonical),
        Err(e) => Err(e.into()),
    }
}

/// Speech regions and analysis windows of a prepared buffer.
pub fn segment_buffer(
    prepared: &AudioBuffer,
    file_id: &str,
    config: &PipelineConfig,
) -> Result<(Vec<SpeechRegion>, Vec<Segment>), PipelineError> {
    let regions = match energy_vad(prepared, &config.vad) {
        Ok(r) => r,
        Err(VadError::TooShort { .. }) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let segments = uniform_segment(&regions, &config.segment, file_id);
    Ok((regions, segments))
}

/// Embeds, clusters and converts already computed segments into turns.
pub fn cluster_segments(
    prepared: &AudioBuffer,
    regions: Vec<SpeechRegion>,
    segments: Vec<Segment>,
    file_id: &str,
    provider: &dyn EmbeddingProvider,
    stop: StopRule,
) -> Result<Diarization, PipelineError> {
    if segments.is_empty() {
        return Ok(Diarization { regions, segments, embeddings: Vec::new(), clusters: None, turns: Vec::new() });
    }
    let embeddings = embed_segments(provider, prepared, &segments)?;
    let vectors: Vec<Vec<f64>> = embeddings.iter().map(|e| e.vector.clone()).collect();
    let stop = match stop {
        StopRule::K(k) => StopRule::K(k.min(vectors.len())),
        other => other,
    };
    let clusters = agglomerative_cluster(&vectors, stop)?;
    let turns = labels_to_turns(&segments, &clusters.labels, file_id)?;
    Ok(Diarization { regions, segments, embeddings, clusters: Some(clusters), turns })
}

/// VAD, segmentation, embedding (built-in MFCC unless `provider` is given),
/// clustering and turn assembly.
pub fn diarize(
    buf: &AudioBuffer,
    file_id: &str,
    config: &PipelineConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Diarization, PipelineError> {
    let prepared = prepare(buf, config)?;
    let (regions, segments) = segment_buffer(&prepared, file_id, config)?;
    let builtin = MfccEmbedder::new(config.embedder.clone());
    let provider = provider.unwrap_or(&builtin);
    cluster_segments(&prepared, regions, segments, file_id, provider, config.stop)
}
