//! Python bindings for the diarkit toolkit.
//!
//! Audio crosses the boundary as a list of floats plus a sample rate; turns
//! as `(file_id, speaker_id, onset_s, duration_s)` tuples; reports as dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use diarkit::audio::{self, AudioBuffer, AudioError, BitDepth};
use diarkit::augment::{augment_file, AugmentSpec, NoiseKind};
use diarkit::cluster::{agglomerative_cluster, StopRule};
use diarkit::corpus::{generate_dataset, parse_layout, CorpusConfig, CorpusError};
use diarkit::embed::{EmbeddingProvider, MfccEmbedder};
use diarkit::losses;
use diarkit::metrics::{self, MetricReport};
use diarkit::pipeline::{self, PipelineConfig};
use diarkit::preprocess;
use diarkit::rttm::{emit_rttm, parse_rttm, Turn};
use diarkit::vad::{energy_vad, Segment, VadParams};

type PyTurn = (String, String, f64, f64);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn audio_err(e: AudioError) -> PyErr {
    match e {
        AudioError::NotFound(_) | AudioError::Io(_) => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn buffer(samples: Vec<f32>, sample_rate: u32) -> PyResult<AudioBuffer> {
    AudioBuffer::new(samples, sample_rate).map_err(audio_err)
}

fn to_py_turns(turns: &[Turn]) -> Vec<PyTurn> {
    turns.iter().map(|t| (t.file_id.clone(), t.speaker_id.clone(), t.onset_s, t.duration_s)).collect()
}

fn from_py_turns(turns: Vec<PyTurn>) -> Vec<Turn> {
    turns.into_iter().map(|(f, s, o, d)| Turn::new(f, s, o, d)).collect()
}

fn config_from(config_json: Option<&str>) -> PyResult<PipelineConfig> {
    let cfg = match config_json {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => PipelineConfig::default(),
    };
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Reads a WAV file; returns (samples, sample_rate).
#[pyfunction]
fn read_wav(path: PathBuf) -> PyResult<(Vec<f32>, u32)> {
    let buf = audio::read_wav(&path).map_err(audio_err)?;
    let sr = buf.sample_rate();
    Ok((buf.into_samples(), sr))
}

/// Writes mono WAV; `depth` is "pcm16" or "f32".
#[pyfunction]
#[pyo3(signature = (path, samples, sample_rate, depth = "pcm16"))]
fn write_wav(path: PathBuf, samples: Vec<f32>, sample_rate: u32, depth: &str) -> PyResult<()> {
    let depth = match depth {
        "pcm16" => BitDepth::Pcm16,
        "f32" => BitDepth::F32,
        other => return Err(value_err(format!("unknown bit depth {other:?}"))),
    };
    audio::write_wav(&path, &buffer(samples, sample_rate)?, depth).map_err(audio_err)
}

#[pyfunction]
fn parse_rttm_text(text: &str) -> PyResult<Vec<PyTurn>> {
    Ok(to_py_turns(&parse_rttm(text).map_err(value_err)?))
}

#[pyfunction]
fn emit_rttm_text(turns: Vec<PyTurn>) -> String {
    emit_rttm(&from_py_turns(turns))
}

/// Speech regions as (onset_s, offset_s) with default VAD parameters.
#[pyfunction]
fn detect_speech(samples: Vec<f32>, sample_rate: u32) -> PyResult<Vec<(f64, f64)>> {
    let regions = energy_vad(&buffer(samples, sample_rate)?, &VadParams::default()).map_err(value_err)?;
    Ok(regions.into_iter().map(|r| (r.onset_s, r.offset_s)).collect())
}

/// Full pipeline on one buffer. `k` forces the speaker count; otherwise
/// `threshold` (or the configured stop rule) decides.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, file_id = "audio", k = None, threshold = None, denoise = None, config_json = None))]
#[allow(clippy::too_many_arguments)]
fn diarize(
    py: Python<'_>,
    samples: Vec<f32>,
    sample_rate: u32,
    file_id: &str,
    k: Option<usize>,
    threshold: Option<f64>,
    denoise: Option<bool>,
    config_json: Option<&str>,
) -> PyResult<Vec<PyTurn>> {
    let mut cfg = config_from(config_json)?;
    if let Some(t) = threshold {
        cfg.stop = StopRule::Threshold(t);
    }
    if let Some(k) = k {
        cfg.stop = StopRule::K(k);
    }
    if let Some(d) = denoise {
        cfg.denoise = d;
    }
    cfg.validate().map_err(value_err)?;
    let buf = buffer(samples, sample_rate)?;
    let result = py.detach(|| pipeline::diarize(&buf, file_id, &cfg, None)).map_err(value_err)?;
    Ok(to_py_turns(&result.turns))
}

/// 52-dimensional MFCC statistics embedding of `[onset_s, offset_s)`.
#[pyfunction]
fn mfcc_embedding(samples: Vec<f32>, sample_rate: u32, onset_s: f64, offset_s: f64) -> PyResult<Vec<f64>> {
    let buf = buffer(samples, sample_rate)?;
    let seg = Segment { file_id: String::new(), onset_s, offset_s, index: 0 };
    Ok(MfccEmbedder::default().embed(&buf, &seg).map_err(value_err)?.vector)
}

/// Average-linkage cosine clustering; returns (labels, merges).
#[pyfunction]
#[pyo3(signature = (embeddings, k = None, threshold = 0.5))]
fn cluster(embeddings: Vec<Vec<f64>>, k: Option<usize>, threshold: f64) -> PyResult<(Vec<usize>, Vec<(usize, usize, f64)>)> {
    let stop = k.map_or(StopRule::Threshold(threshold), StopRule::K);
    let r = agglomerative_cluster(&embeddings, stop).map_err(value_err)?;
    Ok((r.labels, r.merge_trace.into_iter().map(|m| (m.cluster_a, m.cluster_b, m.distance)).collect()))
}

/// MetricReport (der, jer, cluster_purity, ...) as a dict.
#[pyfunction]
#[pyo3(signature = (reference, hypothesis, collar = 0.0))]
fn evaluate<'py>(py: Python<'py>, reference: Vec<PyTurn>, hypothesis: Vec<PyTurn>, collar: f64) -> PyResult<Bound<'py, PyAny>> {
    let report: MetricReport =
        metrics::evaluate(&from_py_turns(reference), &from_py_turns(hypothesis), collar).map_err(value_err)?;
    json_to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (reference, hypothesis, collar = 0.0))]
fn compute_der(reference: Vec<PyTurn>, hypothesis: Vec<PyTurn>, collar: f64) -> PyResult<f64> {
    Ok(metrics::compute_der(&from_py_turns(reference), &from_py_turns(hypothesis), collar).map_err(value_err)?.der)
}

#[pyfunction]
fn compute_eer(genuine: Vec<f64>, impostor: Vec<f64>) -> PyResult<f64> {
    metrics::compute_eer(&genuine, &impostor).map_err(value_err)
}

#[pyfunction]
fn relative_improvement(baseline: f64, value: f64) -> PyResult<f64> {
    metrics::relative_improvement(baseline, value).map_err(value_err)
}

/// SNR in dB of `signal` against `noise`; None when the noise is silent.
#[pyfunction]
fn snr_db(signal: Vec<f32>, noise: Vec<f32>, sample_rate: u32) -> PyResult<Option<f64>> {
    match preprocess::snr_db(&buffer(signal, sample_rate)?, &buffer(noise, sample_rate)?) {
        Ok(v) => Ok(Some(v)),
        Err(preprocess::DspError::ZeroNoise) => Ok(None),
        Err(e) => Err(value_err(e)),
    }
}

#[pyfunction]
fn denoise(samples: Vec<f32>, sample_rate: u32) -> PyResult<Vec<f32>> {
    let out = preprocess::spectral_gate_denoise(&buffer(samples, sample_rate)?, &Default::default()).map_err(value_err)?;
    Ok(out.into_samples())
}

/// Speed change, then pitch shift, then additive noise ("white" or "babble").
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, noise_intensity = 0.0, pitch_semitones = 0.0, speed_factor = 1.0, seed = 0, noise = "white", allow_out_of_range = false))]
#[allow(clippy::too_many_arguments)]
fn augment(
    samples: Vec<f32>,
    sample_rate: u32,
    noise_intensity: f64,
    pitch_semitones: f64,
    speed_factor: f64,
    seed: u64,
    noise: &str,
    allow_out_of_range: bool,
) -> PyResult<Vec<f32>> {
    let spec = AugmentSpec {
        noise_intensity,
        noise_kind: noise.parse::<NoiseKind>().map_err(value_err)?,
        pitch_semitones,
        speed_factor,
        rng_seed: seed,
        allow_out_of_range,
    };
    Ok(augment_file(&buffer(samples, sample_rate)?, &spec).map_err(value_err)?.into_samples())
}

/// CTC negative log-likelihood and gradient; blank is index 0.
#[pyfunction]
fn ctc_loss(log_probs: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let r = losses::ctc_loss(&log_probs, &labels).map_err(value_err)?;
    Ok((r.loss, r.grad))
}

/// Writes the synthetic corpus and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = 0, layout = None, overlap = None))]
fn generate_corpus(out_dir: PathBuf, seed: u64, layout: Option<&str>, overlap: Option<f64>) -> PyResult<PathBuf> {
    let mut cfg = CorpusConfig { seed, ..CorpusConfig::default() };
    if let Some(l) = layout {
        cfg.layout = parse_layout(l).map_err(value_err)?;
    }
    if let Some(o) = overlap {
        cfg.overlap_fraction = o;
    }
    generate_dataset(&cfg, &out_dir).map_err(|e| match e {
        CorpusError::Io(_) => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    })?;
    Ok(out_dir.join("manifest.json"))
}

/// Default pipeline configuration as a dict.
#[pyfunction]
fn default_config(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    json_to_py(py, &PipelineConfig::default())
}

#[pymodule]
fn diarkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(write_wav, m)?)?;
    m.add_function(wrap_pyfunction!(parse_rttm_text, m)?)?;
    m.add_function(wrap_pyfunction!(emit_rttm_text, m)?)?;
    m.add_function(wrap_pyfunction!(detect_speech, m)?)?;
    m.add_function(wrap_pyfunction!(diarize, m)?)?;
    m.add_function(wrap_pyfunction!(mfcc_embedding, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(compute_der, m)?)?;
    m.add_function(wrap_pyfunction!(compute_eer, m)?)?;
    m.add_function(wrap_pyfunction!(relative_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(snr_db, m)?)?;
    m.add_function(wrap_pyfunction!(denoise, m)?)?;
    m.add_function(wrap_pyfunction!(augment, m)?)?;
    m.add_function(wrap_pyfunction!(ctc_loss, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add("SAMPLE_RATE", audio::CANONICAL_RATE_HZ)?;
    Ok(())
}
