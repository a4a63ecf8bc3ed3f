//! Command implementations behind the `diarkit` binary.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use diarkit::audio::{read_wav, read_wav_with_depth, write_wav, AudioError, CANONICAL_RATE_HZ};
use diarkit::augment::{augment_file, AugmentSpec, NoiseKind};
use diarkit::cluster::StopRule;
use diarkit::corpus::{generate_dataset, parse_layout, resolve, CorpusConfig, CorpusError, CorpusManifest, SplitFractions};
use diarkit::embed::{export_embeddings, mfcc_features, EmbedError, ExternalEmbeddings, MfccParams};
use diarkit::losses::{sequences_from_labels, train_toy, LossError, TrainData};
use diarkit::metrics::{MetricError, MetricReport, Scoreboard};
use diarkit::pipeline::{cluster_segments, diarize, prepare, segment_buffer, PipelineConfig, PipelineError};
use diarkit::preprocess::{estimate_snr_db, snr_db, DspError};
use diarkit::rttm::{emit_rttm, group_by_file, parse_rttm, rescale_turns, Turn};
use diarkit::vad::Segment;

pub const SEED_ENV: &str = "DIARKIT_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("pairing error: {0}")]
    Pairing(String),
    #[error("validation error: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Pairing(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() { CliError::Io(e.to_string()) } else { CliError::Validation(e.to_string()) }
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        match e {
            AudioError::NotFound(_) | AudioError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(_) => CliError::Io(e.to_string()),
            CorpusError::Audio(a) => a.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io(_) => CliError::Io(e.to_string()),
            PipelineError::Embed(inner) => inner.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::MixedFiles(..) => CliError::Pairing(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<DspError> for CliError {
    fn from(e: DspError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "diarkit", version, about = "Speaker diarization toolkit")]
pub struct Cli {
    /// Worker threads for batch commands (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic corpus.
    Corpus(CorpusArgs),
    /// Diarize a WAV file or every entry of a manifest.
    Diarize(DiarizeArgs),
    /// Score hypothesis RTTM against reference RTTM.
    Evaluate(EvaluateArgs),
    /// Apply noise, pitch and speed augmentation to a WAV file.
    Augment(AugmentArgs),
    /// Measure signal-to-noise ratio.
    Snr(SnrArgs),
    /// Train the toy dual-loss classifier.
    TrainToy(TrainToyArgs),
    /// Write MFCC segment embeddings in the embedding-matrix format.
    ExportEmbeddings(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Folder counts, e.g. "0:60,1:58,2:51,3:50,4:50".
    #[arg(long)]
    pub layout: Option<String>,
    /// Train/val/test fractions, e.g. "0.7,0.2,0.1".
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub overlap: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DiarizeArgs {
    /// A .wav file or a corpus manifest.json.
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output RTTM file (WAV input) or directory (manifest input).
    #[arg(long)]
    pub out_rttm: PathBuf,
    /// Also write the segment embeddings (WAV input only).
    #[arg(long)]
    pub export_embeddings: Option<PathBuf>,
    /// Use precomputed embeddings instead of the built-in embedder (WAV input only).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Cluster into exactly this many speakers.
    #[arg(long)]
    pub k: Option<usize>,
    /// Distance threshold for threshold-mode clustering.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub denoise: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Reference RTTM file or directory.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Hypothesis RTTM file or directory.
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub collar: f64,
    /// Write the MetricReport here instead of stdout.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Reference RTTM to rescale alongside the audio.
    #[arg(long)]
    pub rttm: Option<PathBuf>,
    /// Where the rescaled RTTM goes (default: output with .rttm extension).
    #[arg(long)]
    pub out_rttm: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub intensity: Option<f64>,
    #[arg(long)]
    pub semitones: Option<f64>,
    #[arg(long)]
    pub speed: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// white or babble.
    #[arg(long)]
    pub noise: Option<String>,
    /// Allow pitch/speed outside the default augmentation ranges.
    #[arg(long)]
    pub allow_out_of_range: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SnrArgs {
    /// Either the clean signal (with --noise) or the noisy recording (with --clean).
    pub input: PathBuf,
    #[arg(long, conflicts_with = "clean")]
    pub noise: Option<PathBuf>,
    #[arg(long)]
    pub clean: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainToyArgs {
    /// Corpus manifest; frames are labelled from the reference RTTM.
    #[arg(long, conflicts_with = "data")]
    pub manifest: Option<PathBuf>,
    /// JSON training data (features, frame_labels, sequences, n_classes).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_history: PathBuf,
    /// Model weights in the embedding-matrix format (rows: weights then bias).
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Manifest mode: at most this many training files.
    #[arg(long, default_value_t = 20)]
    pub max_files: usize,
    /// Manifest mode: keep every n-th MFCC frame.
    #[arg(long, default_value_t = 10)]
    pub frame_stride: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the segment list as JSON.
    #[arg(long)]
    pub segments: Option<PathBuf>,
}

/// Seed precedence: flag, then the environment, then `fallback`.
pub fn resolve_seed(flag: Option<u64>, fallback: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(fallback),
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_at(p))?;
            let cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            Ok(cfg)
        }
        None => Ok(PipelineConfig::default()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_at(parent))?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(io_at(path))
}

pub fn cmd_corpus(args: &CorpusArgs) -> Result<PathBuf, CliError> {
    let mut config = CorpusConfig { seed: resolve_seed(args.seed, 0)?, ..CorpusConfig::default() };
    if let Some(l) = &args.layout {
        config.layout = parse_layout(l)?;
    }
    if let Some(s) = &args.split {
        config.split = SplitFractions::parse(s)?;
    }
    if let Some(o) = args.overlap {
        config.overlap_fraction = o;
    }
    let manifest = generate_dataset(&config, &args.out_dir)?;
    eprintln!("corpus: {} files, seed {}", manifest.entries.len(), manifest.seed);
    Ok(args.out_dir.join("manifest.json"))
}

fn diarize_config(args: &DiarizeArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(k) = args.k {
        cfg.stop = StopRule::K(k);
    }
    if let Some(t) = args.threshold {
        cfg.stop = StopRule::Threshold(t);
    }
    if args.denoise {
        cfg.denoise = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn file_id_of(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("audio").to_string()
}

/// Diarizes one WAV file and returns its hypothesis turns.
pub fn diarize_file(
    wav: &Path,
    file_id: &str,
    cfg: &PipelineConfig,
    external: Option<&ExternalEmbeddings>,
    export: Option<&Path>,
) -> Result<Vec<Turn>, CliError> {
    let buf = read_wav(wav)?;
    let prepared = prepare(&buf, cfg)?;
    let (regions, segments) = segment_buffer(&prepared, file_id, cfg)?;
    let result = match external {
        Some(ext) => cluster_segments(&prepared, regions, segments, file_id, ext, cfg.stop)?,
        None => diarize(&prepared, file_id, &PipelineConfig { denoise: false, ..cfg.clone() }, None)?,
    };
    if let Some(path) = export {
        export_embeddings(path, &result.embeddings)?;
    }
    Ok(result.turns)
}

pub fn cmd_diarize(args: &DiarizeArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = diarize_config(args)?;
    let is_manifest = args.input.extension().is_some_and(|e| e == "json");
    if !is_manifest {
        let external = match &args.embeddings {
            Some(p) => Some(ExternalEmbeddings::load(p, None)?),
            None => None,
        };
        let id = file_id_of(&args.input);
        let turns = diarize_file(&args.input, &id, &cfg, external.as_ref(), args.export_embeddings.as_deref())?;
        if let Some(parent) = args.out_rttm.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io_at(parent))?;
        }
        fs::write(&args.out_rttm, emit_rttm(&turns)).map_err(io_at(&args.out_rttm))?;
        eprintln!("diarize: {id}: {} turns", turns.len());
        return Ok(vec![args.out_rttm.clone()]);
    }
    if args.embeddings.is_some() || args.export_embeddings.is_some() {
        return Err(CliError::Usage("--embeddings and --export-embeddings need a single WAV input".into()));
    }
    let manifest = CorpusManifest::load(&args.input)?;
    let root = args.input.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(&args.out_rttm).map_err(io_at(&args.out_rttm))?;
    let results: Vec<(String, Result<PathBuf, CliError>)> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let id = e.file_id().to_string();
            let out = args.out_rttm.join(format!("{id}.rttm"));
            let r = diarize_file(&resolve(root, &e.path), &id, &cfg, None, None)
                .and_then(|turns| fs::write(&out, emit_rttm(&turns)).map_err(io_at(&out)).map(|_| out.clone()));
            (id, r)
        })
        .collect();
    let mut written = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(p) => written.push(p),
            Err(e) => {
                eprintln!("diarize: {id}: {e}");
                failures.push((id, e));
            }
        }
    }
    eprintln!("diarize: {} of {} files written", written.len(), manifest.entries.len());
    if let Some((id, first)) = failures.into_iter().next() {
        return Err(match first {
            CliError::Io(m) => CliError::Io(format!("{id}: {m} (and possibly other files)")),
            other => CliError::Validation(format!("{id}: {other} (and possibly other files)")),
        });
    }
    Ok(written)
}

/// Turns by file id; empty RTTM files still register their stem as a file id.
fn load_rttm_tree(path: &Path) -> Result<BTreeMap<String, Vec<Turn>>, CliError> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = walk(path)?.into_iter().filter(|p| p.extension().is_some_and(|e| e == "rttm")).collect();
        v.sort();
        v
    } else if path.exists() {
        vec![path.to_path_buf()]
    } else {
        return Err(CliError::Io(format!("{}: not found", path.display())));
    };
    let mut out: BTreeMap<String, Vec<Turn>> = BTreeMap::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(io_at(&f))?;
        let turns = parse_rttm(&text).map_err(|e| CliError::Validation(format!("{}: {e}", f.display())))?;
        if turns.is_empty() {
            out.entry(file_id_of(&f)).or_default();
        }
        for (id, t) in group_by_file(turns) {
            out.entry(id).or_default().extend(t);
        }
    }
    Ok(out)
}

fn walk(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_at(dir))? {
        let p = entry.map_err(io_at(dir))?.path();
        if p.is_dir() {
            out.extend(walk(&p)?);
        } else {
            out.push(p);
        }
    }
    Ok(out)
}

/// Percentage string with one decimal, e.g. "15.0%".
pub fn format_percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<MetricReport, CliError> {
    let reference = load_rttm_tree(&args.reference)?;
    let hyp = load_rttm_tree(&args.hyp)?;
    let single_pair = args.reference.is_file() && args.hyp.is_file() && reference.len() <= 1 && hyp.len() <= 1;
    let mut board = Scoreboard::default();
    if single_pair {
        let id = reference.keys().next().cloned().unwrap_or_else(|| file_id_of(&args.reference));
        let r = reference.into_values().next().unwrap_or_default();
        let h: Vec<Turn> =
            hyp.into_values().next().unwrap_or_default().into_iter().map(|t| Turn { file_id: id.clone(), ..t }).collect();
        board.add(&r, &h, args.collar)?;
    } else {
        let missing: Vec<&String> = reference.keys().filter(|k| !hyp.contains_key(*k)).collect();
        if !missing.is_empty() {
            let names: Vec<&str> = missing.iter().map(|s| s.as_str()).collect();
            return Err(CliError::Pairing(format!("no hypothesis for file_id {}", names.join(", "))));
        }
        let extra: BTreeSet<&String> = hyp.keys().filter(|k| !reference.contains_key(*k)).collect();
        if !extra.is_empty() {
            let names: Vec<&str> = extra.iter().map(|s| s.as_str()).collect();
            return Err(CliError::Pairing(format!("no reference for file_id {}", names.join(", "))));
        }
        for (id, r) in &reference {
            board.add(r, &hyp[id], args.collar)?;
        }
    }
    let report = board.report()?;
    println!("DER: {}", format_percent(report.der.der));
    println!("JER: {}", format_percent(report.jer));
    println!("Cluster purity: {}", format_percent(report.cluster_purity));
    match &args.json {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct AugmentSummary {
    pub output: PathBuf,
    pub rttm: Option<PathBuf>,
    pub snr_db: Option<f64>,
}

pub fn cmd_augment(args: &AugmentArgs) -> Result<AugmentSummary, CliError> {
    let mut spec: AugmentSpec = load_config(args.config.as_deref())?.augment;
    if let Some(v) = args.intensity {
        spec.noise_intensity = v;
    }
    if let Some(v) = args.semitones {
        spec.pitch_semitones = v;
    }
    if let Some(v) = args.speed {
        spec.speed_factor = v;
    }
    if let Some(n) = &args.noise {
        spec.noise_kind = n.parse::<NoiseKind>().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    spec.allow_out_of_range |= args.allow_out_of_range;
    spec.rng_seed = resolve_seed(args.seed, spec.rng_seed)?;
    spec.validate().map_err(|e| CliError::Validation(e.to_string()))?;

    let (buf, depth) = read_wav_with_depth(&args.input)?;
    let out = augment_file(&buf, &spec).map_err(|e| CliError::Validation(e.to_string()))?;
    let snr = if spec.noise_intensity > 0.0 {
        let clean = augment_file(&buf, &AugmentSpec { noise_intensity: 0.0, ..spec.clone() })
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Some(estimate_snr_db(&out, &clean)?)
    } else {
        None
    };
    write_wav(&args.output, &out, depth)?;

    let mut rttm_out = None;
    if let Some(r) = &args.rttm {
        let text = fs::read_to_string(r).map_err(io_at(r))?;
        let turns = parse_rttm(&text).map_err(|e| CliError::Validation(format!("{}: {e}", r.display())))?;
        let dest = args.out_rttm.clone().unwrap_or_else(|| args.output.with_extension("rttm"));
        fs::write(&dest, emit_rttm(&rescale_turns(&turns, 1.0 / spec.speed_factor))).map_err(io_at(&dest))?;
        rttm_out = Some(dest);
    }
    match snr {
        Some(s) => eprintln!("augment: {} snr_db={s:.2}", args.output.display()),
        None => eprintln!("augment: {} (no noise added)", args.output.display()),
    }
    Ok(AugmentSummary { output: args.output.clone(), rttm: rttm_out, snr_db: snr })
}

pub fn cmd_snr(args: &SnrArgs) -> Result<Option<f64>, CliError> {
    let first = read_wav(&args.input)?;
    let value = match (&args.noise, &args.clean) {
        (Some(n), None) => snr_db(&first, &read_wav(n)?),
        (None, Some(c)) => estimate_snr_db(&first, &read_wav(c)?),
        _ => return Err(CliError::Usage("give exactly one of --noise or --clean".into())),
    };
    let snr = match value {
        Ok(v) => Some(v),
        Err(DspError::ZeroNoise) => None,
        Err(e) => return Err(e.into()),
    };
    match snr {
        Some(v) => println!("{}", serde_json::json!({ "snr_db": v })),
        None => println!("{}", serde_json::json!({ "snr_db": null, "note": "noise is exactly zero (infinite SNR)" })),
    }
    Ok(snr)
}

/// Frame-level training data from the train/val entries of a corpus manifest:
/// MFCC frames (every `stride`-th) labelled with the single active speaker.
pub fn manifest_training_data(manifest_path: &Path, max_files: usize, stride: usize) -> Result<TrainData, CliError> {
    let manifest = CorpusManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let params = MfccParams { mean_subtraction: false, ..MfccParams::default() };
    let mut chosen: Vec<_> = manifest.entries.iter().filter(|e| !e.speakers.is_empty()).collect();
    chosen.sort_by_key(|e| (e.split, e.path.clone()));
    chosen.truncate(max_files.max(1));

    let speakers: Vec<String> = chosen.iter().flat_map(|e| e.speakers.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let per_file: Vec<(Vec<Vec<f64>>, Vec<usize>)> = chosen
        .par_iter()
        .map(|e| -> Result<_, CliError> {
            let buf = read_wav(resolve(root, &e.path))?;
            let text = fs::read_to_string(resolve(root, &e.rttm))?;
            let turns = parse_rttm(&text).map_err(|err| CliError::Validation(err.to_string()))?;
            let seg = Segment { file_id: e.file_id().to_string(), onset_s: 0.0, offset_s: buf.duration_s(), index: 0 };
            let frames = mfcc_features(&buf, &seg, &params)?;
            let (mut feats, mut labels) = (Vec::new(), Vec::new());
            for (i, f) in frames.iter().enumerate().step_by(stride.max(1)) {
                let centre = (i as f64 * params.hop_ms + params.frame_ms / 2.0) / 1000.0;
                let active: Vec<&Turn> = turns.iter().filter(|t| t.onset_s <= centre && centre < t.offset_s()).collect();
                if let [only] = active.as_slice() {
                    feats.push(f[..params.n_coeffs].to_vec());
                    labels.push(speakers.binary_search(&only.speaker_id).expect("speaker listed"));
                }
            }
            Ok((feats, labels))
        })
        .collect::<Result<_, _>>()?;
    let mut features = Vec::new();
    let mut frame_labels = Vec::new();
    for (f, l) in per_file {
        features.extend(f);
        frame_labels.extend(l);
    }
    let sequences = sequences_from_labels(&frame_labels, 20);
    Ok(TrainData { features, frame_labels, sequences, n_classes: speakers.len().max(1) })
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryDocument {
    pub history: Vec<diarkit::losses::EpochRecord>,
    pub best_epoch: usize,
    pub early_stopped_at: Option<usize>,
    pub train_accuracy: f64,
}

pub fn cmd_train_toy(args: &TrainToyArgs) -> Result<HistoryDocument, CliError> {
    let mut config = load_config(args.config.as_deref())?.train;
    config.rng_seed = resolve_seed(args.seed, config.rng_seed)?;
    config.validate()?;
    let data = match (&args.manifest, &args.data) {
        (Some(m), None) => manifest_training_data(m, args.max_files, args.frame_stride)?,
        (None, Some(d)) => {
            let text = fs::read_to_string(d).map_err(io_at(d))?;
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", d.display())))?
        }
        _ => return Err(CliError::Usage("give exactly one of --manifest or --data".into())),
    };
    let outcome = train_toy(&data, &config)?;
    let doc = HistoryDocument {
        train_accuracy: outcome.model.accuracy(&data.features, &data.frame_labels),
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        early_stopped_at: outcome.early_stopped_at,
    };
    write_json(&args.out_history, &doc)?;
    if let Some(p) = &args.out_model {
        let rows = outcome.model.to_matrix_rows();
        let dim = rows.first().map_or(1, Vec::len);
        diarkit::embed::write_embedding_matrix(p, &rows, dim)?;
    }
    eprintln!("train-toy: {} epochs, best {}", doc.history.len(), doc.best_epoch);
    Ok(doc)
}

pub fn cmd_export_embeddings(args: &ExportArgs) -> Result<usize, CliError> {
    let cfg = load_config(args.config.as_deref())?;
    cfg.validate()?;
    let buf = read_wav(&args.input)?;
    let id = file_id_of(&args.input);
    let prepared = prepare(&buf, &cfg)?;
    let (regions, segments) = segment_buffer(&prepared, &id, &cfg)?;
    let provider = diarkit::embed::MfccEmbedder::new(cfg.embedder.clone());
    let result = cluster_segments(&prepared, regions, segments, &id, &provider, StopRule::K(1))?;
    export_embeddings(&args.out, &result.embeddings)?;
    if let Some(p) = &args.segments {
        write_json(p, &result.segments)?;
    }
    eprintln!("export-embeddings: {} segments at {} Hz", result.embeddings.len(), CANONICAL_RATE_HZ);
    Ok(result.embeddings.len())
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Corpus(a) => println!("{}", cmd_corpus(a)?.display()),
        Command::Diarize(a) => {
            cmd_diarize(a)?;
        }
        Command::Evaluate(a) => {
            cmd_evaluate(a)?;
        }
        Command::Augment(a) => {
            cmd_augment(a)?;
        }
        Command::Snr(a) => {
            cmd_snr(a)?;
        }
        Command::TrainToy(a) => {
            cmd_train_toy(a)?;
        }
        Command::ExportEmbeddings(a) => {
            cmd_export_embeddings(a)?;
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be positive");
            return 1;
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
