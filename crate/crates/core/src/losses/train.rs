//! A linear softmax classifier trained with the dual CE + CTC loss under AdamW.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{cross_entropy, ctc_loss, dual_loss, log_softmax, LossError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub weight_decay: f64,
    pub early_stop_patience: usize,
    /// Weight of cross-entropy; CTC gets the remainder.
    pub dual_loss_lambda: f64,
    pub rng_seed: u64,
    pub cosine_schedule: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 16,
            max_epochs: 20,
            weight_decay: 0.01,
            early_stop_patience: 3,
            dual_loss_lambda: 0.5,
            rng_seed: 0,
            cosine_schedule: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        let bad = |m: &str| Err(LossError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.early_stop_patience == 0 {
            return bad("batch_size, max_epochs and early_stop_patience must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.learning_rate * self.weight_decay < 1.0) {
            return bad("weight_decay must be non-negative with lr * decay < 1");
        }
        if !(0.0..=1.0).contains(&self.dual_loss_lambda) {
            return bad("dual_loss_lambda must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Single linear layer. Output 0 is the CTC blank; class `c` is output `c + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    /// One row per output, `feature_dim` columns.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl ToyModel {
    pub fn new_seeded(n_outputs: usize, feature_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = Normal::new(0.0, 0.01).unwrap();
        Self {
            weights: (0..n_outputs).map(|_| (0..feature_dim).map(|_| init.sample(&mut rng)).collect()).collect(),
            bias: vec![0.0; n_outputs],
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights.iter().zip(&self.bias).map(|(w, b)| b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()).collect()
    }

    /// Predicted class (blank excluded).
    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        let mut best = 1;
        for k in 2..z.len() {
            if z[k] > z[best] {
                best = k;
            }
        }
        best - 1
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        if features.is_empty() {
            return 0.0;
        }
        let hits = features.iter().zip(labels).filter(|(x, &y)| self.predict(x) == y).count();
        hits as f64 / features.len() as f64
    }

    /// Rows of weights followed by the row's bias, for the embedding-matrix format.
    pub fn to_matrix_rows(&self) -> Vec<Vec<f32>> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().chain(std::iter::once(b)).map(|&v| v as f32).collect())
            .collect()
    }
}

/// Decoupled-weight-decay Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl AdamW {
    pub fn new(n_params: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0 }
    }

    /// One update; `decay_mask[i]` selects parameters that receive weight decay.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], decay_mask: &[bool], lr: f64, weight_decay: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            if decay_mask[i] {
                params[i] *= 1.0 - lr * weight_decay;
            }
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// A contiguous frame range and its class sequence (blank-free).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSequence {
    pub frames: Range<usize>,
    pub labels: Vec<usize>,
}

/// Cuts the frames into chunks of `chunk` and run-length compresses each
/// chunk's frame labels into a CTC target.
pub fn sequences_from_labels(frame_labels: &[usize], chunk: usize) -> Vec<LabelSequence> {
    let chunk = chunk.max(1);
    (0..frame_labels.len())
        .step_by(chunk)
        .map(|start| {
            let end = (start + chunk).min(frame_labels.len());
            let mut labels: Vec<usize> = frame_labels[start..end].to_vec();
            labels.dedup();
            LabelSequence { frames: start..end, labels }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainData {
    pub features: Vec<Vec<f64>>,
    pub frame_labels: Vec<usize>,
    pub sequences: Vec<LabelSequence>,
    pub n_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: ToyModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Epoch at which early stopping fired, if it did.
    pub early_stopped_at: Option<usize>,
}

/// Fraction of frames (taken from the end) held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

struct Grad {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Grad {
    fn zeros(v: usize, d: usize) -> Self {
        Self { w: vec![vec![0.0; d]; v], b: vec![0.0; v] }
    }

    fn add_outer(&mut self, dz: &[f64], x: &[f64], scale: f64) {
        for (k, g) in dz.iter().enumerate() {
            let s = g * scale;
            self.b[k] += s;
            self.w[k].iter_mut().zip(x).for_each(|(w, xi)| *w += s * xi);
        }
    }
}

fn ce_frames(model: &ToyModel, data: &TrainData, frames: &[usize], grad: Option<(&mut Grad, f64)>) -> f64 {
    let mut total = 0.0;
    let mut grad = grad;
    for &i in frames {
        let (l, dz) = cross_entropy(&model.logits(&data.features[i]), data.frame_labels[i] + 1).expect("labels checked");
        total += l;
        if let Some((g, scale)) = grad.as_mut() {
            g.add_outer(&dz, &data.features[i], *scale / frames.len() as f64);
        }
    }
    total / frames.len() as f64
}

fn ctc_sequences(model: &ToyModel, data: &TrainData, seqs: &[&LabelSequence], grad: Option<(&mut Grad, f64)>) -> f64 {
    let mut total = 0.0;
    let mut grad = grad;
    for seq in seqs {
        let rows: Vec<Vec<f64>> = seq.frames.clone().map(|i| log_softmax(&model.logits(&data.features[i]))).collect();
        let targets: Vec<usize> = seq.labels.iter().map(|c| c + 1).collect();
        let r = ctc_loss(&rows, &targets).expect("sequences checked");
        total += r.loss;
        if let Some((g, scale)) = grad.as_mut() {
            for (t, i) in seq.frames.clone().enumerate() {
                // d loss / d logits = softmax + d loss / d log_probs (the latter sums to -1)
                let dz: Vec<f64> = rows[t].iter().zip(&r.grad[t]).map(|(lp, gl)| lp.exp() + gl).collect();
                g.add_outer(&dz, &data.features[i], *scale / seqs.len() as f64);
            }
        }
    }
    total / seqs.len() as f64
}

fn check_data(data: &TrainData) -> Result<(usize, usize), LossError> {
    let n = data.features.len();
    let d = data.features.first().map_or(0, Vec::len);
    if n < 2 || d == 0 || data.n_classes == 0 {
        return Err(LossError::EmptyData);
    }
    if data.frame_labels.len() != n || data.features.iter().any(|r| r.len() != d) {
        return Err(LossError::InvalidConfig("features and labels disagree in shape".into()));
    }
    if data.features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LossError::NonFinite);
    }
    if let Some(&bad) = data.frame_labels.iter().find(|&&c| c >= data.n_classes) {
        return Err(LossError::LabelOutOfRange(bad));
    }
    for s in &data.sequences {
        if s.frames.end > n || s.frames.is_empty() {
            return Err(LossError::InvalidConfig(format!("sequence frames {:?} outside 0..{n}", s.frames)));
        }
        if let Some(&bad) = s.labels.iter().find(|&&c| c >= data.n_classes) {
            return Err(LossError::LabelOutOfRange(bad));
        }
        let needed = super::ctc_min_frames(&s.labels);
        if s.frames.len() < needed {
            return Err(LossError::ImpossibleAlignment { frames: s.frames.len(), needed });
        }
    }
    Ok((n, d))
}

/// Trains a [`ToyModel`] on the first 80% of frames and validates on the rest.
///
/// Each epoch shuffles the training frames into batches of `batch_size`;
/// training sequences are dealt round-robin across the batches. A batch's
/// loss is the dual loss of its mean CE and mean CTC (CE alone if the batch
/// got no sequence). Stops early once validation loss has not improved for
/// `early_stop_patience` epochs.
pub fn train_toy(data: &TrainData, config: &TrainConfig) -> Result<TrainOutcome, LossError> {
    config.validate()?;
    let (n, d) = check_data(data)?;
    let n_val = ((n as f64 * VALIDATION_FRACTION).round() as usize).clamp(1, n - 1);
    let n_train = n - n_val;
    let train_seqs: Vec<&LabelSequence> = data.sequences.iter().filter(|s| s.frames.end <= n_train).collect();
    let val_seqs: Vec<&LabelSequence> = data.sequences.iter().filter(|s| s.frames.start >= n_train).collect();
    let val_frames: Vec<usize> = (n_train..n).collect();

    let v = data.n_classes + 1;
    let mut model = ToyModel::new_seeded(v, d, config.rng_seed);
    let mut opt = AdamW::new(v * (d + 1));
    let decay_mask: Vec<bool> = (0..v).flat_map(|_| std::iter::repeat_n(true, d).chain([false])).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..n_train).collect();
    let lambda = config.dual_loss_lambda;

    let mut history = Vec::new();
    let (mut best, mut best_epoch, mut stale) = (f64::INFINITY, 0, 0);
    let mut early_stopped_at = None;
    for epoch in 1..=config.max_epochs {
        let lr = if config.cosine_schedule {
            config.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * (epoch - 1) as f64 / config.max_epochs as f64).cos())
        } else {
            config.learning_rate
        };
        order.shuffle(&mut rng);
        let batches: Vec<&[usize]> = order.chunks(config.batch_size).collect();
        let mut epoch_loss = 0.0;
        for (b, frames) in batches.iter().enumerate() {
            let seqs: Vec<&LabelSequence> =
                train_seqs.iter().enumerate().filter(|(j, _)| j % batches.len() == b).map(|(_, s)| *s).collect();
            let mut grad = Grad::zeros(v, d);
            let ce_weight = if seqs.is_empty() { 1.0 } else { lambda };
            let ce = ce_frames(&model, data, frames, Some((&mut grad, ce_weight)));
            let loss = if seqs.is_empty() {
                ce
            } else {
                let ctc = ctc_sequences(&model, data, &seqs, Some((&mut grad, 1.0 - lambda)));
                dual_loss(ce, ctc, lambda)?
            };
            epoch_loss += loss;

            let mut params: Vec<f64> =
                model.weights.iter().zip(&model.bias).flat_map(|(w, b)| w.iter().copied().chain([*b])).collect();
            let grads: Vec<f64> = grad.w.iter().zip(&grad.b).flat_map(|(w, b)| w.iter().copied().chain([*b])).collect();
            opt.step(&mut params, &grads, &decay_mask, lr, config.weight_decay);
            for (k, row) in params.chunks(d + 1).enumerate() {
                model.weights[k].copy_from_slice(&row[..d]);
                model.bias[k] = row[d];
            }
        }
        let train_loss = epoch_loss / batches.len() as f64;
        let val_ce = ce_frames(&model, data, &val_frames, None);
        let val_loss = if val_seqs.is_empty() {
            val_ce
        } else {
            dual_loss(val_ce, ctc_sequences(&model, data, &val_seqs, None), lambda)?
        };
        history.push(EpochRecord { epoch, train_loss, val_loss });
        if val_loss < best {
            best = val_loss;
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.early_stop_patience {
                early_stopped_at = Some(epoch);
                break;
            }
        }
    }
    Ok(TrainOutcome { model, history, best_epoch, early_stopped_at })
}
