//! Cross-entropy, CTC and their weighted combination.

pub mod train;

use thiserror::Error;

pub use train::{
    sequences_from_labels, train_toy, AdamW, EpochRecord, LabelSequence, ToyModel, TrainConfig, TrainData, TrainOutcome,
};

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("index {index} out of range for {size} classes")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("label {0} is the blank or outside the vocabulary")]
    LabelOutOfRange(usize),
    #[error("frame {0} is not a normalized log-distribution")]
    UnnormalizedRow(usize),
    #[error("{frames} frames cannot align {needed} label positions")]
    ImpossibleAlignment { frames: usize, needed: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("no training data")]
    EmptyData,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Blank symbol index in every CTC lattice.
pub const BLANK: usize = 0;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn lse2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(logits);
    logits.iter().map(|l| l - z).collect()
}

/// -log softmax(logits)[class] and its gradient softmax - one_hot.
pub fn cross_entropy(logits: &[f64], class: usize) -> Result<(f64, Vec<f64>), LossError> {
    if class >= logits.len() {
        return Err(LossError::IndexOutOfRange { index: class, size: logits.len() });
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(LossError::NonFinite);
    }
    let lp = log_softmax(logits);
    let mut grad: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
    grad[class] -= 1.0;
    Ok((-lp[class], grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtcResult {
    pub loss: f64,
    /// d loss / d log_probs, T x V.
    pub grad: Vec<Vec<f64>>,
}

/// Minimum frames needed: one per label plus a blank between repeats.
pub fn ctc_min_frames(labels: &[usize]) -> usize {
    labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count()
}

/// CTC negative log-likelihood of `labels` under per-frame log-probabilities
/// (blank at index 0), with its gradient from forward-backward.
pub fn ctc_loss(log_probs: &[Vec<f64>], labels: &[usize]) -> Result<CtcResult, LossError> {
    for (t, row) in log_probs.iter().enumerate() {
        if row.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(LossError::NonFinite);
        }
        let mass: f64 = row.iter().map(|v| v.exp()).sum();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(LossError::UnnormalizedRow(t));
        }
    }
    ctc_loss_unchecked(log_probs, labels)
}

/// [`ctc_loss`] without the row-normalization guard; treats every entry
/// as an independent score (used by finite-difference checks).
pub fn ctc_loss_unchecked(log_probs: &[Vec<f64>], labels: &[usize]) -> Result<CtcResult, LossError> {
    let t_len = log_probs.len();
    let v = log_probs.first().map_or(0, Vec::len);
    if let Some(&bad) = labels.iter().find(|&&l| l == BLANK || l >= v) {
        return Err(LossError::LabelOutOfRange(bad));
    }
    let needed = ctc_min_frames(labels);
    if t_len < needed.max(1) {
        return Err(LossError::ImpossibleAlignment { frames: t_len, needed: needed.max(1) });
    }
    let ext: Vec<usize> = std::iter::once(BLANK).chain(labels.iter().flat_map(|&l| [l, BLANK])).collect();
    let s_len = ext.len();
    let ninf = f64::NEG_INFINITY;
    let can_skip = |s: usize| s >= 2 && ext[s] != BLANK && ext[s] != ext[s - 2];

    let mut alpha = vec![vec![ninf; s_len]; t_len];
    alpha[0][0] = log_probs[0][ext[0]];
    if s_len > 1 {
        alpha[0][1] = log_probs[0][ext[1]];
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut a = alpha[t - 1][s];
            if s >= 1 {
                a = lse2(a, alpha[t - 1][s - 1]);
            }
            if can_skip(s) {
                a = lse2(a, alpha[t - 1][s - 2]);
            }
            alpha[t][s] = a + log_probs[t][ext[s]];
        }
    }
    let mut beta = vec![vec![ninf; s_len]; t_len];
    beta[t_len - 1][s_len - 1] = log_probs[t_len - 1][ext[s_len - 1]];
    if s_len > 1 {
        beta[t_len - 1][s_len - 2] = log_probs[t_len - 1][ext[s_len - 2]];
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut b = beta[t + 1][s];
            if s + 1 < s_len {
                b = lse2(b, beta[t + 1][s + 1]);
            }
            if s + 2 < s_len && can_skip(s + 2) {
                b = lse2(b, beta[t + 1][s + 2]);
            }
            beta[t][s] = b + log_probs[t][ext[s]];
        }
    }

    let log_p = if s_len > 1 {
        lse2(alpha[t_len - 1][s_len - 1], alpha[t_len - 1][s_len - 2])
    } else {
        alpha[t_len - 1][0]
    };
    if log_p == ninf {
        return Err(LossError::ImpossibleAlignment { frames: t_len, needed });
    }
    let mut grad = vec![vec![0.0; v]; t_len];
    for t in 0..t_len {
        for s in 0..s_len {
            let occ = alpha[t][s] + beta[t][s] - log_probs[t][ext[s]] - log_p;
            if occ > ninf {
                grad[t][ext[s]] -= occ.exp();
            }
        }
    }
    Ok(CtcResult { loss: -log_p, grad })
}

/// lambda * ce + (1 - lambda) * ctc.
pub fn dual_loss(ce: f64, ctc: f64, lambda: f64) -> Result<f64, LossError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(LossError::InvalidConfig(format!("lambda {lambda} outside [0, 1]")));
    }
    if lambda == 1.0 {
        return Ok(ce);
    }
    if lambda == 0.0 {
        return Ok(ctc);
    }
    Ok(lambda * ce + (1.0 - lambda) * ctc)
}
