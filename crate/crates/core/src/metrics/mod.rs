//! Evaluation: DER, JER, purity, EER, relative improvement.

pub mod der;
pub mod hungarian;

use std::collections::BTreeMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use der::{compute_der, compute_jer, timeline_purity, DerReport};
pub use hungarian::{hungarian_assign, Assignment};

use crate::rttm::Turn;
use der::Timeline;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty cost matrix")]
    EmptyMatrix,
    #[error("turns from different files: {0} and {1}")]
    MixedFiles(String, String),
    #[error("reference contains no speech")]
    EmptyReference,
    #[error("{0} reference labels but {1} cluster labels")]
    LengthMismatch(usize, usize),
    #[error("no items to score")]
    EmptyInput,
    #[error("score list is empty")]
    EmptyScores,
    #[error("baseline must be positive")]
    ZeroBaseline,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Fraction of items that belong to their cluster's majority speaker.
/// With `weights`, items count by weight instead of one each.
pub fn cluster_purity<S, C>(speakers: &[S], clusters: &[C], weights: Option<&[f64]>) -> Result<f64, MetricError>
where
    S: Ord + Hash + Clone,
    C: Ord + Hash + Clone,
{
    if speakers.len() != clusters.len() {
        return Err(MetricError::LengthMismatch(speakers.len(), clusters.len()));
    }
    if let Some(w) = weights {
        if w.len() != speakers.len() {
            return Err(MetricError::LengthMismatch(speakers.len(), w.len()));
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(MetricError::InvalidInput("weights must be finite and non-negative".into()));
        }
    }
    if speakers.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut tally: BTreeMap<&C, BTreeMap<&S, f64>> = BTreeMap::new();
    for (i, (s, c)) in speakers.iter().zip(clusters).enumerate() {
        *tally.entry(c).or_default().entry(s).or_default() += weights.map_or(1.0, |w| w[i]);
    }
    let total: f64 = tally.values().flat_map(|m| m.values()).sum();
    if total <= 0.0 {
        return Err(MetricError::EmptyInput);
    }
    let majority: f64 = tally.values().map(|m| m.values().cloned().fold(0.0, f64::max)).sum();
    Ok(majority / total)
}

fn far_frr(genuine: &[f64], impostor: &[f64], t: f64) -> (f64, f64) {
    let far = impostor.iter().filter(|&&s| s >= t).count() as f64 / impostor.len() as f64;
    let frr = genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64;
    (far, frr)
}

/// Equal error rate. Every distinct score (and +inf) is a threshold, a
/// trial is accepted when its score is at least the threshold, and the
/// FAR/FRR crossing is linearly interpolated between adjacent thresholds.
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<f64, MetricError> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(MetricError::EmptyScores);
    }
    if genuine.iter().chain(impostor).any(|s| !s.is_finite()) {
        return Err(MetricError::InvalidInput("non-finite score".into()));
    }
    let mut thresholds: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);

    let mut prev: Option<(f64, f64)> = None;
    for &t in &thresholds {
        let (far, frr) = far_frr(genuine, impostor, t);
        if frr >= far {
            return Ok(match prev {
                Some((pfar, pfrr)) if frr > far => {
                    let (d0, d1) = (pfar - pfrr, far - frr);
                    let alpha = d0 / (d0 - d1);
                    pfar + alpha * (far - pfar)
                }
                _ => 0.5 * (far + frr),
            });
        }
        prev = Some((far, frr));
    }
    unreachable!("FRR reaches 1 and FAR 0 at the infinite threshold")
}

/// (baseline - value) / baseline for an error metric.
pub fn relative_improvement(baseline: f64, value: f64) -> Result<f64, MetricError> {
    if !(baseline > 0.0 && baseline.is_finite()) {
        return Err(MetricError::ZeroBaseline);
    }
    if !(value >= 0.0 && value.is_finite()) {
        return Err(MetricError::InvalidInput(format!("value {value}")));
    }
    Ok((baseline - value) / baseline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub der: DerReport,
    pub jer: f64,
    pub cluster_purity: f64,
    pub snr_db: Option<f64>,
    pub eer: Option<f64>,
    pub relative_improvement: Option<f64>,
}

/// Accumulates timeline scores over many files.
#[derive(Debug, Clone, Default)]
pub struct Scoreboard {
    missed: f64,
    fa: f64,
    conf: f64,
    total: f64,
    jer_sum: f64,
    jer_count: usize,
    purity_majority: f64,
    purity_total: f64,
    mapping: BTreeMap<String, String>,
}

impl Scoreboard {
    /// Scores one file pair. A file without reference speech still adds its false alarms.
    pub fn add(&mut self, reference: &[Turn], hyp: &[Turn], collar_s: f64) -> Result<(), MetricError> {
        let tl = Timeline::build(reference, hyp, collar_s)?;
        let map = tl.optimal_mapping()?;
        let r = tl.der_with_mapping(&map);
        self.missed += r.missed_s;
        self.fa += r.false_alarm_s;
        self.conf += r.confusion_s;
        self.total += r.total_ref_speech_s;
        let file = reference.first().or(hyp.first()).map(|t| t.file_id.clone()).unwrap_or_default();
        for (a, b) in r.mapping {
            let key = if file.is_empty() { a } else { format!("{file}/{a}") };
            self.mapping.insert(key, b);
        }

        let uncollared = if collar_s > 0.0 { Timeline::build(reference, hyp, 0.0)? } else { tl };
        let map = uncollared.jaccard_mapping()?;
        for (i, u) in uncollared.jaccard_terms(&map) {
            self.jer_sum += if u > 0.0 { 1.0 - i / u } else { 1.0 };
            self.jer_count += 1;
        }
        let (m, t) = uncollared.purity_terms();
        self.purity_majority += m;
        self.purity_total += t;
        Ok(())
    }

    pub fn report(&self) -> Result<MetricReport, MetricError> {
        if self.total <= 0.0 {
            return Err(MetricError::EmptyReference);
        }
        Ok(MetricReport {
            der: DerReport {
                missed_s: self.missed,
                false_alarm_s: self.fa,
                confusion_s: self.conf,
                total_ref_speech_s: self.total,
                der: (self.missed + self.fa + self.conf) / self.total,
                mapping: self.mapping.clone(),
            },
            jer: if self.jer_count > 0 { self.jer_sum / self.jer_count as f64 } else { 0.0 },
            cluster_purity: if self.purity_total > 0.0 { self.purity_majority / self.purity_total } else { 0.0 },
            snr_db: None,
            eer: None,
            relative_improvement: None,
        })
    }
}

/// DER, JER and purity of one file pair.
pub fn evaluate(reference: &[Turn], hyp: &[Turn], collar_s: f64) -> Result<MetricReport, MetricError> {
    let mut board = Scoreboard::default();
    board.add(reference, hyp, collar_s)?;
    let mut report = board.report()?;
    report.der.mapping = compute_der(reference, hyp, collar_s)?.mapping;
    Ok(report)
}
