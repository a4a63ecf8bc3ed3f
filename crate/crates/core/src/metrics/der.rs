//! Timeline scoring: DER, JER and duration-weighted purity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::hungarian::hungarian_assign;
use super::MetricError;
use crate::rttm::Turn;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerReport {
    pub missed_s: f64,
    pub false_alarm_s: f64,
    pub confusion_s: f64,
    pub total_ref_speech_s: f64,
    pub der: f64,
    /// Reference speaker to hypothesis speaker.
    pub mapping: BTreeMap<String, String>,
}

/// A homogeneous stretch of the timeline.
#[derive(Debug, Clone)]
struct Interval {
    dur: f64,
    refs: Vec<usize>,
    hyps: Vec<usize>,
}

/// Both annotations cut at every boundary, speakers replaced by indices.
#[derive(Debug, Clone)]
pub(crate) struct Timeline {
    ref_names: Vec<String>,
    hyp_names: Vec<String>,
    intervals: Vec<Interval>,
}

fn check_one_file(reference: &[Turn], hyp: &[Turn]) -> Result<(), MetricError> {
    let mut ids = reference.iter().chain(hyp).map(|t| t.file_id.as_str());
    if let Some(first) = ids.next() {
        if let Some(other) = ids.find(|id| *id != first) {
            return Err(MetricError::MixedFiles(first.to_string(), other.to_string()));
        }
    }
    Ok(())
}

fn speaker_index(turns: &[Turn]) -> (Vec<String>, Vec<usize>) {
    let names: Vec<String> = turns.iter().map(|t| t.speaker_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let idx = turns.iter().map(|t| names.binary_search(&t.speaker_id).unwrap()).collect();
    (names, idx)
}

impl Timeline {
    /// Intervals lying within `collar_s` of a reference boundary are dropped.
    pub(crate) fn build(reference: &[Turn], hyp: &[Turn], collar_s: f64) -> Result<Self, MetricError> {
        check_one_file(reference, hyp)?;
        if !(collar_s >= 0.0 && collar_s.is_finite()) {
            return Err(MetricError::InvalidInput(format!("collar {collar_s}")));
        }
        if let Some(bad) = reference.iter().chain(hyp).find(|t| !t.is_valid()) {
            return Err(MetricError::InvalidInput(format!("invalid turn {bad:?}")));
        }
        let (ref_names, ref_idx) = speaker_index(reference);
        let (hyp_names, hyp_idx) = speaker_index(hyp);

        let ref_edges: Vec<f64> = reference.iter().flat_map(|t| [t.onset_s, t.offset_s()]).collect();
        let mut cuts: Vec<f64> = hyp.iter().flat_map(|t| [t.onset_s, t.offset_s()]).chain(ref_edges.iter().copied()).collect();
        if collar_s > 0.0 {
            cuts.extend(ref_edges.iter().flat_map(|&e| [e - collar_s, e + collar_s]));
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut intervals = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let dur = b - a;
            if dur <= 0.0 {
                continue;
            }
            let mid = 0.5 * (a + b);
            if collar_s > 0.0 && ref_edges.iter().any(|&e| (mid - e).abs() < collar_s) {
                continue;
            }
            let active = |turns: &[Turn], idx: &[usize]| {
                let mut s: Vec<usize> =
                    turns.iter().zip(idx).filter(|(t, _)| t.onset_s <= a && t.offset_s() >= b).map(|(_, &i)| i).collect();
                s.sort_unstable();
                s.dedup();
                s
            };
            let refs = active(reference, &ref_idx);
            let hyps = active(hyp, &hyp_idx);
            if !refs.is_empty() || !hyps.is_empty() {
                intervals.push(Interval { dur, refs, hyps });
            }
        }
        Ok(Self { ref_names, hyp_names, intervals })
    }

    fn overlap_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.hyp_names.len()]; self.ref_names.len()];
        for iv in &self.intervals {
            for &r in &iv.refs {
                for &h in &iv.hyps {
                    m[r][h] += iv.dur;
                }
            }
        }
        m
    }

    /// Overlap-maximizing reference-to-hypothesis map (pairs with no shared time are left out).
    pub(crate) fn optimal_mapping(&self) -> Result<Vec<Option<usize>>, MetricError> {
        let mut map = vec![None; self.ref_names.len()];
        if self.ref_names.is_empty() || self.hyp_names.is_empty() {
            return Ok(map);
        }
        let overlap = self.overlap_matrix();
        let cost: Vec<Vec<f64>> = overlap.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        for (r, h) in hungarian_assign(&cost)?.pairs {
            if overlap[r][h] > 0.0 {
                map[r] = Some(h);
            }
        }
        Ok(map)
    }

    pub(crate) fn der_with_mapping(&self, map: &[Option<usize>]) -> DerReport {
        let (mut missed, mut fa, mut conf, mut total) = (0.0, 0.0, 0.0, 0.0);
        for iv in &self.intervals {
            let (nr, nh) = (iv.refs.len(), iv.hyps.len());
            let correct = iv.refs.iter().filter(|&&r| map[r].is_some_and(|h| iv.hyps.contains(&h))).count();
            missed += iv.dur * nr.saturating_sub(nh) as f64;
            fa += iv.dur * nh.saturating_sub(nr) as f64;
            conf += iv.dur * (nr.min(nh) - correct) as f64;
            total += iv.dur * nr as f64;
        }
        let mapping = map
            .iter()
            .enumerate()
            .filter_map(|(r, h)| h.map(|h| (self.ref_names[r].clone(), self.hyp_names[h].clone())))
            .collect();
        let der = if total > 0.0 { (missed + fa + conf) / total } else { f64::NAN };
        DerReport { missed_s: missed, false_alarm_s: fa, confusion_s: conf, total_ref_speech_s: total, der, mapping }
    }

    /// Assignment maximizing the summed Jaccard index over reference speakers.
    pub(crate) fn jaccard_mapping(&self) -> Result<Vec<Option<usize>>, MetricError> {
        let mut map = vec![None; self.ref_names.len()];
        if self.ref_names.is_empty() || self.hyp_names.is_empty() {
            return Ok(map);
        }
        let overlap = self.overlap_matrix();
        let (mut ref_time, mut hyp_time) = (vec![0.0; self.ref_names.len()], vec![0.0; self.hyp_names.len()]);
        for iv in &self.intervals {
            for &r in &iv.refs {
                ref_time[r] += iv.dur;
            }
            for &h in &iv.hyps {
                hyp_time[h] += iv.dur;
            }
        }
        let jaccard: Vec<Vec<f64>> = overlap
            .iter()
            .enumerate()
            .map(|(r, row)| row.iter().enumerate().map(|(h, &i)| if i > 0.0 { i / (ref_time[r] + hyp_time[h] - i) } else { 0.0 }).collect())
            .collect();
        let cost: Vec<Vec<f64>> = jaccard.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        for (r, h) in hungarian_assign(&cost)?.pairs {
            if jaccard[r][h] > 0.0 {
                map[r] = Some(h);
            }
        }
        Ok(map)
    }

    /// Per reference speaker: (intersection, union) with the mapped hypothesis speaker.
    pub(crate) fn jaccard_terms(&self, map: &[Option<usize>]) -> Vec<(f64, f64)> {
        let mut terms = vec![(0.0, 0.0); self.ref_names.len()];
        for iv in &self.intervals {
            for (r, term) in terms.iter_mut().enumerate() {
                let in_r = iv.refs.contains(&r);
                let in_h = map[r].is_some_and(|h| iv.hyps.contains(&h));
                if in_r && in_h {
                    term.0 += iv.dur;
                }
                if in_r || in_h {
                    term.1 += iv.dur;
                }
            }
        }
        terms
    }

    /// Purity numerator and denominator: for each hypothesis speaker, the time
    /// it shares with its majority reference speaker, over the time it shares
    /// with any reference speech.
    pub(crate) fn purity_terms(&self) -> (f64, f64) {
        let w = self.overlap_matrix();
        let mut majority = 0.0;
        let mut total = 0.0;
        for h in 0..self.hyp_names.len() {
            majority += w.iter().map(|r| r[h]).fold(0.0, f64::max);
            total += self.intervals.iter().filter(|iv| !iv.refs.is_empty() && iv.hyps.contains(&h)).map(|iv| iv.dur).sum::<f64>();
        }
        (majority, total)
    }
}

/// Diarization error rate under the optimal one-to-one speaker mapping.
///
/// Each homogeneous interval of length d with `Nref` reference speakers,
/// `Nhyp` hypothesis speakers and `Ncorrect` mapped matches contributes
/// d*(max(Nref, Nhyp) - Ncorrect) to the error, split into missed speech,
/// false alarm and confusion.
pub fn compute_der(reference: &[Turn], hyp: &[Turn], collar_s: f64) -> Result<DerReport, MetricError> {
    let tl = Timeline::build(reference, hyp, collar_s)?;
    let map = tl.optimal_mapping()?;
    let report = tl.der_with_mapping(&map);
    if report.total_ref_speech_s <= 0.0 {
        return Err(MetricError::EmptyReference);
    }
    Ok(report)
}

/// Jaccard error rate averaged over reference speakers, with the DER mapping.
pub fn compute_jer(reference: &[Turn], hyp: &[Turn]) -> Result<f64, MetricError> {
    let tl = Timeline::build(reference, hyp, 0.0)?;
    if tl.ref_names.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let map = tl.jaccard_mapping()?;
    let terms = tl.jaccard_terms(&map);
    Ok(terms.iter().map(|&(i, u)| if u > 0.0 { 1.0 - i / u } else { 1.0 }).sum::<f64>() / terms.len() as f64)
}

/// Purity of hypothesis speakers against reference speakers, weighted by
/// co-occurring duration. Returns 0 when no hypothesis speech meets reference speech.
pub fn timeline_purity(reference: &[Turn], hyp: &[Turn]) -> Result<f64, MetricError> {
    let (majority, total) = Timeline::build(reference, hyp, 0.0)?.purity_terms();
    Ok(if total > 0.0 { majority / total } else { 0.0 })
}
