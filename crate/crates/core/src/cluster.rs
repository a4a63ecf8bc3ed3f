//! Average-linkage agglomerative clustering on cosine distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rttm::Turn;
use crate::vad::Segment;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("no embeddings to cluster")]
    EmptyInput,
    #[error("asked for {k} clusters from {n} embeddings")]
    KTooLarge { k: usize, n: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("{0} segments but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("invalid stop rule: {0}")]
    InvalidStop(String),
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, ClusterError> {
    if a.len() != b.len() {
        return Err(ClusterError::DimMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(ClusterError::ZeroVector);
    }
    Ok((1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 2.0))
}

/// When to stop merging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop once the closest pair is farther apart than this.
    Threshold(f64),
    /// Stop once this many clusters remain.
    K(usize),
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::Threshold(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Clusters are named by their smallest member index.
    pub cluster_a: usize,
    pub cluster_b: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub merge_trace: Vec<Merge>,
}

impl ClusterResult {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

/// Starts from singletons and repeatedly merges the closest pair under
/// average linkage. Ties go to the pair with the lowest (min index of a,
/// min index of b). Labels are numbered by first appearance.
pub fn agglomerative_cluster(embs: &[Vec<f64>], stop: StopRule) -> Result<ClusterResult, ClusterError> {
    let n = embs.len();
    if n == 0 {
        return Err(ClusterError::EmptyInput);
    }
    match stop {
        StopRule::K(0) => return Err(ClusterError::InvalidStop("k must be positive".into())),
        StopRule::K(k) if k > n => return Err(ClusterError::KTooLarge { k, n }),
        StopRule::Threshold(t) if !t.is_finite() => return Err(ClusterError::InvalidStop("non-finite threshold".into())),
        _ => {}
    }

    // sums[i][j]: total pairwise distance between clusters named i and j
    let mut sums = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cosine_distance(&embs[i], &embs[j])?;
            sums[i][j] = d;
            sums[j][i] = d;
        }
    }
    let mut size = vec![1usize; n];
    let mut alive: Vec<usize> = (0..n).collect();
    let mut owner: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();

    while alive.len() > 1 {
        if let StopRule::K(k) = stop {
            if alive.len() <= k {
                break;
            }
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for (ia, &a) in alive.iter().enumerate() {
            for &b in &alive[ia + 1..] {
                let d = sums[a][b] / (size[a] * size[b]) as f64;
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((a, b, d));
                }
            }
        }
        let (a, b, d) = best.expect("at least two clusters");
        if let StopRule::Threshold(t) = stop {
            if d > t {
                break;
            }
        }
        for &c in &alive {
            if c != a && c != b {
                let s = sums[a][c] + sums[b][c];
                sums[a][c] = s;
                sums[c][a] = s;
            }
        }
        size[a] += size[b];
        alive.retain(|&c| c != b);
        owner.iter_mut().filter(|o| **o == b).for_each(|o| *o = a);
        trace.push(Merge { cluster_a: a, cluster_b: b, distance: d });
    }

    let mut dense = BTreeMap::new();
    let labels = owner
        .iter()
        .map(|&o| {
            let next = dense.len();
            *dense.entry(o).or_insert(next)
        })
        .collect();
    Ok(ClusterResult { labels, merge_trace: trace })
}

/// Gap up to which same-label segments are joined into one turn.
pub const TURN_MERGE_GAP_S: f64 = 0.25;

/// Unions same-label segments that overlap or sit within
/// [`TURN_MERGE_GAP_S`] of each other into hypothesis turns.
pub fn labels_to_turns(segments: &[Segment], labels: &[usize], file_id: &str) -> Result<Vec<Turn>, ClusterError> {
    if segments.len() != labels.len() {
        return Err(ClusterError::LengthMismatch(segments.len(), labels.len()));
    }
    let mut by_label: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for (s, &l) in segments.iter().zip(labels) {
        by_label.entry(l).or_default().push((s.onset_s, s.offset_s));
    }
    let mut turns = Vec::new();
    for (label, mut spans) in by_label {
        spans.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut cur = spans[0];
        for &(a, b) in &spans[1..] {
            if a - cur.1 <= TURN_MERGE_GAP_S + 1e-9 {
                cur.1 = cur.1.max(b);
            } else {
                turns.push(Turn::new(file_id, format!("spk{label}"), cur.0, cur.1 - cur.0));
                cur = (a, b);
            }
        }
        turns.push(Turn::new(file_id, format!("spk{label}"), cur.0, cur.1 - cur.0));
    }
    turns.sort_by(|x, y| x.onset_s.total_cmp(&y.onset_s).then_with(|| x.speaker_id.cmp(&y.speaker_id)));
    Ok(turns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(a: f64, b: f64, index: usize) -> Segment {
        Segment { file_id: "f".into(), onset_s: a, offset_s: b, index }
    }

    #[test]
    fn cosine_cases() {
        let a = vec![1.0, 2.0, -0.5];
        assert_eq!(cosine_distance(&a, &a).unwrap(), 0.0);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((cosine_distance(&a, &neg).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[0.0, 0.0], &[0.0, 1.0]), Err(ClusterError::ZeroVector));
        assert_eq!(cosine_distance(&[1.0], &[0.0, 1.0]), Err(ClusterError::DimMismatch(1, 2)));
    }

    #[test]
    fn k_equals_n_keeps_singletons() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let r = agglomerative_cluster(&e, StopRule::K(3)).unwrap();
        assert_eq!(r.labels, vec![0, 1, 2]);
        assert!(r.merge_trace.is_empty());
    }

    #[test]
    fn identical_vectors_collapse() {
        let e = vec![vec![0.3, 0.4]; 6];
        let r = agglomerative_cluster(&e, StopRule::Threshold(1e-3)).unwrap();
        assert_eq!(r.labels, vec![0; 6]);
        assert_eq!(r.merge_trace.len(), 5);
    }

    #[test]
    fn errors() {
        assert_eq!(agglomerative_cluster(&[], StopRule::K(1)), Err(ClusterError::EmptyInput));
        assert_eq!(agglomerative_cluster(&[vec![1.0]], StopRule::K(2)), Err(ClusterError::KTooLarge { k: 2, n: 1 }));
    }

    #[test]
    fn turns_from_labels() {
        assert!(labels_to_turns(&[], &[], "f").unwrap().is_empty());
        let t = labels_to_turns(&[seg(0.0, 1.5, 0), seg(0.75, 2.25, 1)], &[0, 0], "f").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].onset_s, t[0].offset_s()), (0.0, 2.25));
        let t = labels_to_turns(&[seg(0.0, 1.0, 0), seg(2.0, 3.0, 1)], &[1, 1], "f").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].speaker_id, "spk1");
        assert_eq!(labels_to_turns(&[seg(0.0, 1.0, 0)], &[], "f"), Err(ClusterError::LengthMismatch(1, 0)));
    }
}
