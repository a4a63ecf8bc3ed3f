//! Independent reference implementations shared by integration tests.
#![allow(dead_code)]

use diarkit::losses::{ctc_min_frames, log_softmax, sequences_from_labels, TrainData};
use diarkit::rttm::Turn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

pub fn brute_assignment(cost: &[Vec<f64>]) -> f64 {
    let (n, m) = (cost.len(), cost[0].len());
    let cols: Vec<usize> = (0..m).collect();
    permutations(&cols)
        .iter()
        .map(|p| (0..n.min(m)).map(|i| if n <= m { cost[i][p[i]] } else { cost[p[i]][i] }).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .min(if n > m {
            let rows: Vec<usize> = (0..n).collect();
            permutations(&rows).iter().map(|p| (0..m).map(|j| cost[p[j]][j]).sum::<f64>()).fold(f64::INFINITY, f64::min)
        } else {
            f64::INFINITY
        })
}

pub type Grid = Vec<(Vec<String>, Vec<String>)>;

/// Active speaker sets on a 1 ms grid (times are whole ms).
pub fn grid(reference: &[Turn], hyp: &[Turn]) -> Grid {
    let end = reference.iter().chain(hyp).map(|t| (t.offset_s() * 1000.0).round() as i64).max().unwrap_or(0);
    (0..end)
        .map(|ms| {
            let mid = (ms as f64 + 0.5) / 1000.0;
            let on = |turns: &[Turn]| {
                let mut s: Vec<String> =
                    turns.iter().filter(|t| t.onset_s <= mid && mid < t.offset_s()).map(|t| t.speaker_id.clone()).collect();
                s.sort();
                s.dedup();
                s
            };
            (on(reference), on(hyp))
        })
        .collect()
}

pub fn grid_error(g: &Grid, map: &[(String, String)]) -> (f64, f64) {
    let (mut err, mut total) = (0usize, 0usize);
    for (r, h) in g {
        let correct = map.iter().filter(|(a, b)| r.contains(a) && h.contains(b)).count();
        err += r.len().max(h.len()) - correct;
        total += r.len();
    }
    (err as f64 / 1000.0, total as f64 / 1000.0)
}

/// Minimum error over every one-to-one speaker mapping of maximal size.
pub fn brute_der(reference: &[Turn], hyp: &[Turn]) -> f64 {
    let names = |turns: &[Turn]| {
        let mut v: Vec<String> = turns.iter().map(|t| t.speaker_id.clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    let (refs, hyps) = (names(reference), names(hyp));
    let g = grid(reference, hyp);
    let k = refs.len().min(hyps.len());
    let mut best = f64::INFINITY;
    let mut total = 0.0;
    let maps: Vec<Vec<(String, String)>> = if refs.len() <= hyps.len() {
        permutations(&(0..hyps.len()).collect::<Vec<_>>())
            .into_iter()
            .map(|p| (0..k).map(|i| (refs[i].clone(), hyps[p[i]].clone())).collect())
            .collect()
    } else {
        permutations(&(0..refs.len()).collect::<Vec<_>>())
            .into_iter()
            .map(|p| (0..k).map(|j| (refs[p[j]].clone(), hyps[j].clone())).collect())
            .collect()
    };
    for map in maps {
        let (e, t) = grid_error(&g, &map);
        best = best.min(e);
        total = t;
    }
    best / total
}

/// Minimum mean (1 - IoU) over every maximal one-to-one speaker mapping.
pub fn brute_jer(reference: &[Turn], hyp: &[Turn]) -> f64 {
    let names = |turns: &[Turn]| {
        let mut v: Vec<String> = turns.iter().map(|t| t.speaker_id.clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    let (refs, hyps) = (names(reference), names(hyp));
    let g = grid(reference, hyp);
    let score = |map: &[(usize, usize)]| {
        let mut total = 0.0;
        for (r, name) in refs.iter().enumerate() {
            let h = map.iter().find(|m| m.0 == r).map(|m| &hyps[m.1]);
            let (mut inter, mut union) = (0usize, 0usize);
            for (rs, hs) in &g {
                let a = rs.contains(name);
                let b = h.is_some_and(|h| hs.contains(h));
                inter += (a && b) as usize;
                union += (a || b) as usize;
            }
            total += if union > 0 { 1.0 - inter as f64 / union as f64 } else { 1.0 };
        }
        total / refs.len() as f64
    };
    let k = refs.len().min(hyps.len());
    let maps: Vec<Vec<(usize, usize)>> = if refs.len() <= hyps.len() {
        permutations(&(0..hyps.len()).collect::<Vec<_>>()).into_iter().map(|p| (0..k).map(|i| (i, p[i])).collect()).collect()
    } else {
        permutations(&(0..refs.len()).collect::<Vec<_>>()).into_iter().map(|p| (0..k).map(|j| (p[j], j)).collect()).collect()
    };
    maps.iter().map(|m| score(m)).fold(f64::INFINITY, f64::min)
}

pub fn random_turns(rng: &mut ChaCha8Rng, prefix: &str, n_spk: usize, n_turns: usize) -> Vec<Turn> {
    (0..n_turns)
        .map(|_| {
            let onset = rng.random_range(0..8000) as f64 / 1000.0;
            let dur = rng.random_range(100..3000) as f64 / 1000.0;
            Turn::new("f", format!("{prefix}{}", rng.random_range(0..n_spk)), onset, dur)
        })
        .collect()
}

pub fn dense_eer(genuine: &[f64], impostor: &[f64]) -> f64 {
    let lo = genuine.iter().chain(impostor).cloned().fold(f64::INFINITY, f64::min);
    let hi = genuine.iter().chain(impostor).cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=10_000 {
        let t = lo + (hi - lo) * k as f64 / 10_000.0;
        let far = impostor.iter().filter(|&&s| s >= t).count() as f64 / impostor.len() as f64;
        let frr = genuine.iter().filter(|&&s| s < t).count() as f64 / genuine.len() as f64;
        if (far - frr).abs() < best.0 {
            best = ((far - frr).abs(), 0.5 * (far + frr));
        }
    }
    best.1
}

pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for &p in path {
        if Some(p) != prev && p != 0 {
            out.push(p);
        }
        prev = Some(p);
    }
    out
}

/// Sums every V^T path whose collapse equals `labels`.
pub fn brute_force_ctc(lp: &[Vec<f64>], labels: &[usize]) -> f64 {
    let (t_len, v) = (lp.len(), lp[0].len());
    let mut total = 0.0;
    let mut path = vec![0usize; t_len];
    for code in 0..v.pow(t_len as u32) {
        let mut c = code;
        for p in path.iter_mut() {
            *p = c % v;
            c /= v;
        }
        if collapse(&path) == labels {
            total += path.iter().enumerate().map(|(t, &s)| lp[t][s]).sum::<f64>().exp();
        }
    }
    -total.ln()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn random_lattice(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    loop {
        let t_len = rng.random_range(1..=6);
        let v = rng.random_range(2..=4);
        let n_labels = rng.random_range(0..=3);
        let labels: Vec<usize> = (0..n_labels).map(|_| rng.random_range(1..v)).collect();
        if ctc_min_frames(&labels).max(1) > t_len {
            continue;
        }
        let lp = (0..t_len).map(|_| log_softmax(&(0..v).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>())).collect();
        return (lp, labels);
    }
}

pub fn separable_data(seed: u64) -> TrainData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut features = Vec::new();
    let mut frame_labels = Vec::new();
    for block in 0..50 {
        let class = (block * 7 % 3 % 2) as usize;
        let centre = if class == 0 { [-2.0, 1.0] } else { [2.0, -1.0] };
        for _ in 0..10 {
            features.push(vec![centre[0] + noise.sample(&mut rng), centre[1] + noise.sample(&mut rng)]);
            frame_labels.push(class);
        }
    }
    let sequences = sequences_from_labels(&frame_labels, 20);
    TrainData { features, frame_labels, sequences, n_classes: 2 }
}

/// Alternating one-hot frames whose held-out tail contradicts the training
/// rule, so validation loss rises from the first epoch on.
pub fn early_stop_data() -> TrainData {
    let mut features = Vec::new();
    let mut frame_labels = Vec::new();
    for i in 0..100 {
        let class = i % 2;
        features.push(if class == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] });
        frame_labels.push(if i >= 80 { 1 - class } else { class });
    }
    TrainData { features, frame_labels, sequences: vec![], n_classes: 2 }
}

/// DFT magnitude at an arbitrary frequency (Hann weighted).
pub fn dft_magnitude(samples: &[f64], sample_rate: f64, freq: f64) -> f64 {
    let n = samples.len() as f64;
    let w = 2.0 * std::f64::consts::PI * freq / sample_rate;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &x) in samples.iter().enumerate() {
        let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n).cos();
        re += x * hann * (w * i as f64).cos();
        im -= x * hann * (w * i as f64).sin();
    }
    (re * re + im * im).sqrt()
}

/// Strongest frequency in `[lo, hi]`: a 1 Hz scan refined to 0.01 Hz.
pub fn dft_peak(samples: &[f64], sample_rate: f64, lo: f64, hi: f64) -> f64 {
    let scan = |from: f64, to: f64, step: f64| {
        let mut best = (from, f64::NEG_INFINITY);
        let mut f = from;
        while f <= to {
            let m = dft_magnitude(samples, sample_rate, f);
            if m > best.1 {
                best = (f, m);
            }
            f += step;
        }
        best.0
    };
    let coarse = scan(lo, hi, 1.0);
    scan(coarse - 1.0, coarse + 1.0, 0.01)
}
