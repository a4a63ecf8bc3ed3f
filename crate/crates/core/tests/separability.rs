use diarkit::corpus::{profile_pool, synth_utterance, PROFILE_POOL_SEED};
use diarkit::embed::{EmbeddingProvider, MfccEmbedder};
use diarkit::vad::Segment;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

#[test]
fn pool_profiles_are_separable() {
    let pool = profile_pool(PROFILE_POOL_SEED);
    let embedder = MfccEmbedder::default();
    let seg = Segment { file_id: "u".into(), onset_s: 0.0, offset_s: 1.5, index: 0 };
    let embs: Vec<Vec<Vec<f64>>> = pool
        .iter()
        .map(|p| {
            (0..3u64)
                .map(|s| {
                    let buf = synth_utterance(p, 1.5, 100 + s, 16_000).unwrap();
                    embedder.embed(&buf, &seg).unwrap().vector
                })
                .collect()
        })
        .collect();
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0, 0.0, 0);
    for (i, a) in embs.iter().enumerate() {
        for (j, b) in embs.iter().enumerate() {
            for (u, x) in a.iter().enumerate() {
                for (v, y) in b.iter().enumerate() {
                    if i == j && u < v {
                        within += cosine(x, y);
                        nw += 1;
                    } else if i < j {
                        between += cosine(x, y);
                        nb += 1;
                    }
                }
            }
        }
    }
    let (within, between) = (within / nw as f64, between / nb as f64);
    println!("within {within:.4} between {between:.4} ratio {:.2}", between / within);
    assert!(between >= 2.0 * within);
}
