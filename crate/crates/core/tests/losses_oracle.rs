use diarkit::losses::{cross_entropy, ctc_loss, ctc_loss_unchecked, train_toy, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod support;
use support::{brute_force_ctc, early_stop_data, norm, random_lattice, separable_data};

#[test]
fn ctc_matches_enumeration_and_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let h = 1e-5;
    for _ in 0..200 {
        let (lp, labels) = random_lattice(&mut rng);
        let r = ctc_loss(&lp, &labels).unwrap();
        let want = brute_force_ctc(&lp, &labels);
        assert!((r.loss - want).abs() < 1e-9, "{} vs {want}", r.loss);

        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for t in 0..lp.len() {
            for k in 0..lp[0].len() {
                let mut up = lp.clone();
                up[t][k] += h;
                let mut down = lp.clone();
                down[t][k] -= h;
                let fd = (ctc_loss_unchecked(&up, &labels).unwrap().loss - ctc_loss_unchecked(&down, &labels).unwrap().loss)
                    / (2.0 * h);
                analytic.push(r.grad[t][k]);
                numeric.push(fd);
            }
        }
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12);
        assert!(rel < 1e-4, "relative error {rel}");
    }
}

#[test]
fn ce_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    for _ in 0..100 {
        let logits: Vec<f64> = (0..5).map(|_| rng.random_range(-4.0..4.0)).collect();
        let class = rng.random_range(0..5);
        let (_, grad) = cross_entropy(&logits, class).unwrap();
        let numeric: Vec<f64> = (0..5)
            .map(|k| {
                let mut up = logits.clone();
                up[k] += h;
                let mut down = logits.clone();
                down[k] -= h;
                (cross_entropy(&up, class).unwrap().0 - cross_entropy(&down, class).unwrap().0) / (2.0 * h)
            })
            .collect();
        let diff: Vec<f64> = grad.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) / norm(&grad) < 1e-6);
    }
}

#[test]
fn separable_toy_reaches_high_accuracy() {
    let data = separable_data(1);
    let config = TrainConfig { learning_rate: 1e-2, ..TrainConfig::default() };
    let out = train_toy(&data, &config).unwrap();
    let acc = out.model.accuracy(&data.features, &data.frame_labels);
    assert!(acc >= 0.99, "accuracy {acc}");
    assert!(out.history.last().unwrap().train_loss < out.history[0].train_loss);
    let again = train_toy(&data, &config).unwrap();
    assert_eq!(out, again);
}

#[test]
fn early_stop_fires_at_constructed_epoch() {
    let data = early_stop_data();
    let config = TrainConfig { learning_rate: 1e-2, early_stop_patience: 3, ..TrainConfig::default() };
    let out = train_toy(&data, &config).unwrap();
    assert_eq!(out.best_epoch, 1);
    assert_eq!(out.early_stopped_at, Some(4));
    assert_eq!(out.history.len(), 4);
    assert!(out.history.windows(2).all(|w| w[1].val_loss > w[0].val_loss));
}
