mod oracles;

use fuas_core::dosemodel::roc_auc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn score_set(seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=200);
    let coarse = seed.is_multiple_of(3);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
    labels[0] = true;
    labels[1] = false;
    let scores = labels
        .iter()
        .map(|&l| {
            // Coarse scores produce many ties, including cross-class ones.
            let s: f64 = if coarse { f64::from(rng.random_range(0..8)) } else { rng.random_range(0.0..1.0) };
            if l { s + 0.3 } else { s }
        })
        .collect();
    (scores, labels)
}

#[test]
fn matches_pairwise_count_exactly() {
    for seed in 0..100 {
        let (s, l) = score_set(seed);
        assert_eq!(roc_auc(&s, &l).unwrap(), oracles::pairwise_auc(&s, &l), "seed {seed}");
    }
}

#[test]
fn extreme_rankings() {
    let labels = [true, true, false, false];
    assert_eq!(roc_auc(&[4.0, 3.0, 2.0, 1.0], &labels).unwrap(), 1.0);
    assert_eq!(roc_auc(&[1.0, 2.0, 3.0, 4.0], &labels).unwrap(), 0.0);
    assert_eq!(roc_auc(&[1.0; 4], &labels).unwrap(), 0.5);
}

#[test]
fn single_class_is_an_error() {
    assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    assert!(roc_auc(&[0.1, 0.2], &[false, false]).is_err());
    assert!(roc_auc(&[0.1], &[true, false]).is_err());
}
