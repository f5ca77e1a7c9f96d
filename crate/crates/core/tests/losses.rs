mod common;

use headcam_core::ssl::{info_nce_loss, temporal_classification_loss};
use headcam_core::{Error, Matrix};
use proptest::prelude::*;

#[test]
fn cross_entropy_gradients_match_central_differences() {
    for seed in 0..50 {
        let err = common::cross_entropy_gradcheck(seed);
        assert!(err < 1e-3, "instance {seed}: relative error {err}");
    }
}

#[test]
fn info_nce_gradients_match_central_differences() {
    for seed in 0..50 {
        let err = common::info_nce_gradcheck(1000 + seed);
        assert!(err < 1e-3, "instance {seed}: relative error {err}");
    }
}

proptest! {
    #[test]
    fn uniform_logits_give_log_classes(n in 1usize..8, c in 2usize..64, value in -5.0f64..5.0) {
        let logits = Matrix::from_vec(n, c, vec![value; n * c]).unwrap();
        let classes: Vec<u32> = (0..n).map(|i| (i % c) as u32).collect();
        let out = temporal_classification_loss(&logits, &classes).unwrap();
        prop_assert!((out.loss - (c as f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn equal_similarities_give_log_queue_plus_one(k in 1usize..64, d in 2usize..16, t in 0.05f64..1.0) {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        let q = Matrix::from_vec(1, d, v.clone()).unwrap();
        let queue = Matrix::from_vec(k, d, v.repeat(k)).unwrap();
        let out = info_nce_loss(&q, &q, &queue, t).unwrap();
        prop_assert!((out.loss - ((k + 1) as f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_is_nonnegative(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let logits = Matrix::from_vec(3, 5, (0..15).map(|_| rng.random_range(-20.0..20.0)).collect()).unwrap();
        let out = temporal_classification_loss(&logits, &[0, 2, 4]).unwrap();
        prop_assert!(out.loss >= 0.0 && out.loss.is_finite());
        // Each gradient row sums to zero.
        for r in 0..3 {
            prop_assert!(out.grad.row(r).iter().sum::<f64>().abs() < 1e-12);
        }
    }
}

#[test]
fn info_nce_requires_unit_norm() {
    let q = Matrix::from_vec(1, 2, vec![2.0, 0.0]).unwrap();
    let k = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
    assert!(matches!(info_nce_loss(&q, &k, &k, 0.2), Err(Error::Contract(_))));
    assert!(matches!(info_nce_loss(&k, &k, &k, 0.0), Err(Error::Parameter(_))));
}
