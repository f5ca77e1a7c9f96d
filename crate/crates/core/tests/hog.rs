mod common;

use headcam_core::baselines::{hog_features, hog_matrix, HogConfig};
use headcam_core::{Error, Planar};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(seed: u64, h: usize, w: usize) -> Planar<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Planar::from_vec(3, h, w, (0..3 * h * w).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}

fn block_norms(features: &[f64], cfg: &HogConfig) -> Vec<f64> {
    let block = cfg.block_cells * cfg.block_cells * cfg.orientations;
    features.chunks(block).map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
}

#[test]
fn default_length_at_224() {
    let cfg = HogConfig::default();
    assert_eq!(cfg.feature_len(224, 224).unwrap(), 11664);
    let img = random_image(0, 224, 224);
    assert_eq!(hog_features(&img, &cfg).unwrap().len(), 11664);
}

#[test]
fn block_norms_are_zero_or_one_on_random_images() {
    let cfg = HogConfig::default();
    for seed in 0..100 {
        let img = random_image(seed, 224, 224);
        for n in block_norms(&hog_features(&img, &cfg).unwrap(), &cfg) {
            assert!(n.abs() < 1e-9 || (n - 1.0).abs() < 1e-9, "image {seed}: block norm {n}");
        }
    }
}

#[test]
fn flat_regions_give_zero_blocks() {
    let cfg = HogConfig { cell_px: 8, ..HogConfig::default() };
    let mut img = Planar::<f64>::filled(3, 48, 48, 0.3);
    // Texture only in the top-left cell.
    for r in 0..8 {
        for c in 0..8 {
            img.data[r * 48 + c] = ((r * 7 + c * 3) % 5) as f64 / 5.0;
        }
    }
    let norms = block_norms(&hog_features(&img, &cfg).unwrap(), &cfg);
    assert!((norms[0] - 1.0).abs() < 1e-9);
    assert_eq!(*norms.last().unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn length_matches_block_enumeration(
        h in 8usize..120, w in 8usize..120,
        cell in 2usize..12, block in 1usize..4, orientations in 1usize..13,
    ) {
        let cfg = HogConfig { orientations, cell_px: cell, block_cells: block, signed_gradients: false };
        let want = common::hog_length_oracle(h, w, cell, block, orientations);
        match cfg.feature_len(h, w) {
            Ok(len) => {
                prop_assert_eq!(len, want);
                prop_assert_eq!(hog_features(&random_image(1, h, w), &cfg).unwrap().len(), want);
            }
            Err(Error::Parameter(_)) => prop_assert_eq!(want, 0),
            Err(e) => prop_assert!(false, "unexpected {e:?}"),
        }
    }

    #[test]
    fn invariant_to_offset_and_positive_gain(seed in any::<u64>(), offset in -0.5f64..0.5, gain in 0.1f64..4.0) {
        let cfg = HogConfig { cell_px: 8, ..HogConfig::default() };
        let img = random_image(seed, 40, 40);
        let moved = Planar::from_vec(3, 40, 40, img.data.iter().map(|v| v * gain + offset).collect()).unwrap();
        let a = hog_features(&img, &cfg).unwrap();
        let b = hog_features(&moved, &cfg).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
    }

    #[test]
    fn matrix_rows_match_single_images(seed in any::<u64>()) {
        let cfg = HogConfig { cell_px: 8, ..HogConfig::default() };
        let images: Vec<Planar<f64>> = (0..3).map(|k| random_image(seed.wrapping_add(k), 32, 32)).collect();
        let m = hog_matrix(&images, &cfg).unwrap();
        for (i, img) in images.iter().enumerate() {
            prop_assert_eq!(m.row(i), &hog_features(img, &cfg).unwrap()[..]);
        }
    }
}
