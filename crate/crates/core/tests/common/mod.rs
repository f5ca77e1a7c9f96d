//! Brute-force reference implementations shared by the integration tests
//! and the acceptance runner. The oracles never call the library code they
//! stand in for.
#![allow(dead_code)]

use headcam_core::ingest::{LabelingOptions, Manifest, ManifestEntry, PreprocessConfig};
use headcam_core::ssl::{info_nce_unchecked, temporal_classification_loss};
use headcam_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A manifest of consecutive recordings, `(id, frame count)` each.
pub fn manifest(recordings: &[(String, usize)], fps: f64) -> Manifest {
    let mut m = Manifest::new(fps, PreprocessConfig::default());
    let mut id = 0u64;
    for (rec, n) in recordings {
        for k in 0..*n {
            m.entries.push(ManifestEntry {
                frame_id: id,
                recording_id: rec.clone(),
                timestamp_s: k as f64 / fps,
                label: None,
                exemplar_id: None,
                shard_path: "shard-000000.tar".into(),
                shard_offset: id,
            });
            id += 1;
        }
    }
    m
}

/// Walks the frames one at a time, opening a new class whenever the current
/// one is full (or, with resets, when the recording changes), then drops
/// short trailing classes if asked and renumbers.
pub fn labeling_oracle(recordings: &[(String, usize)], per_class: usize, options: LabelingOptions) -> (Vec<Option<u32>>, usize) {
    let mut raw: Vec<usize> = Vec::new();
    let mut class = 0usize;
    let mut fill = 0usize;
    let mut started = false;
    for (rec_index, (_, n)) in recordings.iter().enumerate() {
        for k in 0..*n {
            let new_recording = k == 0 && rec_index > 0 && options.reset_episodes_per_recording;
            if !started {
                started = true;
            } else if fill == per_class || (new_recording && fill > 0) {
                class += 1;
                fill = 0;
            }
            raw.push(class);
            fill += 1;
        }
    }
    let n_raw = if started { class + 1 } else { 0 };
    let mut sizes = vec![0usize; n_raw];
    for &c in &raw {
        sizes[c] += 1;
    }
    let mut renumber = vec![None; n_raw];
    let mut next = 0u32;
    for c in 0..n_raw {
        if !(options.drop_partial_episode && sizes[c] < per_class) {
            renumber[c] = Some(next);
            next += 1;
        }
    }
    (raw.iter().map(|&c| renumber[c]).collect(), next as usize)
}

/// Class selectivity by explicit loops: preferred class is the first class
/// with the highest mean; the rest mean is taken over all other images.
pub fn csi_oracle(responses: &[Vec<f64>], labels: &[u32]) -> Vec<f64> {
    let n_features = responses[0].len();
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    (0..n_features)
        .map(|j| {
            let mut best: Option<(u32, f64)> = None;
            for &c in &classes {
                let (mut s, mut n) = (0.0, 0.0);
                for (row, &l) in responses.iter().zip(labels) {
                    if l == c {
                        s += row[j];
                        n += 1.0;
                    }
                }
                let mean = s / n;
                if best.is_none_or(|(_, b)| mean > b) {
                    best = Some((c, mean));
                }
            }
            let (c, mu_max) = best.unwrap();
            let (mut s, mut n) = (0.0, 0.0);
            for (row, &l) in responses.iter().zip(labels) {
                if l != c {
                    s += row[j];
                    n += 1.0;
                }
            }
            let mu_rest = s / n;
            if mu_max + mu_rest == 0.0 {
                0.0
            } else {
                (mu_max - mu_rest) / (mu_max + mu_rest)
            }
        })
        .collect()
}

/// HOG descriptor length by enumerating every block position and counting
/// the histogram bins it contributes.
pub fn hog_length_oracle(height: usize, width: usize, cell: usize, block: usize, orientations: usize) -> usize {
    let (cells_r, cells_c) = (height / cell, width / cell);
    let mut total = 0;
    for r in 0..cells_r {
        for c in 0..cells_c {
            if r + block <= cells_r && c + block <= cells_c {
                for _ in 0..block * block {
                    total += orientations;
                }
            }
        }
    }
    total
}

/// Queue pointer after enqueueing batches of the given sizes, one step at a
/// time around the ring.
pub fn queue_pointer_oracle(size: usize, batches: &[usize]) -> usize {
    let mut p = 0;
    for &b in batches {
        for _ in 0..b {
            p += 1;
            if p == size {
                p = 0;
            }
        }
    }
    p
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let up = f(&probe);
            probe[i] = orig - eps;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn unit_rows(mut m: Matrix<f64>) -> Matrix<f64> {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-6);
        row.iter_mut().for_each(|v| *v /= n);
    }
    m
}

/// Relative error between the analytic cross-entropy gradient and central
/// differences on a random instance.
pub fn cross_entropy_gradcheck(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c) = (rng.random_range(1..6), rng.random_range(2..12));
    let logits = random_matrix(&mut rng, n, c, 3.0);
    let classes: Vec<u32> = (0..n).map(|_| rng.random_range(0..c as u32)).collect();
    let analytic = temporal_classification_loss(&logits, &classes).unwrap().grad.into_vec();
    let numeric = numeric_gradient(logits.as_slice(), 1e-6, |x| {
        temporal_classification_loss(&Matrix::from_vec(n, c, x.to_vec()).unwrap(), &classes).unwrap().loss
    });
    relative_error(&analytic, &numeric)
}

/// Same for InfoNCE, with respect to both the queries and the positive keys.
pub fn info_nce_gradcheck(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d, k) = (rng.random_range(1..5), rng.random_range(2..9), rng.random_range(1..10));
    let t = rng.random_range(0.1..1.0);
    let q = unit_rows(random_matrix(&mut rng, n, d, 1.0));
    let pos = unit_rows(random_matrix(&mut rng, n, d, 1.0));
    let queue = unit_rows(random_matrix(&mut rng, k, d, 1.0));
    let out = info_nce_unchecked(&q, &pos, &queue, t).unwrap();
    let loss = |q: &Matrix<f64>, p: &Matrix<f64>| info_nce_unchecked(q, p, &queue, t).unwrap().loss;
    let num_q = numeric_gradient(q.as_slice(), 1e-6, |x| loss(&Matrix::from_vec(n, d, x.to_vec()).unwrap(), &pos));
    let num_p = numeric_gradient(pos.as_slice(), 1e-6, |x| loss(&q, &Matrix::from_vec(n, d, x.to_vec()).unwrap()));
    let analytic: Vec<f64> = out.grad_query.as_slice().iter().chain(out.grad_positive.as_slice()).copied().collect();
    let numeric: Vec<f64> = num_q.into_iter().chain(num_p).collect();
    relative_error(&analytic, &numeric)
}
