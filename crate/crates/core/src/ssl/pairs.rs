use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::Manifest;

/// For each anchor ordinal, one of its immediate neighbours within the same
/// sequence, chosen uniformly; the single neighbour at a sequence boundary.
/// `sequence_of[i]` identifies the sequence of ordinal `i`; sequences must
/// be contiguous. A sequence of length one pairs its frame with itself.
pub fn temporal_positives<S: PartialEq, R: Rng>(sequence_of: &[S], anchors: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    let n = sequence_of.len();
    if n < 2 {
        return Err(Error::Contract(format!("temporal pairs need at least 2 frames, got {n}")));
    }
    anchors
        .iter()
        .map(|&i| {
            if i >= n {
                return Err(Error::Contract(format!("anchor {i} outside [0, {n})")));
            }
            let prev = (i > 0 && sequence_of[i - 1] == sequence_of[i]).then(|| i - 1);
            let next = (i + 1 < n && sequence_of[i + 1] == sequence_of[i]).then_some(i + 1);
            Ok(match (prev, next) {
                (Some(p), Some(q)) => {
                    if rng.random_bool(0.5) {
                        p
                    } else {
                        q
                    }
                }
                (Some(p), None) => p,
                (None, Some(q)) => q,
                (None, None) => i,
            })
        })
        .collect()
}

/// [`temporal_positives`] over manifest ordinals, with recordings as
/// sequences.
pub fn temporal_positive_pairs<R: Rng>(manifest: &Manifest, anchors: &[usize], rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    let recs: Vec<&str> = manifest.entries.iter().map(|e| e.recording_id.as_str()).collect();
    let positives = temporal_positives(&recs, anchors, rng)?;
    Ok((anchors.to_vec(), positives))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn boundaries_and_interior() {
        let seq = [0, 0, 0, 0, 1, 1];
        let mut rng = stream(1, "t", &[]);
        let pos = temporal_positives(&seq, &[0, 3, 4, 5], &mut rng).unwrap();
        assert_eq!(pos, vec![1, 2, 5, 4]);
        for _ in 0..50 {
            let p = temporal_positives(&seq, &[2], &mut rng).unwrap()[0];
            assert!(p == 1 || p == 3);
        }
    }

    #[test]
    fn interior_split_is_balanced() {
        let seq = vec![0u8; 3];
        let mut rng = stream(7, "t", &[]);
        let draws = 10_000;
        let later = temporal_positives(&seq, &vec![1; draws], &mut rng).unwrap().iter().filter(|&&p| p == 2).count();
        let sigma = (draws as f64 * 0.25).sqrt();
        assert!((later as f64 - draws as f64 / 2.0).abs() < 3.0 * sigma, "{later}");
    }

    #[test]
    fn too_few_frames() {
        let mut rng = stream(0, "t", &[]);
        assert!(matches!(temporal_positives(&[0], &[0], &mut rng), Err(Error::Contract(_))));
    }
}
