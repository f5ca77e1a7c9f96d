use rand::seq::index::sample;

use super::csi::FeatureResponseTable;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;

/// Row indices of the `top_k` strongest responses of `feature` within a
/// seeded uniform sample of `sample_size` rows, strongest first. Ties keep
/// sample order.
pub fn top_activating_images<T: Scalar>(
    table: &FeatureResponseTable<T>,
    feature: usize,
    sample_size: usize,
    top_k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = table.responses.rows();
    if feature >= table.n_features() {
        return Err(Error::Parameter(format!("feature {feature} out of range for {} features", table.n_features())));
    }
    if sample_size > n {
        return Err(Error::Parameter(format!("sample of {sample_size} from {n} images")));
    }
    let mut rows = sample(&mut stream(seed, "top-activating", &[]), n, sample_size).into_vec();
    rows.sort_by(|&a, &b| table.responses.get(b, feature).as_f64().total_cmp(&table.responses.get(a, feature).as_f64()));
    rows.truncate(top_k);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    #[test]
    fn full_sample_is_sorted() {
        let vals = vec![0.3, 0.9, 0.1, 0.5];
        let t = FeatureResponseTable { responses: Matrix::from_vec(4, 1, vals).unwrap(), labels: vec![0; 4], layer_id: "l".into() };
        assert_eq!(top_activating_images(&t, 0, 4, 4, 1).unwrap(), vec![1, 3, 0, 2]);
        assert!(top_activating_images(&t, 0, 5, 1, 1).is_err());
    }
}
