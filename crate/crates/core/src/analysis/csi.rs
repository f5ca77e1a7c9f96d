use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ConvNet;
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Planar};
use crate::transforms::{normalize, NormalizationConstants};

/// Spatially averaged activations of one layer: one row per image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureResponseTable<T> {
    pub responses: Matrix<T>,
    pub labels: Vec<u32>,
    pub layer_id: String,
}

impl<T: Scalar> FeatureResponseTable<T> {
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.responses.rows() {
            return Err(Error::Shape(format!("{} labels for {} response rows", self.labels.len(), self.responses.rows())));
        }
        if !self.responses.is_finite() {
            return Err(Error::Contract(format!("layer {} has non-finite responses", self.layer_id)));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.responses.cols()
    }
}

/// One table per conv layer (`layer-1`, `layer-2`, …) of post-ReLU responses.
pub fn response_tables<T: Scalar>(
    net: &ConvNet<T>,
    images: &[Planar<T>],
    labels: &[u32],
    normalization: &NormalizationConstants,
) -> Result<Vec<FeatureResponseTable<T>>> {
    use rayon::prelude::*;
    if images.len() != labels.len() {
        return Err(Error::Shape(format!("{} images for {} labels", images.len(), labels.len())));
    }
    let taps: Vec<Vec<Vec<T>>> =
        images.par_iter().map(|img| net.layer_responses(&normalize(img, normalization)?)).collect::<Result<_>>()?;
    let n_layers = net.architecture().layers.len();
    (0..n_layers)
        .map(|l| {
            let width = net.architecture().layers[l].out_channels;
            let data: Vec<T> = taps.iter().flat_map(|t| t[l].iter().copied()).collect();
            Ok(FeatureResponseTable {
                responses: Matrix::from_vec(images.len(), width, data)?,
                labels: labels.to_vec(),
                layer_id: format!("layer-{}", l + 1),
            })
        })
        .collect()
}

fn class_means<T: Scalar>(responses: &Matrix<T>, labels: &[u32], rows: &[usize], n_classes: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let f = responses.cols();
    let mut sums = vec![vec![0.0; f]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for &i in rows {
        let c = labels[i] as usize;
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(responses.row(i)) {
            *s += v.as_f64();
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    (sums, counts)
}

/// `(mu_max - mu_rest) / (mu_max + mu_rest)` with the preferred class chosen
/// on `select` rows and both means measured on `measure` rows. `mu_rest`
/// averages over images, not over class means.
fn csi_rows<T: Scalar>(table: &FeatureResponseTable<T>, select: &[usize], measure: &[usize]) -> Result<Vec<f64>> {
    table.validate()?;
    let n_classes = table.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let (sel_means, sel_counts) = class_means(&table.responses, &table.labels, select, n_classes);
    if sel_counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Contract("class selectivity needs at least 2 classes".into()));
    }
    if table.responses.as_slice().iter().any(|v| *v < T::zero()) {
        return Err(Error::Contract(format!("layer {} has negative responses", table.layer_id)));
    }
    let (means, counts) = class_means(&table.responses, &table.labels, measure, n_classes);
    let totals: Vec<f64> = (0..table.n_features()).map(|j| measure.iter().map(|&i| table.responses.get(i, j).as_f64()).sum()).collect();
    let mut out = Vec::with_capacity(table.n_features());
    for j in 0..table.n_features() {
        let best = (0..n_classes)
            .filter(|&c| sel_counts[c] > 0)
            .fold(None::<usize>, |b, c| match b {
                Some(b) if sel_means[b][j] >= sel_means[c][j] => Some(b),
                _ => Some(c),
            })
            .unwrap_or(0);
        let rest_n = measure.len() - counts[best];
        if counts[best] == 0 || rest_n == 0 {
            return Err(Error::Contract("split half lacks images of the preferred or the other classes".into()));
        }
        let mu_max = means[best][j];
        let mu_rest = (totals[j] - mu_max * counts[best] as f64) / rest_n as f64;
        let denom = mu_max + mu_rest;
        out.push(if denom == 0.0 { 0.0 } else { (mu_max - mu_rest) / denom });
    }
    Ok(out)
}

/// Class selectivity index of every feature in `table`.
pub fn csi<T: Scalar>(table: &FeatureResponseTable<T>) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..table.labels.len()).collect();
    csi_rows(table, &all, &all)
}

/// Preferred class from a seeded random half of each class, CSI from the
/// other half, which removes the selection bias of `csi`.
pub fn csi_split_half<T: Scalar>(table: &FeatureResponseTable<T>, seed: u64) -> Result<Vec<f64>> {
    let n_classes = table.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..table.labels.len()).filter(|&i| table.labels[i] as usize == c).collect();
        members.shuffle(&mut stream(seed, "csi-half", &[c as u64]));
        let half = members.len() / 2;
        a.extend_from_slice(&members[..half]);
        b.extend_from_slice(&members[half..]);
    }
    csi_rows(table, &a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&[f64], u32)]) -> FeatureResponseTable<f64> {
        let f = rows[0].0.len();
        FeatureResponseTable {
            responses: Matrix::from_vec(rows.len(), f, rows.iter().flat_map(|r| r.0.iter().copied()).collect()).unwrap(),
            labels: rows.iter().map(|r| r.1).collect(),
            layer_id: "t".into(),
        }
    }

    #[test]
    fn closed_forms() {
        let t = table(&[(&[1.0, 2.0, 3.0, 0.0], 0), (&[0.0, 2.0, 1.0, 0.0], 1), (&[0.0, 2.0, 1.0, 0.0], 2)]);
        assert_eq!(csi(&t).unwrap(), vec![1.0, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn rest_mean_is_over_images() {
        // class 1 has two images of 2, class 2 one image of 0: rest = 4/3
        let t = table(&[(&[4.0], 0), (&[2.0], 1), (&[2.0], 1), (&[0.0], 2)]);
        let expect = (4.0 - 4.0 / 3.0) / (4.0 + 4.0 / 3.0);
        assert!((csi(&t).unwrap()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn single_class_and_negative_inputs_rejected() {
        assert!(matches!(csi(&table(&[(&[1.0], 0), (&[2.0], 0)])), Err(Error::Contract(_))));
        assert!(matches!(csi(&table(&[(&[-1.0], 0), (&[2.0], 1)])), Err(Error::Contract(_))));
    }

    #[test]
    fn split_half_on_selective_feature() {
        let rows: Vec<(Vec<f64>, u32)> = (0..40).map(|i| (vec![if i % 4 == 0 { 5.0 } else { 0.0 }], (i % 4) as u32)).collect();
        let refs: Vec<(&[f64], u32)> = rows.iter().map(|(v, l)| (v.as_slice(), *l)).collect();
        assert_eq!(csi_split_half(&table(&refs), 3).unwrap(), vec![1.0]);
    }
}
