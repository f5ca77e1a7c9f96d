use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Mean batch loss, batch accuracy, and gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationLoss<T> {
    pub loss: f64,
    pub accuracy: f64,
    pub grad: Matrix<T>,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Softmax probabilities of `row` and its log-partition, in f64.
fn softmax<T: Scalar>(row: &[T]) -> (Vec<f64>, f64) {
    let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    (exps.into_iter().map(|e| e / z).collect(), max + z.ln())
}

/// Mean softmax cross-entropy over the batch.
pub fn temporal_classification_loss<T: Scalar>(logits: &Matrix<T>, class_ids: &[u32]) -> Result<ClassificationLoss<T>> {
    let (n, c) = (logits.rows(), logits.cols());
    if class_ids.len() != n {
        return Err(Error::Shape(format!("{n} logit rows but {} class ids", class_ids.len())));
    }
    if n == 0 {
        return Err(Error::EmptyInput("empty batch".into()));
    }
    if let Some(bad) = class_ids.iter().find(|&&k| k as usize >= c) {
        return Err(Error::Shape(format!("class id {bad} outside [0, {c})")));
    }
    let mut grad = Matrix::zeros(n, c);
    let (mut loss, mut correct) = (0.0, 0usize);
    for (r, &k) in class_ids.iter().enumerate() {
        let row = logits.row(r);
        let (p, log_z) = softmax(row);
        loss += log_z - row[k as usize].as_f64();
        correct += usize::from(argmax(row) == k as usize);
        for (j, (g, pj)) in grad.row_mut(r).iter_mut().zip(&p).enumerate() {
            let target = if j == k as usize { 1.0 } else { 0.0 };
            *g = T::lit((pj - target) / n as f64);
        }
    }
    Ok(ClassificationLoss { loss: loss / n as f64, accuracy: correct as f64 / n as f64, grad })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveLoss<T> {
    pub loss: f64,
    /// Fraction of rows whose positive outscores every negative.
    pub accuracy: f64,
    pub grad_query: Matrix<T>,
    pub grad_positive: Matrix<T>,
}

pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

fn check_unit_rows<T: Scalar>(name: &str, m: &Matrix<T>) -> Result<()> {
    for (r, row) in m.iter_rows().enumerate() {
        let norm = row.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::Contract(format!("{name} row {r} has norm {norm}, expected unit norm")));
        }
    }
    Ok(())
}

/// InfoNCE with one positive per query and a shared negative queue.
/// Rejects inputs that are not unit-norm.
pub fn info_nce_loss<T: Scalar>(
    query: &Matrix<T>,
    positive: &Matrix<T>,
    queue: &Matrix<T>,
    temperature: f64,
) -> Result<ContrastiveLoss<T>> {
    check_unit_rows("query", query)?;
    check_unit_rows("positive key", positive)?;
    check_unit_rows("queue", queue)?;
    info_nce_unchecked(query, positive, queue, temperature)
}

/// [`info_nce_loss`] without the unit-norm precondition; the expression is
/// smooth everywhere, which is what finite-difference checks need.
pub fn info_nce_unchecked<T: Scalar>(
    query: &Matrix<T>,
    positive: &Matrix<T>,
    queue: &Matrix<T>,
    temperature: f64,
) -> Result<ContrastiveLoss<T>> {
    let (n, d) = (query.rows(), query.cols());
    if positive.rows() != n || positive.cols() != d || queue.cols() != d {
        return Err(Error::Shape(format!(
            "query {n}x{d}, positive {}x{}, queue {}x{}",
            positive.rows(),
            positive.cols(),
            queue.rows(),
            queue.cols()
        )));
    }
    if n == 0 {
        return Err(Error::EmptyInput("empty batch".into()));
    }
    if !(temperature > 0.0) {
        return Err(Error::Parameter(format!("temperature must be positive, got {temperature}")));
    }
    let inv_t = 1.0 / temperature;
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(x, y)| x.as_f64() * y.as_f64()).sum::<f64>();
    let mut grad_query = Matrix::zeros(n, d);
    let mut grad_positive = Matrix::zeros(n, d);
    let (mut loss, mut correct) = (0.0, 0usize);
    for r in 0..n {
        let q = query.row(r);
        let k = positive.row(r);
        let mut logits = Vec::with_capacity(queue.rows() + 1);
        logits.push(dot(q, k) * inv_t);
        logits.extend(queue.iter_rows().map(|neg| dot(q, neg) * inv_t));
        let (p, log_z) = softmax(&logits);
        loss += log_z - logits[0];
        correct += usize::from(argmax(&logits) == 0);
        // dL/dlogit, already divided by the batch size and temperature.
        let scale = inv_t / n as f64;
        let d_pos = (p[0] - 1.0) * scale;
        let mut gq: Vec<f64> = k.iter().map(|v| d_pos * v.as_f64()).collect();
        for (neg, pj) in queue.iter_rows().zip(&p[1..]) {
            let w = pj * scale;
            for (g, v) in gq.iter_mut().zip(neg) {
                *g += w * v.as_f64();
            }
        }
        for (o, g) in grad_query.row_mut(r).iter_mut().zip(gq) {
            *o = T::lit(g);
        }
        for (o, v) in grad_positive.row_mut(r).iter_mut().zip(q) {
            *o = T::lit(d_pos * v.as_f64());
        }
    }
    Ok(ContrastiveLoss { loss: loss / n as f64, accuracy: correct as f64 / n as f64, grad_query, grad_positive })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_closed_forms() {
        let uniform = Matrix::<f64>::from_vec(2, 4, vec![0.3; 8]).unwrap();
        let out = temporal_classification_loss(&uniform, &[1, 3]).unwrap();
        assert!((out.loss - 4f64.ln()).abs() < 1e-12);

        let two = Matrix::<f64>::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let out = temporal_classification_loss(&two, &[0]).unwrap();
        assert!((out.loss - (1.0 + (-1f64).exp()).ln()).abs() < 1e-12);
        assert_eq!(out.accuracy, 1.0);

        let sat = Matrix::<f64>::from_vec(1, 3, vec![0.0, 20.0, 0.0]).unwrap();
        let out = temporal_classification_loss(&sat, &[1]).unwrap();
        assert!(out.loss < 1e-8);
    }

    #[test]
    fn cross_entropy_rejects_out_of_range_class() {
        let m = Matrix::<f64>::zeros(1, 3);
        assert!(matches!(temporal_classification_loss(&m, &[3]), Err(Error::Shape(_))));
    }

    #[test]
    fn info_nce_closed_forms() {
        let q = Matrix::<f64>::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let k = Matrix::<f64>::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let neg = Matrix::<f64>::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        let out = info_nce_loss(&q, &k, &neg, 1.0).unwrap();
        assert!((out.loss - (1.0 + (-1f64).exp()).ln()).abs() < 1e-12);

        let same = Matrix::<f64>::from_vec(5, 2, vec![0.6, 0.8].repeat(5)).unwrap();
        let q = Matrix::<f64>::from_vec(1, 2, vec![0.6, 0.8]).unwrap();
        let out = info_nce_loss(&q, &q, &same, 0.2).unwrap();
        assert!((out.loss - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn info_nce_requires_unit_norm() {
        let q = Matrix::<f64>::from_vec(1, 2, vec![2.0, 0.0]).unwrap();
        let k = Matrix::<f64>::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        assert!(matches!(info_nce_loss(&q, &k, &k, 0.2), Err(Error::Contract(_))));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0]), 0);
    }
}
