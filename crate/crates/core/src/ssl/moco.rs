//! Momentum-encoder bookkeeping: the negative-key queue and the
//! exponential parameter update.

use rand_distr::{Distribution, StandardNormal};

use super::losses::UNIT_NORM_TOLERANCE;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Queue<T> {
    keys: Matrix<T>,
    ptr: usize,
}

impl<T: Scalar> Queue<T> {
    /// `size` random unit vectors of dimension `dim`.
    pub fn random(size: usize, dim: usize, seed: u64) -> Result<Self> {
        if size == 0 || dim == 0 {
            return Err(Error::Parameter(format!("queue must be non-empty, got {size}x{dim}")));
        }
        let mut rng = stream(seed, "queue-init", &[]);
        let mut keys = Matrix::zeros(size, dim);
        for r in 0..size {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            for (o, x) in keys.row_mut(r).iter_mut().zip(&v) {
                *o = T::lit(x / norm);
            }
        }
        Ok(Self { keys, ptr: 0 })
    }

    pub fn from_parts(keys: Matrix<T>, ptr: usize) -> Result<Self> {
        if keys.rows() == 0 || ptr >= keys.rows() {
            return Err(Error::Contract(format!("queue pointer {ptr} outside [0, {})", keys.rows())));
        }
        Ok(Self { keys, ptr })
    }

    pub fn len(&self) -> usize {
        self.keys.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.keys.cols()
    }

    pub fn ptr(&self) -> usize {
        self.ptr
    }

    pub fn keys(&self) -> &Matrix<T> {
        &self.keys
    }

    /// Overwrites rows `[ptr, ptr + B)` modulo `K` and advances the pointer.
    pub fn enqueue(&mut self, batch: &Matrix<T>) -> Result<()> {
        let (k, b) = (self.len(), batch.rows());
        if b > k {
            return Err(Error::Contract(format!("cannot enqueue {b} keys into a queue of {k}")));
        }
        if batch.cols() != self.dim() {
            return Err(Error::Shape(format!("keys have dimension {}, queue has {}", batch.cols(), self.dim())));
        }
        for (r, row) in batch.iter_rows().enumerate() {
            let norm = row.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::Contract(format!("key {r} has norm {norm}, expected unit norm")));
            }
        }
        for (i, row) in batch.iter_rows().enumerate() {
            self.keys.row_mut((self.ptr + i) % k).copy_from_slice(row);
        }
        self.ptr = (self.ptr + b) % k;
        Ok(())
    }
}

/// Queue length actually used for a corpus of `n_frames`.
pub fn effective_queue_size(configured: usize, n_frames: usize) -> usize {
    configured.min(n_frames / 2).max(1)
}

/// `key ← m·key + (1 − m)·query`, elementwise.
pub fn momentum_update<T: Scalar>(query: &[T], key: &mut [T], m: f64) -> Result<()> {
    if query.len() != key.len() {
        return Err(Error::Contract(format!(
            "key parameters ({}) and query parameters ({}) differ in size",
            key.len(),
            query.len()
        )));
    }
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Parameter(format!("momentum must lie in [0, 1], got {m}")));
    }
    if m == 1.0 {
        return Ok(());
    }
    if m == 0.0 {
        key.copy_from_slice(query);
        return Ok(());
    }
    let (a, b) = (T::lit(m), T::lit(1.0 - m));
    for (k, q) in key.iter_mut().zip(query) {
        *k = a * *k + b * *q;
    }
    Ok(())
}
