use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Largest Gram/covariance side solved exactly; above it a randomized
/// range finder estimates the leading spectrum.
pub const EXACT_LIMIT: usize = 4096;
const RANDOMIZED_RANK: usize = 1024;
const POWER_ITERATIONS: usize = 4;

fn centered<T: Scalar>(x: &Matrix<T>) -> DMatrix<f64> {
    let (n, d) = (x.rows(), x.cols());
    let mut m = DMatrix::from_fn(n, d, |i, j| x.get(i, j).as_f64());
    for j in 0..d {
        let mean = m.column(j).sum() / n as f64;
        m.column_mut(j).add_scalar_mut(-mean);
    }
    m
}

/// Eigenvalues of the scatter matrix `XᵀX`, descending, from whichever of
/// `XᵀX` / `XXᵀ` is smaller (both share their nonzero spectrum).
fn exact_spectrum(x: &DMatrix<f64>) -> Vec<f64> {
    let gram = if x.ncols() <= x.nrows() { x.transpose() * x } else { x * x.transpose() };
    let mut ev: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().map(|v| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

fn randomized_spectrum(x: &DMatrix<f64>, rank: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, "pca-sketch", &[]);
    let omega = DMatrix::from_fn(x.ncols(), rank, |_, _| StandardNormal.sample(&mut rng));
    let mut q = (x * omega).qr().q();
    for _ in 0..POWER_ITERATIONS {
        let z = (x.transpose() * &q).qr().q();
        q = (x * z).qr().q();
    }
    let b = q.transpose() * x;
    let mut ev: Vec<f64> = SymmetricEigen::new(&b * b.transpose()).eigenvalues.iter().map(|v| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Cumulative fraction of variance explained by the leading `k` principal
/// components, for `k = 1..=min(N-1, D)`. Above [`EXACT_LIMIT`] in both
/// dimensions only the leading components are estimated and the curve is
/// truncated (its last value is then below 1).
pub fn pca_curve<T: Scalar>(embeddings: &Matrix<T>) -> Result<Vec<f64>> {
    let (n, d) = (embeddings.rows(), embeddings.cols());
    if n < 2 || d == 0 {
        return Err(Error::EmptyInput(format!("PCA needs at least 2 rows and 1 column, got {n}×{d}")));
    }
    if !embeddings.is_finite() {
        return Err(Error::Contract("embeddings contain NaN or infinite values".into()));
    }
    let x = centered(embeddings);
    let total: f64 = x.iter().map(|v| v * v).sum();
    if total <= 0.0 {
        return Err(Error::ZeroVariance("all embedding rows are identical".into()));
    }
    let len = (n - 1).min(d);
    let (spectrum, total) = if n.min(d) <= EXACT_LIMIT {
        let s = exact_spectrum(&x);
        let sum = s.iter().sum();
        (s, sum)
    } else {
        (randomized_spectrum(&x, RANDOMIZED_RANK, 0), total)
    };
    let mut acc = 0.0;
    let mut curve: Vec<f64> = spectrum
        .iter()
        .take(len)
        .map(|v| {
            acc += v;
            (acc / total).min(1.0)
        })
        .collect();
    // Monotone despite rounding in the eigen solver.
    for i in 1..curve.len() {
        curve[i] = curve[i].max(curve[i - 1]);
    }
    Ok(curve)
}
