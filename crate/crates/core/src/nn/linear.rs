use rand_distr::{Distribution, Uniform};

use super::params::ParamSet;
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Affine map `y = W x + b` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub params: ParamSet<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            params: ParamSet::from_layout(&[("weight", vec![outputs, inputs]), ("bias", vec![outputs])]),
        }
    }

    /// Uniform `±1/sqrt(in)` weights, zero bias.
    pub fn random(inputs: usize, outputs: usize, seed: u64, domain: &str) -> Self {
        let mut l = Self::zeros(inputs, outputs);
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let mut rng = stream(seed, domain, &[]);
        let r = l.params.layout[0].range();
        for v in &mut l.params.data[r] {
            *v = T::lit(dist.sample(&mut rng));
        }
        l
    }

    pub fn weight(&self) -> &[T] {
        self.params.segment(0)
    }

    pub fn bias(&self) -> &[T] {
        self.params.segment(1)
    }

    pub fn forward(&self, x: &Matrix<T>) -> Matrix<T> {
        assert_eq!(x.cols(), self.inputs, "linear input width");
        let mut out = Matrix::zeros(x.rows(), self.outputs);
        for r in 0..x.rows() {
            out.row_mut(r).copy_from_slice(self.bias());
        }
        T::gemm(
            x.rows(),
            self.inputs,
            self.outputs,
            T::one(),
            x.as_slice(),
            self.inputs as isize,
            1,
            self.weight(),
            1,
            self.inputs as isize,
            T::one(),
            out.as_mut_slice(),
            self.outputs as isize,
            1,
        );
        out
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, x: &Matrix<T>, dy: &Matrix<T>, grads: &mut [T]) -> Matrix<T> {
        let (n, i, o) = (x.rows(), self.inputs, self.outputs);
        let (gw, gb) = grads.split_at_mut(o * i);
        T::gemm(o, n, i, T::one(), dy.as_slice(), 1, o as isize, x.as_slice(), i as isize, 1, T::one(), gw, i as isize, 1);
        for r in 0..n {
            for (g, d) in gb.iter_mut().zip(dy.row(r)) {
                *g += *d;
            }
        }
        let mut dx = Matrix::zeros(n, i);
        T::gemm(n, o, i, T::one(), dy.as_slice(), o as isize, 1, self.weight(), i as isize, 1, T::zero(), dx.as_mut_slice(), i as isize, 1);
        dx
    }
}

/// Row-wise L2 normalization; returns the normalized rows and their norms.
pub fn l2_normalize_rows<T: Scalar>(x: &Matrix<T>) -> (Matrix<T>, Vec<T>) {
    let mut out = x.clone();
    let mut norms = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = out.row_mut(r);
        let n = row.iter().map(|v| *v * *v).sum::<T>().sqrt().max(T::lit(1e-12));
        row.iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    (out, norms)
}

/// Backward of [`l2_normalize_rows`]: `dx = (dy − y (y·dy)) / |x|`.
pub fn l2_normalize_backward<T: Scalar>(y: &Matrix<T>, norms: &[T], dy: &Matrix<T>) -> Matrix<T> {
    let mut dx = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let yr = y.row(r);
        let dr = dy.row(r);
        let dot: T = yr.iter().zip(dr).map(|(a, b)| *a * *b).sum();
        for ((o, a), b) in dx.row_mut(r).iter_mut().zip(yr).zip(dr) {
            *o = (*b - *a * dot) / norms[r];
        }
    }
    dx
}

/// Two-layer projection head `D → H → ReLU → d` followed by L2
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub first: Linear<T>,
    pub second: Linear<T>,
}

pub struct ProjectionCache<T> {
    input: Matrix<T>,
    hidden: Matrix<T>,
    out: Matrix<T>,
    norms: Vec<T>,
}

impl<T: Scalar> Projection<T> {
    pub fn random(inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        Self {
            first: Linear::random(inputs, hidden, seed, "projection-0"),
            second: Linear::random(hidden, outputs, seed, "projection-1"),
        }
    }

    pub fn param_len(&self) -> usize {
        self.first.params.len() + self.second.params.len()
    }

    pub fn output_dim(&self) -> usize {
        self.second.outputs
    }

    fn hidden(&self, x: &Matrix<T>) -> Matrix<T> {
        self.first.forward(x).map(|v| v.max(T::zero()))
    }

    pub fn forward(&self, x: &Matrix<T>) -> Matrix<T> {
        l2_normalize_rows(&self.second.forward(&self.hidden(x))).0
    }

    pub fn forward_train(&self, x: &Matrix<T>) -> (Matrix<T>, ProjectionCache<T>) {
        let hidden = self.hidden(x);
        let (out, norms) = l2_normalize_rows(&self.second.forward(&hidden));
        (out.clone(), ProjectionCache { input: x.clone(), hidden, out, norms })
    }

    /// `grads` holds the first layer's gradients followed by the second's.
    pub fn backward(&self, cache: &ProjectionCache<T>, dy: &Matrix<T>, grads: &mut [T]) -> Matrix<T> {
        let (g1, g2) = grads.split_at_mut(self.first.params.len());
        let dz = l2_normalize_backward(&cache.out, &cache.norms, dy);
        let mut dh = self.second.backward(&cache.hidden, &dz, g2);
        for (d, h) in dh.as_mut_slice().iter_mut().zip(cache.hidden.as_slice()) {
            if *h <= T::zero() {
                *d = T::zero();
            }
        }
        self.first.backward(&cache.input, &dh, g1)
    }

    pub fn flat_params(&self) -> Vec<T> {
        let mut v = self.first.params.data.clone();
        v.extend_from_slice(&self.second.params.data);
        v
    }

    pub fn set_flat_params(&mut self, flat: &[T]) {
        let n = self.first.params.len();
        self.first.params.data.copy_from_slice(&flat[..n]);
        self.second.params.data.copy_from_slice(&flat[n..]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = stream(seed, "m", &[]);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn dot(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn linear_matches_naive_product() {
        let l = Linear::<f64>::random(4, 3, 1, "t");
        let x = random_matrix(5, 4, 2);
        let y = l.forward(&x);
        for r in 0..5 {
            for o in 0..3 {
                let want: f64 = l.bias()[o] + (0..4).map(|i| l.weight()[o * 4 + i] * x.get(r, i)).sum::<f64>();
                assert!((y.get(r, o) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_gradients_match_finite_differences() {
        let mut p = Projection::<f64>::random(6, 5, 4, 3);
        p.first.params.data.iter_mut().skip(30).for_each(|b| *b = 0.2);
        let x = random_matrix(3, 6, 4);
        let up = random_matrix(3, 4, 5);
        let (_, cache) = p.forward_train(&x);
        let mut grads = vec![0.0; p.param_len()];
        let dx = p.backward(&cache, &up, &mut grads);
        let eps = 1e-6;
        let flat = p.flat_params();
        for i in 0..flat.len() {
            let mut a = flat.clone();
            a[i] += eps;
            p.set_flat_params(&a);
            let hi = dot(&p.forward(&x), &up);
            a[i] -= 2.0 * eps;
            p.set_flat_params(&a);
            let lo = dot(&p.forward(&x), &up);
            let fd = (hi - lo) / (2.0 * eps);
            assert!((fd - grads[i]).abs() <= 1e-6 + 1e-4 * fd.abs(), "param {i}: {fd} vs {}", grads[i]);
        }
        p.set_flat_params(&flat);
        for i in 0..x.as_slice().len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[i] += eps;
            let hi = dot(&p.forward(&xp), &up);
            xp.as_mut_slice()[i] -= 2.0 * eps;
            let lo = dot(&p.forward(&xp), &up);
            let fd = (hi - lo) / (2.0 * eps);
            assert!((fd - dx.as_slice()[i]).abs() <= 1e-6 + 1e-4 * fd.abs());
        }
    }

    #[test]
    fn normalized_rows_are_unit() {
        let (y, _) = l2_normalize_rows(&random_matrix(4, 7, 9));
        for r in 0..4 {
            let n: f64 = y.row(r).iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
