//! Strided convolutional trunk (conv + bias + ReLU per layer) ending in a
//! spatial feature stack; embeddings are its global spatial average.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::tensor::Planar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub const fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self { in_channels, out_channels, kernel, stride, padding: kernel / 2 }
    }

    pub fn out_dim(&self, n: usize) -> usize {
        (n + 2 * self.padding).saturating_sub(self.kernel) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

/// Input transforms `3×H×W` frames into `D×h×w` feature stacks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub id: String,
    /// Nominal input side length.
    pub input_size: usize,
    pub layers: Vec<ConvSpec>,
}

/// Registered architecture ids.
pub const ARCHITECTURES: [&str; 2] = ["small-cnn", "small-cnn-224"];

impl Architecture {
    pub fn lookup(id: &str) -> Result<Self> {
        let layers = match id {
            // 32 -> 16 -> 8 -> 8 -> 4; D = 128 on a 4x4 grid.
            "small-cnn" => vec![
                ConvSpec::new(3, 24, 3, 2),
                ConvSpec::new(24, 48, 3, 2),
                ConvSpec::new(48, 64, 3, 1),
                ConvSpec::new(64, 128, 3, 2),
            ],
            // 224 -> 112 -> 56 -> 28 -> 14 -> 7; D = 128 on a 7x7 grid.
            "small-cnn-224" => vec![
                ConvSpec::new(3, 16, 3, 2),
                ConvSpec::new(16, 32, 3, 2),
                ConvSpec::new(32, 64, 3, 2),
                ConvSpec::new(64, 96, 3, 2),
                ConvSpec::new(96, 128, 3, 2),
            ],
            other => {
                return Err(Error::Config(format!(
                    "unknown architecture `{other}` (registered: {})",
                    ARCHITECTURES.join(", ")
                )))
            }
        };
        let input_size = if id == "small-cnn" { 32 } else { 224 };
        Ok(Self { id: id.to_owned(), input_size, layers })
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_channels)
    }

    /// Spatial grid of the final feature stack for a square input of side `n`.
    pub fn grid_for(&self, n: usize) -> (usize, usize) {
        let side = self.layers.iter().fold(n, |s, l| l.out_dim(s));
        (side, side)
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid_for(self.input_size)
    }

    fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("conv{i}.weight"), vec![l.out_channels, l.in_channels, l.kernel, l.kernel]),
                    (format!("conv{i}.bias"), vec![l.out_channels]),
                ]
            })
            .collect()
    }
}

struct LayerCache<T> {
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    col: Vec<T>,
    out: Vec<T>,
}

/// Activations retained by a training forward pass.
pub struct ForwardCache<T> {
    layers: Vec<LayerCache<T>>,
}

impl<T> ForwardCache<T> {
    /// Spatial grid of the cached final feature stack.
    pub fn grid(&self) -> (usize, usize) {
        self.layers.last().map_or((0, 0), |l| (l.out_h, l.out_w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet<T> {
    arch: Architecture,
    params: ParamSet<T>,
}

fn im2col<T: Scalar>(x: &[T], h: usize, w: usize, spec: &ConvSpec, oh: usize, ow: usize, col: &mut [T]) {
    let (k, s, p) = (spec.kernel, spec.stride, spec.padding as isize);
    let plen = oh * ow;
    for ci in 0..spec.in_channels {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut col[row * plen..(row + 1) * plen];
                for oy in 0..oh {
                    let iy = (oy * s + ky) as isize - p;
                    let drow = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        drow.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in drow.iter_mut().enumerate() {
                        let ix = (ox * s + kx) as isize - p;
                        *d = if ix >= 0 && ix < w as isize { src[ix as usize] } else { T::zero() };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(col: &[T], h: usize, w: usize, spec: &ConvSpec, oh: usize, ow: usize, dx: &mut [T]) {
    let (k, s, p) = (spec.kernel, spec.stride, spec.padding as isize);
    let plen = oh * ow;
    for ci in 0..spec.in_channels {
        let plane = &mut dx[ci * h * w..(ci + 1) * h * w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &col[row * plen..(row + 1) * plen];
                for oy in 0..oh {
                    let iy = (oy * s + ky) as isize - p;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * s + kx) as isize - p;
                        if ix >= 0 && ix < w as isize {
                            plane[iy as usize * w + ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> ConvNet<T> {
    pub fn zeros(arch: Architecture) -> Self {
        let shapes = arch.param_shapes();
        let named: Vec<(&str, Vec<usize>)> = shapes.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
        Self { params: ParamSet::from_layout(&named), arch }
    }

    /// He-normal weights, zero biases, deterministic in `seed`.
    pub fn random(arch: Architecture, seed: u64) -> Self {
        let mut net = Self::zeros(arch);
        for (i, layer) in net.arch.layers.clone().iter().enumerate() {
            let std = (2.0 / layer.patch_len() as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            let mut rng = stream(seed, "conv-init", &[i as u64]);
            let range = net.params.layout[2 * i].range();
            for v in &mut net.params.data[range] {
                *v = T::lit(normal.sample(&mut rng));
            }
        }
        net
    }

    pub fn from_id(id: &str, seed: u64) -> Result<Self> {
        Ok(Self::random(Architecture::lookup(id)?, seed))
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn embedding_dim(&self) -> usize {
        self.arch.embedding_dim()
    }

    fn check_input(&self, x: &Planar<T>) -> Result<()> {
        let want = self.arch.layers[0].in_channels;
        if x.channels != want {
            return Err(Error::Shape(format!("input has {} channels, network expects {want}", x.channels)));
        }
        if x.height == 0 || x.width == 0 {
            return Err(Error::Shape("empty input image".into()));
        }
        Ok(())
    }

    fn run(&self, x: &Planar<T>, mut cache: Option<&mut ForwardCache<T>>, mut tap: Option<&mut Vec<Vec<T>>>) -> Result<Planar<T>> {
        self.check_input(x)?;
        let (mut h, mut w) = (x.height, x.width);
        let mut current = x.data.clone();
        for (i, spec) in self.arch.layers.iter().enumerate() {
            let (oh, ow) = (spec.out_dim(h), spec.out_dim(w));
            let plen = oh * ow;
            let klen = spec.patch_len();
            let mut col = vec![T::zero(); klen * plen];
            im2col(&current, h, w, spec, oh, ow, &mut col);
            let weight = self.params.segment(2 * i);
            let bias = self.params.segment(2 * i + 1);
            let mut out = vec![T::zero(); spec.out_channels * plen];
            for (o, row) in out.chunks_exact_mut(plen).enumerate() {
                row.fill(bias[o]);
            }
            crate::scalar::matmul_acc(spec.out_channels, klen, plen, weight, &col, &mut out);
            out.iter_mut().for_each(|v| *v = v.max(T::zero()));
            if let Some(t) = tap.as_deref_mut() {
                let inv = T::lit(1.0 / plen as f64);
                t.push(out.chunks_exact(plen).map(|r| r.iter().copied().sum::<T>() * inv).collect());
            }
            if let Some(c) = cache.as_deref_mut() {
                c.layers.push(LayerCache { in_h: h, in_w: w, out_h: oh, out_w: ow, col, out: out.clone() });
            }
            current = out;
            h = oh;
            w = ow;
        }
        Planar::from_vec(self.embedding_dim(), h, w, current)
    }

    /// Final `D×h×w` feature stack.
    pub fn features(&self, x: &Planar<T>) -> Result<Planar<T>> {
        self.run(x, None, None)
    }

    pub fn forward_train(&self, x: &Planar<T>) -> Result<(Planar<T>, ForwardCache<T>)> {
        let mut cache = ForwardCache { layers: Vec::with_capacity(self.arch.layers.len()) };
        let f = self.run(x, Some(&mut cache), None)?;
        Ok((f, cache))
    }

    /// Spatially averaged post-ReLU responses of every layer.
    pub fn layer_responses(&self, x: &Planar<T>) -> Result<Vec<Vec<T>>> {
        let mut taps = Vec::with_capacity(self.arch.layers.len());
        self.run(x, None, Some(&mut taps))?;
        Ok(taps)
    }

    /// Accumulates parameter gradients into `grads` given the gradient with
    /// respect to the final feature stack.
    pub fn backward(&self, cache: &ForwardCache<T>, d_features: &[T], grads: &mut [T]) {
        assert_eq!(grads.len(), self.params.len());
        let mut upstream = d_features.to_vec();
        for (i, spec) in self.arch.layers.iter().enumerate().rev() {
            let lc = &cache.layers[i];
            let plen = lc.out_h * lc.out_w;
            let klen = spec.patch_len();
            for (g, a) in upstream.iter_mut().zip(&lc.out) {
                if *a <= T::zero() {
                    *g = T::zero();
                }
            }
            let w_range = self.params.layout[2 * i].range();
            let b_range = self.params.layout[2 * i + 1].range();
            // dW += dZ · colᵀ
            T::gemm(
                spec.out_channels,
                plen,
                klen,
                T::one(),
                &upstream,
                plen as isize,
                1,
                &lc.col,
                1,
                plen as isize,
                T::one(),
                &mut grads[w_range.clone()],
                klen as isize,
                1,
            );
            for (gb, row) in grads[b_range].iter_mut().zip(upstream.chunks_exact(plen)) {
                *gb += row.iter().copied().sum::<T>();
            }
            if i == 0 {
                break;
            }
            // dcol = Wᵀ · dZ
            let mut dcol = vec![T::zero(); klen * plen];
            T::gemm(
                klen,
                spec.out_channels,
                plen,
                T::one(),
                &self.params.data[w_range],
                1,
                klen as isize,
                &upstream,
                plen as isize,
                1,
                T::zero(),
                &mut dcol,
                plen as isize,
                1,
            );
            let mut dx = vec![T::zero(); spec.in_channels * lc.in_h * lc.in_w];
            col2im(&dcol, lc.in_h, lc.in_w, spec, lc.out_h, lc.out_w, &mut dx);
            upstream = dx;
        }
    }
}

/// Global spatial average of a `D×h×w` stack.
pub fn spatial_mean<T: Scalar>(features: &Planar<T>) -> Vec<T> {
    let inv = T::lit(1.0 / features.plane_len() as f64);
    (0..features.channels).map(|c| features.plane(c).iter().copied().sum::<T>() * inv).collect()
}
