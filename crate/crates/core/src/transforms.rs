//! Photometric augmentation and per-channel normalization applied before
//! the learner sees a frame. Images are `[0, 1]` real tensors (`3×H×W`).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::resample_plane;
use crate::rng::{stream, StreamRng};
use crate::scalar::Scalar;
use crate::tensor::Planar;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub jitter_prob: f64,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
    pub grayscale_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            jitter_prob: 0.8,
            brightness: 0.8,
            contrast: 0.8,
            saturation: 0.8,
            hue: 0.2,
            grayscale_prob: 0.2,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("jitter_prob", self.jitter_prob)?;
        prob("grayscale_prob", self.grayscale_prob)?;
        for (name, s) in [("brightness", self.brightness), ("contrast", self.contrast), ("saturation", self.saturation)] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("{name} strength must be >= 0, got {s}")));
            }
        }
        if !(0.0..=0.5).contains(&self.hue) {
            return Err(Error::Config(format!("hue strength must lie in [0, 0.5], got {}", self.hue)));
        }
        Ok(())
    }
}

/// Geometric and blur augmentation used only by the contrastive objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContrastiveAugmentConfig {
    pub crop_scale_min: f64,
    pub flip_prob: f64,
    pub blur_prob: f64,
    pub blur_sigma: (f64, f64),
}

impl Default for ContrastiveAugmentConfig {
    fn default() -> Self {
        Self { crop_scale_min: 0.2, flip_prob: 0.5, blur_prob: 0.5, blur_sigma: (0.1, 2.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationConstants {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for NormalizationConstants {
    /// ImageNet channel statistics.
    fn default() -> Self {
        Self { mean: [0.485, 0.456, 0.406], std: [0.229, 0.224, 0.225] }
    }
}

impl NormalizationConstants {
    pub fn identity() -> Self {
        Self { mean: [0.0; 3], std: [1.0; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config(format!("normalization std must be positive, got {:?}", self.std)));
        }
        Ok(())
    }
}

fn check_rgb<T: Scalar>(image: &Planar<T>) -> Result<()> {
    if image.channels != 3 {
        return Err(Error::Shape(format!("expected 3 channels, found {}", image.channels)));
    }
    Ok(())
}

fn gray_plane<T: Scalar>(image: &Planar<T>) -> Vec<T> {
    let (r, g, b) = (image.plane(0), image.plane(1), image.plane(2));
    let w = LUMA.map(T::lit);
    (0..image.plane_len()).map(|i| w[0] * r[i] + w[1] * g[i] + w[2] * b[i]).collect()
}

fn clamp01<T: Scalar>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

pub fn adjust_brightness<T: Scalar>(image: &mut Planar<T>, factor: T) {
    image.data.iter_mut().for_each(|v| *v = clamp01(*v * factor));
}

/// Blends every pixel with the image's mean luminance.
pub fn adjust_contrast<T: Scalar>(image: &mut Planar<T>, factor: T) {
    let gray = gray_plane(image);
    let mean = gray.iter().copied().sum::<T>() / T::lit(gray.len().max(1) as f64);
    image.data.iter_mut().for_each(|v| *v = clamp01((*v - mean) * factor + mean));
}

/// Blends every pixel with its own luminance.
pub fn adjust_saturation<T: Scalar>(image: &mut Planar<T>, factor: T) {
    let gray = gray_plane(image);
    let n = image.plane_len();
    for c in 0..3 {
        let plane = &mut image.data[c * n..(c + 1) * n];
        for (v, g) in plane.iter_mut().zip(&gray) {
            *v = clamp01((*v - *g) * factor + *g);
        }
    }
}

pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let s = if max <= 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as i32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// Rotates hue by `shift` (fraction of the hue circle) with wraparound.
pub fn adjust_hue<T: Scalar>(image: &mut Planar<T>, shift: f64) {
    let n = image.plane_len();
    for i in 0..n {
        let (r, g, b) = (image.data[i].as_f64(), image.data[n + i].as_f64(), image.data[2 * n + i].as_f64());
        let (h, s, v) = rgb_to_hsv(r, g, b);
        if s == 0.0 {
            continue;
        }
        let (r, g, b) = hsv_to_rgb(h + shift, s, v);
        image.data[i] = T::lit(r);
        image.data[n + i] = T::lit(g);
        image.data[2 * n + i] = T::lit(b);
    }
}

fn factor(rng: &mut StreamRng, strength: f64) -> Option<f64> {
    if strength <= 0.0 {
        return None;
    }
    Some(rng.random_range((1.0 - strength).max(0.0)..=1.0 + strength))
}

/// With probability `jitter_prob`, applies brightness, contrast, saturation
/// and hue jitter in a random order.
pub fn color_jitter<T: Scalar>(image: &Planar<T>, config: &AugmentConfig, rng: &mut StreamRng) -> Result<Planar<T>> {
    config.validate()?;
    check_rgb(image)?;
    let mut out = image.clone();
    if !rng.random_bool(config.jitter_prob) {
        return Ok(out);
    }
    let mut order = [0usize, 1, 2, 3];
    order.shuffle(rng);
    for op in order {
        match op {
            0 => {
                if let Some(f) = factor(rng, config.brightness) {
                    adjust_brightness(&mut out, T::lit(f));
                }
            }
            1 => {
                if let Some(f) = factor(rng, config.contrast) {
                    adjust_contrast(&mut out, T::lit(f));
                }
            }
            2 => {
                if let Some(f) = factor(rng, config.saturation) {
                    adjust_saturation(&mut out, T::lit(f));
                }
            }
            _ => {
                if config.hue > 0.0 {
                    let shift = rng.random_range(-config.hue..=config.hue);
                    adjust_hue(&mut out, shift);
                }
            }
        }
    }
    Ok(out)
}

/// With probability `p`, replaces all channels by luminance.
pub fn random_grayscale<T: Scalar>(image: &Planar<T>, p: f64, rng: &mut StreamRng) -> Result<Planar<T>> {
    check_rgb(image)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("grayscale probability must lie in [0, 1], got {p}")));
    }
    let mut out = image.clone();
    if rng.random_bool(p) {
        let gray = gray_plane(image);
        let n = out.plane_len();
        for c in 0..3 {
            out.data[c * n..(c + 1) * n].copy_from_slice(&gray);
        }
    }
    Ok(out)
}

pub fn normalize<T: Scalar>(image: &Planar<T>, constants: &NormalizationConstants) -> Result<Planar<T>> {
    constants.validate()?;
    check_rgb(image)?;
    let mut out = image.clone();
    for c in 0..3 {
        let (m, s) = (T::lit(constants.mean[c]), T::lit(constants.std[c]));
        out.plane_mut(c).iter_mut().for_each(|v| *v = (*v - m) / s);
    }
    Ok(out)
}

/// Random-resized crop (area fraction in `[scale_min, 1]`, aspect in
/// `[3/4, 4/3]`) resampled back to the input size.
pub fn random_resized_crop<T: Scalar>(image: &Planar<T>, scale_min: f64, rng: &mut StreamRng) -> Planar<T> {
    let (h, w) = (image.height, image.width);
    let area = (h * w) as f64;
    for _ in 0..10 {
        let target = area * rng.random_range(scale_min.min(1.0)..=1.0);
        let log_ratio = rng.random_range((3.0f64 / 4.0).ln()..=(4.0f64 / 3.0).ln());
        let ratio = log_ratio.exp();
        let cw = (target * ratio).sqrt().round() as usize;
        let ch = (target / ratio).sqrt().round() as usize;
        if cw >= 1 && ch >= 1 && cw <= w && ch <= h {
            let y0 = rng.random_range(0..=h - ch);
            let x0 = rng.random_range(0..=w - cw);
            return crop_resize(image, y0, x0, ch, cw);
        }
    }
    image.clone()
}

fn crop_resize<T: Scalar>(image: &Planar<T>, y0: usize, x0: usize, ch: usize, cw: usize) -> Planar<T> {
    let mut data = Vec::with_capacity(image.data.len());
    for c in 0..image.channels {
        let plane = image.plane(c);
        let crop: Vec<T> = (0..ch)
            .flat_map(|y| plane[(y0 + y) * image.width + x0..(y0 + y) * image.width + x0 + cw].iter().copied())
            .collect();
        data.extend(resample_plane(&crop, ch, cw, image.height, image.width));
    }
    Planar { channels: image.channels, height: image.height, width: image.width, data }
}

pub fn horizontal_flip<T: Scalar>(image: &Planar<T>) -> Planar<T> {
    let mut out = image.clone();
    for c in 0..image.channels {
        for y in 0..image.height {
            let row = &mut out.data[(c * image.height + y) * image.width..(c * image.height + y + 1) * image.width];
            row.reverse();
        }
    }
    out
}

pub fn gaussian_blur<T: Scalar>(image: &Planar<T>, sigma: f64) -> Planar<T> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let kernel: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / total).collect();
    let (h, w) = (image.height as isize, image.width as isize);
    let clampi = |v: isize, hi: isize| v.clamp(0, hi - 1) as usize;
    let mut out = image.clone();
    for c in 0..image.channels {
        let src = image.plane(c);
        let mut tmp = vec![0.0f64; src.len()];
        for y in 0..h {
            for x in 0..w {
                tmp[(y * w + x) as usize] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, kv)| kv * src[(y * w) as usize + clampi(x + k as isize - radius, w)].as_f64())
                    .sum();
            }
        }
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                let v: f64 = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, kv)| kv * tmp[clampi(y + k as isize - radius, h) * w as usize + x as usize])
                    .sum();
                dst[(y * w + x) as usize] = T::lit(v);
            }
        }
    }
    out
}

/// Full per-view pipeline: optional contrastive geometry, color jitter,
/// grayscale, normalization. A pure function of its inputs and `rng`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ViewPipeline {
    pub augment: AugmentConfig,
    pub contrastive: Option<ContrastiveAugmentConfig>,
    pub normalization: NormalizationConstants,
}

impl ViewPipeline {
    pub fn apply<T: Scalar>(&self, image: &Planar<T>, rng: &mut StreamRng) -> Result<Planar<T>> {
        if !self.augment.enabled {
            return normalize(image, &self.normalization);
        }
        let mut img = image.clone();
        if let Some(geo) = &self.contrastive {
            img = random_resized_crop(&img, geo.crop_scale_min, rng);
            if rng.random_bool(geo.flip_prob) {
                img = horizontal_flip(&img);
            }
        }
        img = color_jitter(&img, &self.augment, rng)?;
        img = random_grayscale(&img, self.augment.grayscale_prob, rng)?;
        if let Some(geo) = &self.contrastive {
            if rng.random_bool(geo.blur_prob) {
                let sigma = rng.random_range(geo.blur_sigma.0..=geo.blur_sigma.1);
                img = gaussian_blur(&img, sigma);
            }
        }
        normalize(&img, &self.normalization)
    }

    /// Applies the pipeline with the stream for `(seed, epoch, frame_id, view)`.
    pub fn apply_keyed<T: Scalar>(
        &self,
        image: &Planar<T>,
        seed: u64,
        epoch: u64,
        frame_id: u64,
        view: u64,
    ) -> Result<Planar<T>> {
        let mut rng = stream(seed, "augment", &[epoch, frame_id, view]);
        self.apply(image, &mut rng)
    }
}

/// Additive Gaussian pixel noise clamped to `[0, 1]`.
pub fn add_noise<T: Scalar>(image: &mut Planar<T>, sigma: f64, rng: &mut StreamRng) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    image.data.iter_mut().for_each(|v| *v = clamp01(*v + T::lit(normal.sample(rng))));
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn random_image(seed: u64, h: usize, w: usize) -> Planar<f64> {
        let mut rng = stream(seed, "test-image", &[]);
        Planar::from_vec(3, h, w, (0..3 * h * w).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn zero_strength_is_identity() {
        let img = random_image(1, 8, 8);
        let cfg = AugmentConfig { jitter_prob: 1.0, brightness: 0.0, contrast: 0.0, saturation: 0.0, hue: 0.0, ..Default::default() };
        let out = color_jitter(&img, &cfg, &mut stream(3, "t", &[])).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn seeded_jitter_is_bit_identical() {
        let img = random_image(2, 8, 8);
        let cfg = AugmentConfig { jitter_prob: 1.0, ..Default::default() };
        let a = color_jitter(&img, &cfg, &mut stream(9, "t", &[])).unwrap();
        let b = color_jitter(&img, &cfg, &mut stream(9, "t", &[])).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, img);
    }

    #[test]
    fn saturation_fixes_achromatic_pixels() {
        let mut rng = stream(4, "t", &[]);
        let vals: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let data: Vec<f64> = vals.iter().chain(&vals).chain(&vals).copied().collect();
        let img = Planar::from_vec(3, 4, 4, data).unwrap();
        // Independent check: every pixel has zero HSV saturation before and after.
        let cfg = AugmentConfig { jitter_prob: 1.0, brightness: 0.0, contrast: 0.0, saturation: 0.8, hue: 0.0, ..Default::default() };
        let out = color_jitter(&img, &cfg, &mut rng).unwrap();
        for i in 0..16 {
            let (r, g, b) = (out.data[i], out.data[16 + i], out.data[32 + i]);
            assert!(rgb_to_hsv(r, g, b).1 < 1e-12);
            assert!((r - vals[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn grayscale_luminance() {
        let red = Planar::from_vec(3, 1, 1, vec![1.0f64, 0.0, 0.0]).unwrap();
        let out = random_grayscale(&red, 1.0, &mut stream(0, "t", &[])).unwrap();
        assert!(out.data.iter().all(|v| (*v - 0.299).abs() < 1e-15));
        let img = random_image(5, 4, 4);
        assert_eq!(random_grayscale(&img, 0.0, &mut stream(0, "t", &[])).unwrap(), img);
        let gray = Planar::from_vec(3, 1, 2, vec![0.3f64, 0.6, 0.3, 0.6, 0.3, 0.6]).unwrap();
        let again = random_grayscale(&gray, 1.0, &mut stream(0, "t", &[])).unwrap();
        for (a, b) in again.data.iter().zip(&gray.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_examples() {
        let consts = NormalizationConstants::default();
        let px = Planar::from_vec(3, 1, 1, vec![0.485f64, 0.456, 0.406]).unwrap();
        assert!(normalize(&px, &consts).unwrap().data.iter().all(|v| v.abs() < 1e-15));
        let one = Planar::from_vec(3, 1, 1, vec![1.0f64, 0.0, 0.0]).unwrap();
        let out = normalize(&one, &consts).unwrap();
        assert!((out.data[0] - 2.2489).abs() < 1e-4);
        let img = random_image(6, 3, 3);
        assert_eq!(normalize(&img, &NormalizationConstants::identity()).unwrap(), img);
        let bad = NormalizationConstants { std: [1.0, 0.0, 1.0], ..Default::default() };
        assert!(matches!(normalize(&img, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        assert!(AugmentConfig { hue: 0.6, ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { jitter_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { contrast: -0.1, ..Default::default() }.validate().is_err());
        assert!(AugmentConfig::default().validate().is_ok());
    }

    #[test]
    fn disabled_pipeline_is_plain_normalization() {
        let img = random_image(7, 6, 6);
        let p = ViewPipeline { augment: AugmentConfig::disabled(), ..Default::default() };
        assert_eq!(p.apply_keyed(&img, 1, 0, 5, 0).unwrap(), normalize(&img, &NormalizationConstants::default()).unwrap());
    }

    #[test]
    fn jitter_rate_within_binomial_bounds() {
        let img = random_image(8, 2, 2);
        let cfg = AugmentConfig { jitter_prob: 0.8, hue: 0.0, ..Default::default() };
        let mut rng = stream(10, "rate", &[]);
        let n = 10_000;
        let applied = (0..n).filter(|_| color_jitter(&img, &cfg, &mut rng).unwrap() != img).count();
        let sd = (n as f64 * 0.8 * 0.2).sqrt();
        assert!((applied as f64 - 8000.0).abs() <= 3.0 * sd, "applied {applied}");
    }

    proptest! {
        #[test]
        fn pipeline_preserves_shape_and_is_pure(seed in 0u64..1000, frame in 0u64..50, h in 2usize..10, w in 2usize..10) {
            let img = random_image(seed, h, w);
            let p = ViewPipeline { contrastive: Some(ContrastiveAugmentConfig::default()), ..Default::default() };
            let a = p.apply_keyed(&img, seed, 1, frame, 0).unwrap();
            let b = p.apply_keyed(&img, seed, 1, frame, 0).unwrap();
            prop_assert!(a.same_shape(&img));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn hsv_round_trip(r in 0.0f64..1.0, g in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (h, s, v) = rgb_to_hsv(r, g, b);
            let (r2, g2, b2) = hsv_to_rgb(h, s, v);
            prop_assert!((r - r2).abs() < 1e-9 && (g - g2).abs() < 1e-9 && (b - b2).abs() < 1e-9);
        }
    }
}
