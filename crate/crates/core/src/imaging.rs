//! Separable bicubic resampling (Keys kernel, `a = -0.5`), antialiased when
//! downscaling. Used both for frame preprocessing and for upsampling
//! class-activation maps.

use image::RgbImage;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Planar;

const BICUBIC_A: f64 = -0.5;
const BICUBIC_SUPPORT: f64 = 2.0;

fn bicubic(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        ((BICUBIC_A + 2.0) * x - (BICUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        (((x - 5.0) * x + 8.0) * x - 4.0) * BICUBIC_A
    } else {
        0.0
    }
}

/// Per-output-sample (first input index, normalized weights).
struct Taps {
    start: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

fn taps(in_len: usize, out_len: usize) -> Taps {
    let scale = in_len as f64 / out_len as f64;
    let filterscale = scale.max(1.0);
    let support = BICUBIC_SUPPORT * filterscale;
    let mut start = Vec::with_capacity(out_len);
    let mut weights = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = (i as f64 + 0.5) * scale;
        let lo = ((center - support + 0.5).floor().max(0.0)) as usize;
        let hi = ((center + support + 0.5).floor() as usize).min(in_len);
        let mut w: Vec<f64> = (lo..hi)
            .map(|x| bicubic((x as f64 - center + 0.5) / filterscale))
            .collect();
        let total: f64 = w.iter().sum();
        if total != 0.0 {
            w.iter_mut().for_each(|v| *v /= total);
        }
        start.push(lo);
        weights.push(w);
    }
    Taps { start, weights }
}

/// Resamples one `in_h × in_w` plane to `out_h × out_w`.
pub fn resample_plane<T: Scalar>(
    src: &[T],
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<T> {
    assert_eq!(src.len(), in_h * in_w);
    let horizontal = if in_w == out_w {
        src.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
    } else {
        let tx = taps(in_w, out_w);
        let mut tmp = vec![0.0; in_h * out_w];
        for y in 0..in_h {
            let row = &src[y * in_w..(y + 1) * in_w];
            for x in 0..out_w {
                let s = tx.start[x];
                tmp[y * out_w + x] =
                    tx.weights[x].iter().enumerate().map(|(j, w)| w * row[s + j].as_f64()).sum();
            }
        }
        tmp
    };
    if in_h == out_h {
        return horizontal.into_iter().map(T::lit).collect();
    }
    let ty = taps(in_h, out_h);
    let mut out = vec![T::zero(); out_h * out_w];
    for y in 0..out_h {
        let s = ty.start[y];
        for x in 0..out_w {
            let v: f64 = ty.weights[y]
                .iter()
                .enumerate()
                .map(|(j, w)| w * horizontal[(s + j) * out_w + x])
                .sum();
            out[y * out_w + x] = T::lit(v);
        }
    }
    out
}

pub fn resize_planar<T: Scalar>(img: &Planar<T>, out_h: usize, out_w: usize) -> Planar<T> {
    let mut data = Vec::with_capacity(img.channels * out_h * out_w);
    for c in 0..img.channels {
        data.extend(resample_plane(img.plane(c), img.height, img.width, out_h, out_w));
    }
    Planar { channels: img.channels, height: out_h, width: out_w, data }
}

/// Bicubic resize of an 8-bit RGB image; results are rounded and clamped to `0..=255`.
pub fn resize_rgb(img: &RgbImage, out_w: u32, out_h: u32) -> Result<RgbImage> {
    if out_w == 0 || out_h == 0 || img.width() == 0 || img.height() == 0 {
        return Err(Error::Format("cannot resize to or from an empty image".into()));
    }
    if img.width() == out_w && img.height() == out_h {
        return Ok(img.clone());
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut planes = Planar::<f32>::zeros(3, h, w);
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            planes.data[(c * h + y as usize) * w + x as usize] = px[c] as f32;
        }
    }
    let resized = resize_planar(&planes, out_h as usize, out_w as usize);
    let (ow, oh) = (out_w as usize, out_h as usize);
    let mut out = RgbImage::new(out_w, out_h);
    for (x, y, px) in out.enumerate_pixels_mut() {
        for c in 0..3 {
            let v = resized.data[(c * oh + y as usize) * ow + x as usize];
            px[c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}
