use std::path::Path;

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::resample_plane;
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Planar};

/// Below this standard deviation a map is treated as constant.
pub const DEGENERATE_STD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdSource {
    /// Standard deviation over the upsampled map (upsample, then normalize).
    Upsampled,
    /// Standard deviation over the raw grid.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CamConfig {
    pub output_size: usize,
    pub gain: f64,
    pub std_source: StdSource,
}

impl Default for CamConfig {
    fn default() -> Self {
        Self { output_size: 224, gain: 10.0, std_source: StdSource::Upsampled }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMap {
    /// `Σ_d w_d · feat_d` on the feature grid.
    pub raw: Matrix<f64>,
    /// `sigmoid(gain · m / std(m))` of the bicubically upsampled map, in [0, 1].
    pub upsampled: Matrix<f64>,
    pub class_id: u32,
    pub image_id: u64,
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Class-activation map for the class whose probe weights are `weights`.
pub fn cam<T: Scalar>(spatial: &Planar<T>, weights: &[f64], class_id: u32, image_id: u64, config: &CamConfig) -> Result<AttentionMap> {
    if weights.len() != spatial.channels {
        return Err(Error::Shape(format!("{} class weights for {} feature maps", weights.len(), spatial.channels)));
    }
    if config.output_size == 0 {
        return Err(Error::Parameter("attention map size must be positive".into()));
    }
    let (h, w) = (spatial.height, spatial.width);
    let mut raw = vec![0.0; h * w];
    for (d, &wd) in weights.iter().enumerate() {
        for (r, v) in raw.iter_mut().zip(spatial.plane(d)) {
            *r += wd * v.as_f64();
        }
    }
    let size = config.output_size;
    let mut up = resample_plane(&raw, h, w, size, size);
    let std = match config.std_source {
        StdSource::Upsampled => population_std(&up),
        StdSource::Raw => population_std(&raw),
    };
    if !(std >= DEGENERATE_STD) {
        up.iter_mut().for_each(|v| *v = 0.5);
    } else {
        up.iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-config.gain * *v / std).exp()));
    }
    Ok(AttentionMap { raw: Matrix::from_vec(h, w, raw)?, upsampled: Matrix::from_vec(size, size, up)?, class_id, image_id })
}

/// Pixelwise product of an image with a map of the same size.
pub fn mask_image<T: Scalar>(image: &Planar<T>, map: &Matrix<f64>) -> Result<Planar<T>> {
    if map.rows() != image.height || map.cols() != image.width {
        return Err(Error::Contract(format!(
            "{}×{} map cannot mask a {}×{} image",
            map.rows(),
            map.cols(),
            image.height,
            image.width
        )));
    }
    let plane = image.plane_len();
    let data = image.data.iter().enumerate().map(|(i, v)| T::lit(v.as_f64() * map.as_slice()[i % plane])).collect();
    Planar::from_vec(image.channels, image.height, image.width, data)
}

/// Writes the upsampled map as an 8-bit grayscale PNG.
pub fn save_attention_png(map: &AttentionMap, path: &Path) -> Result<()> {
    let m = &map.upsampled;
    let img = GrayImage::from_fn(m.cols() as u32, m.rows() as u32, |x, y| {
        Luma([(m.get(y as usize, x as usize).clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    img.save(path).map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_uniform_half() {
        let f = Planar::<f32>::filled(4, 7, 7, 1.0);
        let m = cam(&f, &[0.0; 4], 0, 0, &CamConfig::default()).unwrap();
        assert!(m.upsampled.as_slice().iter().all(|&v| v == 0.5));
        assert_eq!((m.upsampled.rows(), m.upsampled.cols()), (224, 224));
    }

    #[test]
    fn one_hot_cell_on_raw_std() {
        // one hot cell of 49: std = sqrt(48)/49, so the hot value maps to
        // sigmoid(10 · 49 / sqrt(48)) and the rest to sigmoid(0).
        let mut f = Planar::<f64>::zeros(1, 7, 7);
        f.data[24] = 1.0;
        let cfg = CamConfig { output_size: 7, std_source: StdSource::Raw, ..CamConfig::default() };
        let m = cam(&f, &[1.0], 0, 0, &cfg).unwrap();
        let hot = 1.0 / (1.0 + (-10.0 * 49.0 / 48f64.sqrt()).exp());
        assert!((m.upsampled.get(3, 3) - hot).abs() < 1e-12);
        assert_eq!(m.upsampled.get(0, 0), 0.5);
    }

    #[test]
    fn mask_checks_size() {
        let img = Planar::<f32>::filled(3, 4, 4, 0.8);
        let half = Matrix::from_vec(4, 4, vec![0.5; 16]).unwrap();
        assert!(mask_image(&img, &half).unwrap().data.iter().all(|&v| (v - 0.4).abs() < 1e-7));
        assert!(matches!(mask_image(&img, &Matrix::zeros(3, 4)), Err(Error::Contract(_))));
    }
}
