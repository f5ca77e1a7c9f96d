use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Planar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HogConfig {
    pub orientations: usize,
    pub cell_px: usize,
    pub block_cells: usize,
    /// Bin over [0°, 360°) instead of [0°, 180°).
    pub signed_gradients: bool,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self { orientations: 9, cell_px: 16, block_cells: 3, signed_gradients: false }
    }
}

impl HogConfig {
    pub fn validate(&self) -> Result<()> {
        if self.orientations == 0 || self.cell_px == 0 || self.block_cells == 0 {
            return Err(Error::Parameter("HOG orientations, cell size and block size must be positive".into()));
        }
        Ok(())
    }

    /// Cells along an edge of `n` pixels (trailing pixels are dropped).
    pub fn cells(&self, n: usize) -> usize {
        n / self.cell_px
    }

    /// Descriptor length for an `height × width` image.
    pub fn feature_len(&self, height: usize, width: usize) -> Result<usize> {
        self.validate()?;
        let min = self.block_cells * self.cell_px;
        if height < min || width < min {
            return Err(Error::Parameter(format!("image {height}×{width} is smaller than one {min}×{min} HOG block")));
        }
        let blocks = |n: usize| self.cells(n) - self.block_cells + 1;
        Ok(blocks(height) * blocks(width) * self.block_cells * self.block_cells * self.orientations)
    }
}

/// Per-pixel gradient `(d_row, d_col)` from `[-1, 0, 1]` differences, taken
/// from the channel with the largest magnitude; border pixels are zero.
fn gradients<T: Scalar>(image: &Planar<T>) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = (image.height, image.width);
    let mut gr = vec![0.0; h * w];
    let mut gc = vec![0.0; h * w];
    let mut best = vec![-1.0f64; h * w];
    for c in 0..image.channels {
        let p = image.plane(c);
        for y in 0..h {
            for x in 0..w {
                let r = if y > 0 && y + 1 < h { p[(y + 1) * w + x].as_f64() - p[(y - 1) * w + x].as_f64() } else { 0.0 };
                let q = if x > 0 && x + 1 < w { p[y * w + x + 1].as_f64() - p[y * w + x - 1].as_f64() } else { 0.0 };
                let m = r.hypot(q);
                let i = y * w + x;
                if m > best[i] {
                    best[i] = m;
                    gr[i] = r;
                    gc[i] = q;
                }
            }
        }
    }
    (gr, gc)
}

/// Cell histograms as `[cell_row][cell_col][orientation]`, each the summed
/// gradient magnitude per bin divided by the cell area.
pub fn cell_histograms<T: Scalar>(image: &Planar<T>, config: &HogConfig) -> Result<Vec<f64>> {
    config.feature_len(image.height, image.width)?;
    let (gr, gc) = gradients(image);
    let (cr, cc, o, px) = (config.cells(image.height), config.cells(image.width), config.orientations, config.cell_px);
    let span = if config.signed_gradients { 360.0 } else { 180.0 };
    let mut hist = vec![0.0; cr * cc * o];
    for y in 0..cr * px {
        for x in 0..cc * px {
            let i = y * image.width + x;
            let m = gr[i].hypot(gc[i]);
            if m == 0.0 {
                continue;
            }
            let angle = gr[i].atan2(gc[i]).to_degrees().rem_euclid(span);
            let bin = ((angle / (span / o as f64)) as usize).min(o - 1);
            hist[((y / px) * cc + x / px) * o + bin] += m;
        }
    }
    let area = (px * px) as f64;
    hist.iter_mut().for_each(|v| *v /= area);
    Ok(hist)
}

/// Flattened as `(block_row, block_col, cell_row, cell_col, orientation)`;
/// each block is L2-normalized, all-zero blocks stay zero.
pub fn hog_features<T: Scalar>(image: &Planar<T>, config: &HogConfig) -> Result<Vec<f64>> {
    let len = config.feature_len(image.height, image.width)?;
    let hist = cell_histograms(image, config)?;
    let (cr, cc, o, b) = (config.cells(image.height), config.cells(image.width), config.orientations, config.block_cells);
    let mut out = Vec::with_capacity(len);
    for br in 0..=cr - b {
        for bc in 0..=cc - b {
            let start = out.len();
            for r in br..br + b {
                for c in bc..bc + b {
                    out.extend_from_slice(&hist[(r * cc + c) * o..(r * cc + c + 1) * o]);
                }
            }
            let block = &mut out[start..];
            let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                block.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
    debug_assert_eq!(out.len(), len);
    Ok(out)
}

/// Descriptors of equally sized images, one row each.
pub fn hog_matrix<T: Scalar>(images: &[Planar<T>], config: &HogConfig) -> Result<Matrix<T>> {
    let Some(first) = images.first() else {
        return Ok(Matrix::zeros(0, 0));
    };
    let d = config.feature_len(first.height, first.width)?;
    if images.iter().any(|i| !i.same_shape(first)) {
        return Err(Error::Shape("HOG batch images differ in size".into()));
    }
    let rows: Vec<Vec<f64>> = images.par_iter().map(|img| hog_features(img, config)).collect::<Result<_>>()?;
    Matrix::from_vec(images.len(), d, rows.into_iter().flatten().map(T::lit).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_is_all_zero() {
        let img = Planar::<f64>::filled(3, 64, 48, 0.4);
        let f = hog_features(&img, &HogConfig::default()).unwrap();
        assert_eq!(f.len(), HogConfig::default().feature_len(64, 48).unwrap());
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_edge_fills_zero_degree_bin() {
        let mut img = Planar::<f64>::zeros(1, 48, 48);
        for y in 0..48 {
            for x in 24..48 {
                img.data[y * 48 + x] = 1.0;
            }
        }
        let cfg = HogConfig::default();
        let h = cell_histograms(&img, &cfg).unwrap();
        for r in 0..3 {
            let cell = &h[(r * 3 + 1) * 9..(r * 3 + 2) * 9];
            assert!(cell[0] > 0.0);
            assert!(cell[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn too_small_is_rejected() {
        let img = Planar::<f32>::zeros(3, 40, 64);
        assert!(matches!(hog_features(&img, &HogConfig::default()), Err(Error::Parameter(_))));
    }
}
