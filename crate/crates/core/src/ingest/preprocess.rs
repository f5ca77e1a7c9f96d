use image::{DynamicImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::resize_rgb;

/// Resize-then-crop geometry applied to every sampled frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Target length of the shorter image edge after bicubic resizing.
    pub minor_edge: u32,
    /// Side of the square crop.
    pub crop: u32,
    /// Rows the crop window is moved toward the top of the frame, to exclude
    /// burned-in timestamps along the bottom edge.
    pub shift_up: u32,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { minor_edge: 256, crop: 224, shift_up: 16 }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crop == 0 || self.minor_edge < self.crop {
            return Err(Error::Config(format!(
                "crop {} must be positive and no larger than the minor edge {}",
                self.crop, self.minor_edge
            )));
        }
        Ok(())
    }

    /// Size (width, height) after the minor-edge resize.
    pub fn resized_dims(&self, width: u32, height: u32) -> (u32, u32) {
        let m = self.minor_edge as u64;
        if width <= height {
            (self.minor_edge, (height as u64 * m / width as u64) as u32)
        } else {
            ((width as u64 * m / height as u64) as u32, self.minor_edge)
        }
    }

    /// Top-left corner (x, y) of the crop window within a resized frame.
    pub fn crop_origin(&self, resized_w: u32, resized_h: u32) -> (u32, u32) {
        let left = (resized_w - self.crop) / 2;
        let top = ((resized_h - self.crop) / 2).saturating_sub(self.shift_up);
        (left, top)
    }
}

/// Resizes the minor edge, then takes the upward-shifted center crop.
pub fn preprocess_frame(raw: &RgbImage, config: &PreprocessConfig) -> Result<RgbImage> {
    config.validate()?;
    if raw.width() == 0 || raw.height() == 0 {
        return Err(Error::Format("frame has an empty dimension".into()));
    }
    let (rw, rh) = config.resized_dims(raw.width(), raw.height());
    let resized = resize_rgb(raw, rw, rh)?;
    let (x0, y0) = config.crop_origin(rw, rh);
    Ok(image::imageops::crop_imm(&resized, x0, y0, config.crop, config.crop).to_image())
}

/// As [`preprocess_frame`], accepting any decoded image with exactly three channels.
pub fn preprocess_dynamic(raw: &DynamicImage, config: &PreprocessConfig) -> Result<RgbImage> {
    let channels = raw.color().channel_count();
    if channels != 3 {
        return Err(Error::Format(format!("expected a 3-channel image, found {channels} channels")));
    }
    preprocess_frame(&raw.to_rgb8(), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Rgb};

    #[test]
    fn vga_frame_geometry() {
        let cfg = PreprocessConfig::default();
        assert_eq!(cfg.resized_dims(640, 480), (341, 256));
        // Centered top would be 16; the 16-row shift moves it to 0.
        assert_eq!(cfg.crop_origin(341, 256), (58, 0));
        let out = preprocess_frame(&RgbImage::new(640, 480), &cfg).unwrap();
        assert_eq!(out.dimensions(), (224, 224));
    }

    #[test]
    fn square_256_crop_indices() {
        let cfg = PreprocessConfig::default();
        assert_eq!(cfg.resized_dims(256, 256), (256, 256));
        assert_eq!(cfg.crop_origin(256, 256), (16, 0));
        let raw = RgbImage::from_fn(256, 256, |x, y| Rgb([x as u8, y as u8, 0]));
        let out = preprocess_frame(&raw, &cfg).unwrap();
        // Rows 0..=223 and columns 16..=239 of the input survive untouched.
        assert_eq!(out.get_pixel(0, 0), &Rgb([16, 0, 0]));
        assert_eq!(out.get_pixel(223, 223), &Rgb([239, 223, 0]));
    }

    #[test]
    fn uniform_gray_survives() {
        let raw = RgbImage::from_pixel(224, 224, Rgb([97, 97, 97]));
        let out = preprocess_frame(&raw, &PreprocessConfig::default()).unwrap();
        assert!(out.pixels().all(|p| *p == Rgb([97, 97, 97])));
    }

    #[test]
    fn rejects_wrong_channel_count() {
        let gray = DynamicImage::ImageLuma8(GrayImage::new(10, 10));
        assert!(matches!(preprocess_dynamic(&gray, &PreprocessConfig::default()), Err(Error::Format(_))));
        assert!(preprocess_frame(&RgbImage::new(0, 5), &PreprocessConfig::default()).is_err());
    }

    #[test]
    fn custom_shift_is_honored() {
        let cfg = PreprocessConfig { shift_up: 0, ..Default::default() };
        assert_eq!(cfg.crop_origin(256, 256), (16, 16));
    }
}
