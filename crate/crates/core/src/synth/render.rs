//! Procedural rendering of flat shapes over striped backgrounds.

use std::f64::consts::PI;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    Disk,
    Ring,
    Square,
    SquareFrame,
    Triangle,
    Cross,
    Star,
    Crescent,
    HalfDisk,
    LShape,
    TShape,
    Bar,
}

impl Geometry {
    pub const ALL: [Geometry; 12] = [
        Geometry::Disk,
        Geometry::Ring,
        Geometry::Square,
        Geometry::SquareFrame,
        Geometry::Triangle,
        Geometry::Cross,
        Geometry::Star,
        Geometry::Crescent,
        Geometry::HalfDisk,
        Geometry::LShape,
        Geometry::TShape,
        Geometry::Bar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Geometry::Disk => "disk",
            Geometry::Ring => "ring",
            Geometry::Square => "square",
            Geometry::SquareFrame => "square-frame",
            Geometry::Triangle => "triangle",
            Geometry::Cross => "cross",
            Geometry::Star => "star",
            Geometry::Crescent => "crescent",
            Geometry::HalfDisk => "half-disk",
            Geometry::LShape => "l-shape",
            Geometry::TShape => "t-shape",
            Geometry::Bar => "bar",
        }
    }

    /// Whether the local point `(u, v)` (unit scale) lies inside the shape.
    /// `thickness` controls stroke width for outline-like geometries.
    pub fn contains(self, u: f64, v: f64, thickness: f64) -> bool {
        let r = (u * u + v * v).sqrt();
        let t = thickness;
        match self {
            Geometry::Disk => r <= 0.9,
            Geometry::Ring => (0.9 - t..=0.9).contains(&r),
            Geometry::Square => u.abs() <= 0.75 && v.abs() <= 0.75,
            Geometry::SquareFrame => (0.8 - t..=0.8).contains(&u.abs().max(v.abs())),
            Geometry::Triangle => {
                let verts = [(0.0, -0.9), (0.85, 0.65), (-0.85, 0.65)];
                (0..3).all(|i| {
                    let (ax, ay) = verts[i];
                    let (bx, by) = verts[(i + 1) % 3];
                    (bx - ax) * (v - ay) - (by - ay) * (u - ax) >= 0.0
                })
            }
            Geometry::Cross => {
                let h = t / 2.0 + 0.05;
                (u.abs() <= h && v.abs() <= 0.9) || (v.abs() <= h && u.abs() <= 0.9)
            }
            Geometry::Star => {
                let theta = v.atan2(u) + PI / 2.0;
                let sector = (theta.rem_euclid(2.0 * PI / 5.0)) / (2.0 * PI / 5.0);
                let tri = (2.0 * sector - 1.0).abs();
                r <= 0.38 + (0.95 - 0.38) * tri
            }
            Geometry::Crescent => r <= 0.9 && ((u - 0.4).powi(2) + (v + 0.1).powi(2)).sqrt() > 0.7,
            Geometry::HalfDisk => r <= 0.9 && v >= 0.0 - 0.1,
            Geometry::LShape => {
                let w = t + 0.1;
                (u >= -0.75 && u <= -0.75 + w && v.abs() <= 0.75) || (v <= 0.75 && v >= 0.75 - w && u.abs() <= 0.75)
            }
            Geometry::TShape => {
                let w = t + 0.1;
                (v >= -0.75 && v <= -0.75 + w && u.abs() <= 0.8) || (u.abs() <= w / 2.0 && v.abs() <= 0.75)
            }
            Geometry::Bar => u.abs() <= 0.9 && v.abs() <= t / 2.0 + 0.05,
        }
    }
}

/// Placement and appearance of one rendered shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapePose {
    /// Centre in image-relative coordinates, `[-1, 1]` on both axes.
    pub center: (f64, f64),
    /// Radius of the unit shape as a fraction of the half image side.
    pub scale: f64,
    pub rotation: f64,
    /// Horizontal stretch applied before rotation.
    pub aspect: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Background {
    pub base: [f64; 3],
    pub stripe_amplitude: f64,
    /// Cycles across the image.
    pub stripe_frequency: f64,
    pub stripe_angle: f64,
    pub stripe_phase: f64,
}

impl Background {
    pub fn plain(base: [f64; 3]) -> Self {
        Self { base, stripe_amplitude: 0.0, stripe_frequency: 1.0, stripe_angle: 0.0, stripe_phase: 0.0 }
    }

    fn at(&self, x: f64, y: f64) -> [f64; 3] {
        let s = self.stripe_amplitude
            * (PI * self.stripe_frequency * (x * self.stripe_angle.cos() + y * self.stripe_angle.sin()) + self.stripe_phase).sin();
        self.base.map(|c| c + s)
    }
}

const SUPERSAMPLE: usize = 3;

/// Renders into linear RGB values (not yet clamped) of shape `size×size×3`.
pub fn render_values(
    size: usize,
    geometry: Geometry,
    pose: &ShapePose,
    color: [f64; 3],
    background: &Background,
) -> Vec<[f64; 3]> {
    let (sin, cos) = pose.rotation.sin_cos();
    let mut out = vec![[0.0; 3]; size * size];
    let inv = 1.0 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
    for py in 0..size {
        for px in 0..size {
            let mut acc = [0.0; 3];
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let x = ((px as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64) / size as f64) * 2.0 - 1.0;
                    let y = ((py as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64) / size as f64) * 2.0 - 1.0;
                    let (dx, dy) = ((x - pose.center.0) / pose.scale, (y - pose.center.1) / pose.scale);
                    let u = (cos * dx + sin * dy) / pose.aspect;
                    let v = -sin * dx + cos * dy;
                    let c = if geometry.contains(u, v, pose.thickness) { color } else { background.at(x, y) };
                    for k in 0..3 {
                        acc[k] += c[k];
                    }
                }
            }
            out[py * size + px] = acc.map(|a| a * inv);
        }
    }
    out
}

pub fn to_image(size: usize, values: &[[f64; 3]]) -> RgbImage {
    RgbImage::from_fn(size as u32, size as u32, |x, y| {
        let v = values[y as usize * size + x as usize];
        Rgb(v.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
    })
}

/// HSV (all components in `[0, 1]`) to RGB.
pub fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let (r, g, b) = crate::transforms::hsv_to_rgb(h.rem_euclid(1.0), s.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
    [r, g, b]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centered(scale: f64) -> ShapePose {
        ShapePose { center: (0.0, 0.0), scale, rotation: 0.0, aspect: 1.0, thickness: 0.35 }
    }

    #[test]
    fn geometries_render_distinct_masks() {
        let bg = Background::plain([0.0; 3]);
        let masks: Vec<Vec<bool>> = Geometry::ALL
            .iter()
            .map(|g| render_values(32, *g, &centered(0.8), [1.0; 3], &bg).iter().map(|p| p[0] > 0.5).collect())
            .collect();
        for (i, m) in masks.iter().enumerate() {
            let area = m.iter().filter(|&&b| b).count();
            assert!(area > 40 && area < 1000, "{:?} area {area}", Geometry::ALL[i]);
            for (j, other) in masks.iter().enumerate().skip(i + 1) {
                let diff = m.iter().zip(other).filter(|(a, b)| a != b).count();
                assert!(diff > 20, "{:?} vs {:?} differ in only {diff} pixels", Geometry::ALL[i], Geometry::ALL[j]);
            }
        }
    }

    #[test]
    fn plain_background_is_uniform() {
        let bg = Background::plain([0.25, 0.5, 0.75]);
        let img = to_image(8, &render_values(8, Geometry::Disk, &centered(0.01), [1.0; 3], &bg));
        assert!(img.pixels().all(|p| p.0 == [64, 128, 191]));
    }
}
