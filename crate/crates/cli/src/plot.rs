//! PNG figures for a run directory. The bitmap backend is built without a
//! font engine, so axis text does not render; every figure has a CSV
//! sidecar with the plotted numbers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use headcam_core::analysis::read_curve_csv;
use headcam_core::container::write_atomic;
use headcam_core::ssl::train::LOG_FILE;
use headcam_core::ssl::LogRecord;
use headcam_core::{Error, Result};
use plotters::prelude::*;

use crate::commands::{CSI_TABLE, PCA_TABLE, SWEEP_TABLE};

const SIZE: (u32, u32) = (640, 480);
const PALETTE: [RGBColor; 4] = [RGBColor(31, 119, 180), RGBColor(214, 39, 40), RGBColor(44, 160, 44), RGBColor(148, 103, 189)];

fn plot_error<E: std::fmt::Display>(e: E) -> Error {
    Error::Format(format!("plotting failed: {e}"))
}

fn save_png(buf: Vec<u8>, path: &Path) -> Result<()> {
    let img = image::RgbImage::from_raw(SIZE.0, SIZE.1, buf).ok_or_else(|| Error::Shape("plot buffer size".into()))?;
    img.save(path)?;
    Ok(())
}

fn bounds(points: impl Iterator<Item = (f64, f64)>) -> ((f64, f64), (f64, f64)) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
    (pad(x0, x1), pad(y0, y1))
}

/// Line chart of one or more `(x, y)` series.
pub fn line_chart(path: &Path, series: &[Vec<(f64, f64)>]) -> Result<()> {
    let mut buf = vec![0u8; (SIZE.0 * SIZE.1 * 3) as usize];
    {
        let root = BitMapBackend::with_buffer(&mut buf, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_error)?;
        let ((x0, x1), (y0, y1)) = bounds(series.iter().flatten().copied());
        let mut chart = ChartBuilder::on(&root)
            .margin(20)
            .x_label_area_size(20)
            .y_label_area_size(20)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(plot_error)?;
        chart.configure_mesh().disable_x_mesh().x_labels(0).y_labels(0).draw().map_err(plot_error)?;
        for (k, s) in series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            chart.draw_series(LineSeries::new(s.iter().copied(), color.stroke_width(2))).map_err(plot_error)?;
        }
        root.present().map_err(plot_error)?;
    }
    save_png(buf, path)
}

/// Counts of `values` in `bins` equal-width bins over `[lo, hi]`.
pub fn bin_counts(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in values {
        if v.is_finite() && v >= lo && v <= hi {
            let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
    }
    counts
}

pub fn histogram_chart(path: &Path, counts: &[usize]) -> Result<()> {
    let mut buf = vec![0u8; (SIZE.0 * SIZE.1 * 3) as usize];
    {
        let root = BitMapBackend::with_buffer(&mut buf, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_error)?;
        let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let mut chart = ChartBuilder::on(&root)
            .margin(20)
            .x_label_area_size(20)
            .y_label_area_size(20)
            .build_cartesian_2d(0.0..counts.len() as f64, 0.0..top * 1.1)
            .map_err(plot_error)?;
        chart.configure_mesh().disable_x_mesh().x_labels(0).y_labels(0).draw().map_err(plot_error)?;
        chart
            .draw_series(
                counts
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| Rectangle::new([(i as f64 + 0.05, 0.0), (i as f64 + 0.95, c as f64)], PALETTE[0].filled())),
            )
            .map_err(plot_error)?;
        root.present().map_err(plot_error)?;
    }
    save_png(buf, path)
}

fn read_text(path: &Path) -> Result<Option<String>> {
    match std::fs::read_to_string(path) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn sidecar(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut out = format!("{header}\n");
    for r in rows {
        let _ = writeln!(out, "{r}");
    }
    write_atomic(path, out.as_bytes())
}

/// Draws every figure whose source table exists in `run_dir`, into
/// `run_dir/report`. Returns the PNGs written.
pub fn report(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let out = run_dir.join("report");
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut written = Vec::new();

    if let Some(text) = read_text(&run_dir.join(LOG_FILE))? {
        let records: Vec<LogRecord> =
            text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<std::result::Result<_, _>>()?;
        let loss: Vec<(f64, f64)> = records.iter().map(|r| (r.step as f64, r.loss)).collect();
        let acc: Vec<(f64, f64)> = records.iter().map(|r| (r.step as f64, r.accuracy)).collect();
        let png = out.join("loss.png");
        line_chart(&png, &[loss])?;
        line_chart(&out.join("accuracy.png"), &[acc])?;
        sidecar(&out.join("loss.csv"), "step,epoch,loss,accuracy", records.iter().map(|r| format!("{},{},{},{}", r.step, r.epoch, r.loss, r.accuracy)))?;
        written.push(png);
        written.push(out.join("accuracy.png"));
    }

    if let Some(text) = read_text(&run_dir.join(PCA_TABLE))? {
        let curve = read_curve_csv(&text)?;
        let png = out.join("pca.png");
        line_chart(&png, &[curve.clone()])?;
        sidecar(&out.join("pca.csv"), "components,explained", curve.iter().map(|(k, v)| format!("{k},{v}")))?;
        written.push(png);
    }

    if let Some(text) = read_text(&run_dir.join(CSI_TABLE))? {
        let values: Vec<f64> = read_curve_csv(&text)?.into_iter().map(|(_, v)| v).collect();
        let bins = 20;
        let counts = bin_counts(&values, 0.0, 1.0, bins);
        let png = out.join("csi_hist.png");
        histogram_chart(&png, &counts)?;
        sidecar(
            &out.join("csi_hist.csv"),
            "bin_lo,bin_hi,count",
            counts.iter().enumerate().map(|(i, c)| format!("{},{},{c}", i as f64 / bins as f64, (i + 1) as f64 / bins as f64)),
        )?;
        written.push(png);
    }

    if let Some(text) = read_text(&run_dir.join(SWEEP_TABLE))? {
        // One line per augment setting, probe accuracy against segment length.
        let mut on = Vec::new();
        let mut off = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let parsed = (f.get(1).and_then(|v| v.parse::<f64>().ok()), f.get(2), f.get(3).and_then(|v| v.parse::<f64>().ok()));
            match parsed {
                (Some(seg), Some(&"true"), Some(top1)) => on.push((seg, top1)),
                (Some(seg), Some(_), Some(top1)) => off.push((seg, top1)),
                _ => return Err(Error::Format(format!("malformed sweep row `{line}`"))),
            }
        }
        on.sort_by(|a, b| a.0.total_cmp(&b.0));
        off.sort_by(|a, b| a.0.total_cmp(&b.0));
        let png = out.join("sweep.png");
        line_chart(&png, &[on, off])?;
        std::fs::copy(run_dir.join(SWEEP_TABLE), out.join("sweep.csv")).map_err(|e| Error::io(run_dir.join(SWEEP_TABLE), e))?;
        written.push(png);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_cover_closed_range() {
        assert_eq!(bin_counts(&[0.0, 0.5, 1.0, 1.5, f64::NAN], 0.0, 1.0, 4), vec![1, 0, 1, 1]);
    }
}
