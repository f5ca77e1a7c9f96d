use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::cam::{save_attention_png, AttentionMap};
use crate::container::write_atomic;
use crate::error::{Error, Result};

/// `layer,feature,csi` rows.
pub fn csi_csv(layers: &[(String, Vec<f64>)]) -> String {
    let mut out = String::from("layer,feature,csi\n");
    for (layer, values) in layers {
        for (f, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{layer},{f},{v:.17e}");
        }
    }
    out
}

/// `components,explained` rows.
pub fn pca_csv(curve: &[f64]) -> String {
    let mut out = String::from("components,explained\n");
    for (k, v) in curve.iter().enumerate() {
        let _ = writeln!(out, "{},{v:.17e}", k + 1);
    }
    out
}

pub fn read_curve_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut parts = l.split(',').rev();
            let y = parts.next().and_then(|v| v.trim().parse().ok());
            let x = parts.next().and_then(|v| v.trim().parse().ok());
            match (x, y) {
                (Some(x), Some(y)) => Ok((x, y)),
                _ => Err(Error::Format(format!("malformed table row `{l}`"))),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct MapEntry<'a> {
    file: String,
    image_id: u64,
    class_id: u32,
    class_name: Option<&'a str>,
}

/// One PNG per map plus `index.json` describing them.
pub fn export_attention_maps(maps: &[AttentionMap], class_names: &[String], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = Vec::with_capacity(maps.len());
    for m in maps {
        let file = format!("cam_{:06}_c{}.png", m.image_id, m.class_id);
        save_attention_png(m, &dir.join(&file))?;
        index.push(MapEntry { file, image_id: m.image_id, class_id: m.class_id, class_name: class_names.get(m.class_id as usize).map(String::as_str) });
    }
    write_atomic(&dir.join("index.json"), serde_json::to_string_pretty(&index)?.as_bytes())
}
