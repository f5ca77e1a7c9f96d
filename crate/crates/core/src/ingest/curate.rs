//! Turns annotation cells (time intervals with free-text labels) into a
//! clean labeled frame set.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, ManifestEntry};
use crate::error::{Error, Result};

/// Frames with `start_s <= t < end_s` in `recording_id` receive the cell's label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationCell {
    pub recording_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurationRules {
    pub min_frames: usize,
    pub top_k: usize,
    pub drop_top: usize,
}

impl Default for CurationRules {
    fn default() -> Self {
        Self { min_frames: 100, top_k: 30, drop_top: 2 }
    }
}

/// Maps normalized label variants to a canonical name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynonymTable {
    map: HashMap<String, String>,
}

pub fn normalize_label(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl SynonymTable {
    pub fn insert(&mut self, variant: &str, canonical: &str) {
        self.map.insert(normalize_label(variant), normalize_label(canonical));
    }

    /// Two columns per line (`variant<TAB>canonical` or comma separated); `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once('\t')
                .or_else(|| line.split_once(','))
                .ok_or_else(|| Error::Format(format!("synonym table line {}: expected two columns", n + 1)))?;
            table.insert(a, b);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Lowercase, trim, collapse whitespace, then resolve synonyms.
    pub fn canonical(&self, raw: &str) -> String {
        let norm = normalize_label(raw);
        self.map.get(&norm).cloned().unwrap_or(norm)
    }
}

/// Outcome of curation: surviving frames (labels set) plus class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledManifest {
    pub manifest: Manifest,
    /// Surviving classes, most frequent first.
    pub class_counts: Vec<(String, usize)>,
}

/// Applies first-label selection, normalization, top-k, drop-top and the
/// minimum-frame filter, in that order.
pub fn curate_labels(
    frames: &Manifest,
    cells: &[AnnotationCell],
    synonyms: &SynonymTable,
    rules: CurationRules,
) -> Result<LabeledManifest> {
    if rules.min_frames == 0 {
        return Err(Error::Parameter("min_frames must be at least 1".into()));
    }
    let mut by_recording: HashMap<&str, Vec<(f64, f64, String)>> = HashMap::new();
    for cell in cells {
        let Some(first) = cell.labels.first() else { continue };
        let label = synonyms.canonical(first);
        if label.is_empty() {
            continue;
        }
        by_recording.entry(cell.recording_id.as_str()).or_default().push((cell.start_s, cell.end_s, label));
    }

    let labeled: Vec<(ManifestEntry, String)> = frames
        .entries
        .iter()
        .filter_map(|e| {
            let cells = by_recording.get(e.recording_id.as_str())?;
            let (_, _, label) = cells.iter().find(|(s, t, _)| *s <= e.timestamp_s && e.timestamp_s < *t)?;
            Some((e.clone(), label.clone()))
        })
        .collect();

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for (_, l) in &labeled {
        *counts.entry(l.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().map(|(l, c)| (l.to_owned(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let survivors: Vec<(String, usize)> = ranked
        .into_iter()
        .take(rules.top_k)
        .skip(rules.drop_top)
        .filter(|(_, c)| *c >= rules.min_frames)
        .collect();
    let keep: HashMap<&str, ()> = survivors.iter().map(|(l, _)| (l.as_str(), ())).collect();

    let mut manifest = Manifest::new(frames.fps, frames.preprocessing);
    manifest.entries = labeled
        .iter()
        .filter(|(_, l)| keep.contains_key(l.as_str()))
        .map(|(e, l)| ManifestEntry { label: Some(l.clone()), ..e.clone() })
        .collect();
    Ok(LabeledManifest { manifest, class_counts: survivors })
}

/// Reads annotation cells from CSV lines `recording_id,start_s,end_s,label1|label2|...`.
pub fn parse_annotations(text: &str) -> Result<Vec<AnnotationCell>> {
    let mut cells = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.splitn(4, ',').collect();
        let bad = || Error::Format(format!("annotation line {}: expected `recording,start,end,labels`", n + 1));
        if parts.len() < 3 {
            return Err(bad());
        }
        let start_s: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let end_s: f64 = parts[2].trim().parse().map_err(|_| bad())?;
        let labels = parts
            .get(3)
            .map(|s| s.split('|').map(str::to_owned).filter(|l| !l.trim().is_empty()).collect())
            .unwrap_or_default();
        cells.push(AnnotationCell { recording_id: parts[0].trim().to_owned(), start_s, end_s, labels });
    }
    Ok(cells)
}
