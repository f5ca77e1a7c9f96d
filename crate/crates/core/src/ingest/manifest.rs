//! Line-delimited JSON manifests: one header line (fps, preprocessing),
//! then one record per frame in chronological order.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::preprocess::PreprocessConfig;
use crate::container::write_atomic;
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "headcam-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub frame_id: u64,
    pub recording_id: String,
    pub timestamp_s: f64,
    pub label: Option<String>,
    pub exemplar_id: Option<String>,
    pub shard_path: String,
    pub shard_offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    fps: f64,
    preprocessing: PreprocessConfig,
    frame_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub fps: f64,
    pub preprocessing: PreprocessConfig,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(fps: f64, preprocessing: PreprocessConfig) -> Self {
        Self { fps, preprocessing, entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks fps, strictly increasing frame ids, contiguous recordings and
    /// nondecreasing timestamps within each recording.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Format(format!("manifest fps must be > 0, got {}", self.fps)));
        }
        let mut finished: HashSet<&str> = HashSet::new();
        for (i, pair) in self.entries.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if b.frame_id <= a.frame_id {
                return Err(Error::Format(format!("frame ids not strictly increasing at line {}", i + 2)));
            }
            if a.recording_id == b.recording_id {
                if b.timestamp_s < a.timestamp_s {
                    return Err(Error::Format(format!(
                        "timestamps go backwards within recording `{}`",
                        a.recording_id
                    )));
                }
            } else {
                finished.insert(&a.recording_id);
                if finished.contains(b.recording_id.as_str()) {
                    return Err(Error::Format(format!(
                        "recording `{}` is not contiguous in the manifest",
                        b.recording_id
                    )));
                }
            }
        }
        if let Some(e) = self.entries.iter().find(|e| !(e.timestamp_s >= 0.0)) {
            return Err(Error::Format(format!("frame {} has a negative timestamp", e.frame_id)));
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let header = Header {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            fps: self.fps,
            preprocessing: self.preprocessing,
            frame_count: self.entries.len(),
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate()?;
        write_atomic(path, self.to_jsonl()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Format(format!("{}: empty manifest file", path.display())))?
            .map_err(|e| Error::io(path, e))?;
        let header: Header = serde_json::from_str(&first)?;
        if header.format != MANIFEST_FORMAT {
            return Err(Error::Format(format!("{}: not a manifest", path.display())));
        }
        if header.version != MANIFEST_VERSION {
            return Err(Error::Version { found: header.version.to_string(), supported: MANIFEST_VERSION });
        }
        let mut entries = Vec::with_capacity(header.frame_count);
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line)?);
        }
        if entries.len() != header.frame_count {
            return Err(Error::Format(format!(
                "{}: header announces {} frames, found {}",
                path.display(),
                header.frame_count,
                entries.len()
            )));
        }
        let m = Manifest { fps: header.fps, preprocessing: header.preprocessing, entries };
        m.validate()?;
        Ok(m)
    }

    /// Hex SHA-256 of the serialized manifest.
    pub fn checksum(&self) -> Result<String> {
        Ok(hex_digest(self.to_jsonl()?.as_bytes()))
    }

    /// Ordinal position of each recording's first frame, in manifest order.
    pub fn recording_starts(&self) -> Vec<usize> {
        let mut starts = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            if i == 0 || self.entries[i - 1].recording_id != e.recording_id {
                starts.push(i);
            }
        }
        starts
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
