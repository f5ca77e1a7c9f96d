//! Versioned binary container: a JSON metadata document plus named dense
//! blobs. Checkpoints and embedding sets are stored in this format.
//!
//! Layout (little-endian):
//! `b"HCAM"`, 4-byte kind tag, `u16` major, `u16` minor, `u64` metadata
//! length, metadata JSON, then the concatenated blob payload. The metadata
//! carries a `blobs` table giving each blob's name, dtype, shape, offset
//! and byte length within the payload.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"HCAM";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BlobInfo {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub len: u64,
}

#[derive(Debug, Clone)]
pub struct Container {
    pub kind: [u8; 4],
    pub major: u16,
    pub minor: u16,
    pub metadata: Value,
    blobs: Vec<BlobInfo>,
    payload: Vec<u8>,
}

impl Container {
    pub fn new(kind: [u8; 4], major: u16, minor: u16, metadata: Value) -> Self {
        Self { kind, major, minor, metadata, blobs: Vec::new(), payload: Vec::new() }
    }

    pub fn add_blob<T: Scalar>(&mut self, name: &str, shape: &[usize], values: &[T]) -> Result<()> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::Shape(format!(
                "blob `{name}` has {} values but shape {shape:?}",
                values.len()
            )));
        }
        if self.blobs.iter().any(|b| b.name == name) {
            return Err(Error::Contract(format!("duplicate blob `{name}`")));
        }
        let offset = self.payload.len() as u64;
        T::encode(values, &mut self.payload);
        self.blobs.push(BlobInfo {
            name: name.to_owned(),
            dtype: T::DTYPE.to_owned(),
            shape: shape.to_vec(),
            offset,
            len: self.payload.len() as u64 - offset,
        });
        Ok(())
    }

    pub fn blob_names(&self) -> impl Iterator<Item = &str> {
        self.blobs.iter().map(|b| b.name.as_str())
    }

    pub fn has_blob(&self, name: &str) -> bool {
        self.blobs.iter().any(|b| b.name == name)
    }

    pub fn blob<T: Scalar>(&self, name: &str) -> Result<(Vec<usize>, Vec<T>)> {
        let info = self
            .blobs
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Format(format!("missing blob `{name}`")))?;
        if info.dtype != T::DTYPE {
            return Err(Error::Format(format!(
                "blob `{name}` stores {} but {} was requested",
                info.dtype,
                T::DTYPE
            )));
        }
        let start = info.offset as usize;
        let end = start + info.len as usize;
        if end > self.payload.len() {
            return Err(Error::Format(format!("blob `{name}` runs past end of file")));
        }
        let values = T::decode(&self.payload[start..end])?;
        if values.len() != info.shape.iter().product::<usize>() {
            return Err(Error::Format(format!("blob `{name}` length disagrees with its shape")));
        }
        Ok((info.shape.clone(), values))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut meta = self.metadata.clone();
        match meta {
            Value::Object(ref mut map) => {
                map.insert("blobs".into(), serde_json::to_value(&self.blobs)?);
            }
            _ => return Err(Error::Contract("container metadata must be a JSON object".into())),
        }
        let meta_bytes = serde_json::to_vec(&meta)?;
        let mut out = Vec::with_capacity(24 + meta_bytes.len() + self.payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.kind);
        out.extend_from_slice(&self.major.to_le_bytes());
        out.extend_from_slice(&self.minor.to_le_bytes());
        out.extend_from_slice(&(meta_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta_bytes);
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    /// Parses a container, rejecting a different kind or an unknown major version.
    pub fn from_bytes(bytes: &[u8], kind: [u8; 4], supported_major: u16) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a container file (bad magic)".into()));
        }
        let found_kind: [u8; 4] = bytes[4..8].try_into().unwrap();
        if found_kind != kind {
            return Err(Error::Format(format!(
                "expected a `{}` container, found `{}`",
                String::from_utf8_lossy(&kind),
                String::from_utf8_lossy(&found_kind)
            )));
        }
        let major = u16::from_le_bytes(bytes[8..10].try_into().unwrap());
        let minor = u16::from_le_bytes(bytes[10..12].try_into().unwrap());
        if major != supported_major {
            return Err(Error::Version { found: format!("{major}.{minor}"), supported: supported_major as u32 });
        }
        let meta_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let meta_end = 20usize
            .checked_add(meta_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format("truncated metadata".into()))?;
        let mut metadata: Value = serde_json::from_slice(&bytes[20..meta_end])?;
        let blobs: Vec<BlobInfo> = match metadata.as_object_mut().and_then(|m| m.remove("blobs")) {
            Some(v) => serde_json::from_value(v)?,
            None => Vec::new(),
        };
        Ok(Self { kind, major, minor, metadata, blobs, payload: bytes[meta_end..].to_vec() })
    }

    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path, kind: [u8; 4], supported_major: u16) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, kind, supported_major)
    }
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = PathBuf::from(path);
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    tmp.set_file_name(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trip_and_version_gate() {
        let mut c = Container::new(*b"TEST", 1, 3, json!({"note": "x"}));
        c.add_blob::<f32>("w", &[2, 2], &[1.0, 2.0, 3.0, 4.5]).unwrap();
        c.add_blob::<f64>("b", &[1], &[0.1]).unwrap();
        let bytes = c.to_bytes().unwrap();
        let back = Container::from_bytes(&bytes, *b"TEST", 1).unwrap();
        assert_eq!(back.minor, 3);
        assert_eq!(back.metadata["note"], "x");
        assert_eq!(back.blob::<f32>("w").unwrap(), (vec![2, 2], vec![1.0, 2.0, 3.0, 4.5]));
        assert!(back.blob::<f32>("b").is_err());
        assert!(matches!(Container::from_bytes(&bytes, *b"TEST", 2), Err(Error::Version { .. })));
        assert!(Container::from_bytes(&bytes, *b"ELSE", 1).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut c = Container::new(*b"TEST", 1, 0, json!({}));
        assert!(c.add_blob::<f32>("w", &[3], &[1.0]).is_err());
    }
}
