//! Frame shards: fixed-capacity archives of deflate-compressed RGB frames
//! with a per-shard offset index for random access.
//!
//! Layout (little-endian): `b"HCSH"`, `u32` version, `u32` frame count,
//! `u32` width, `u32` height, then `count` index entries of (`u64` offset,
//! `u64` length) relative to the start of the data section, then the data.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;
use image::RgbImage;

use crate::container::write_atomic;
use crate::error::{Error, Result};

const SHARD_MAGIC: &[u8; 4] = b"HCSH";
const SHARD_VERSION: u32 = 1;
pub const DEFAULT_SHARD_SIZE: usize = 4096;

/// Location of a frame inside a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardSlot {
    /// Path relative to the dataset root.
    pub shard_path: String,
    pub shard_offset: u64,
}

/// Buffers frames and flushes a shard file every `shard_size` frames.
pub struct ShardWriter {
    root: PathBuf,
    shard_size: usize,
    next_shard: usize,
    pending: Vec<Vec<u8>>,
    dims: Option<(u32, u32)>,
}

impl ShardWriter {
    pub fn new(root: &Path, shard_size: usize) -> Result<Self> {
        if shard_size == 0 {
            return Err(Error::Config("shard size must be positive".into()));
        }
        Ok(Self { root: root.to_path_buf(), shard_size, next_shard: 0, pending: Vec::new(), dims: None })
    }

    fn shard_name(index: usize) -> String {
        format!("shards/shard-{index:05}.bin")
    }

    pub fn push(&mut self, frame: &RgbImage) -> Result<ShardSlot> {
        let dims = frame.dimensions();
        match self.dims {
            None => self.dims = Some(dims),
            Some(d) if d != dims => {
                return Err(Error::Shape(format!("frame is {dims:?}, shard holds {d:?} frames")));
            }
            _ => {}
        }
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::fast());
        enc.write_all(frame.as_raw()).expect("in-memory write");
        self.pending.push(enc.finish().expect("in-memory write"));
        let slot = ShardSlot {
            shard_path: Self::shard_name(self.next_shard),
            shard_offset: (self.pending.len() - 1) as u64,
        };
        if self.pending.len() == self.shard_size {
            self.flush()?;
        }
        Ok(slot)
    }

    fn flush(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let (w, h) = self.dims.unwrap_or((0, 0));
        let mut out = Vec::new();
        out.extend_from_slice(SHARD_MAGIC);
        for v in [SHARD_VERSION, self.pending.len() as u32, w, h] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut offset = 0u64;
        for blob in &self.pending {
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
            offset += blob.len() as u64;
        }
        for blob in &self.pending {
            out.extend_from_slice(blob);
        }
        write_atomic(&self.root.join(Self::shard_name(self.next_shard)), &out)?;
        self.pending.clear();
        self.next_shard += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize> {
        self.flush()?;
        Ok(self.next_shard)
    }
}

pub struct ShardReader {
    path: PathBuf,
    width: u32,
    height: u32,
    index: Vec<(u64, u64)>,
    data: Vec<u8>,
}

impl ShardReader {
    pub fn open(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |why: &str| Error::Format(format!("{}: {why}", path.display()));
        if bytes.len() < 20 || &bytes[..4] != SHARD_MAGIC {
            return Err(bad("not a frame shard"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        if word(0) != SHARD_VERSION {
            return Err(Error::Version { found: word(0).to_string(), supported: SHARD_VERSION });
        }
        let (count, width, height) = (word(1) as usize, word(2), word(3));
        let data_start = 20 + 16 * count;
        if bytes.len() < data_start {
            return Err(bad("truncated index"));
        }
        let index = (0..count)
            .map(|i| {
                let at = 20 + 16 * i;
                (
                    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()),
                    u64::from_le_bytes(bytes[at + 8..at + 16].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self { path: path.to_path_buf(), width, height, index, data: bytes[data_start..].to_vec() })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn read(&self, slot: u64) -> Result<RgbImage> {
        let bad = |why: String| Error::Format(format!("{}: {why}", self.path.display()));
        let &(off, len) = self
            .index
            .get(slot as usize)
            .ok_or_else(|| bad(format!("no frame at offset {slot}")))?;
        let end = (off + len) as usize;
        if end > self.data.len() {
            return Err(bad(format!("frame {slot} runs past end of shard")));
        }
        let mut raw = Vec::with_capacity((self.width * self.height * 3) as usize);
        ZlibDecoder::new(&self.data[off as usize..end])
            .read_to_end(&mut raw)
            .map_err(|e| bad(format!("frame {slot}: {e}")))?;
        RgbImage::from_raw(self.width, self.height, raw).ok_or_else(|| bad(format!("frame {slot} has wrong size")))
    }
}
