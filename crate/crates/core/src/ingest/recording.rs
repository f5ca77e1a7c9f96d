use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A source video (or frame stream) before sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecording {
    pub id: String,
    pub uri: PathBuf,
    pub native_fps: f64,
    pub duration_s: f64,
    /// Whose camera this is ("S", "A", "Y", or a synthetic id).
    pub child_tag: String,
}

impl RawRecording {
    pub fn validate(&self) -> Result<()> {
        if !(self.native_fps > 0.0 && self.native_fps.is_finite()) {
            return Err(Error::Parameter(format!("recording `{}`: native fps must be > 0", self.id)));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Parameter(format!("recording `{}`: duration must be > 0", self.id)));
        }
        Ok(())
    }

    pub fn native_frame_count(&self) -> usize {
        ((self.duration_s * self.native_fps) + 1e-9).floor().max(1.0) as usize
    }
}

/// Random access to the native frames of one recording.
pub trait FrameSource {
    fn frame(&mut self, native_index: usize) -> Result<RgbImage>;
}

impl<F: FnMut(usize) -> Result<RgbImage>> FrameSource for F {
    fn frame(&mut self, native_index: usize) -> Result<RgbImage> {
        self(native_index)
    }
}

/// One sampled still, before preprocessing.
#[derive(Debug, Clone)]
pub struct SampledFrame {
    pub timestamp_s: f64,
    pub native_index: usize,
    pub image: RgbImage,
}

/// Sample times `k / target_fps` (k = 0, 1, ...) strictly inside the
/// recording, each mapped to the nearest native frame.
pub fn sample_schedule(recording: &RawRecording, target_fps: f64) -> Result<Vec<(f64, usize)>> {
    recording.validate()?;
    if !(target_fps > 0.0 && target_fps.is_finite()) {
        return Err(Error::Parameter(format!("target fps must be > 0, got {target_fps}")));
    }
    if target_fps > recording.native_fps {
        return Err(Error::Parameter(format!(
            "target fps {target_fps} exceeds native fps {} of recording `{}`",
            recording.native_fps, recording.id
        )));
    }
    let n_native = recording.native_frame_count();
    let count = (recording.duration_s * target_fps + 1e-9).floor() as usize;
    Ok((0..count)
        .map(|k| {
            let t = k as f64 / target_fps;
            let idx = ((k as f64 * recording.native_fps / target_fps).round() as usize).min(n_native - 1);
            (t, idx)
        })
        .collect())
}

/// Decodes `recording` at `target_fps` using nearest-native-frame selection.
pub fn decode_and_sample(
    recording: &RawRecording,
    target_fps: f64,
    source: &mut dyn FrameSource,
) -> Result<Vec<SampledFrame>> {
    sample_schedule(recording, target_fps)?
        .into_iter()
        .map(|(timestamp_s, native_index)| {
            let image = source.frame(native_index).map_err(|e| match e {
                e @ Error::Decode { .. } => e,
                other => Error::Decode { recording: recording.id.clone(), reason: other.to_string() },
            })?;
            Ok(SampledFrame { timestamp_s, native_index, image })
        })
        .collect()
}

/// A directory of still images, one per native frame, in file-name order.
pub struct ImageSequence {
    recording: String,
    files: Vec<PathBuf>,
}

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "bmp", "ppm"];

impl ImageSequence {
    pub fn open(recording: &RawRecording) -> Result<Self> {
        let decode_err = |reason: String| Error::Decode { recording: recording.id.clone(), reason };
        let entries = std::fs::read_dir(&recording.uri)
            .map_err(|e| decode_err(format!("{}: {e}", recording.uri.display())))?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| IMAGE_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(decode_err("directory contains no image frames".into()));
        }
        Ok(Self { recording: recording.id.clone(), files })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl FrameSource for ImageSequence {
    fn frame(&mut self, native_index: usize) -> Result<RgbImage> {
        let path = self.files.get(native_index).ok_or_else(|| Error::Decode {
            recording: self.recording.clone(),
            reason: format!("frame {native_index} beyond the {} available", self.files.len()),
        })?;
        let img = image::open(path).map_err(|e| Error::Decode {
            recording: self.recording.clone(),
            reason: format!("{}: {e}", path.display()),
        })?;
        Ok(img.to_rgb8())
    }
}

/// Video decoding through an external `ffmpeg` executable, streaming raw RGB.
pub struct FfmpegSource {
    recording: String,
    width: u32,
    height: u32,
    frames: Vec<Option<RgbImage>>,
}

impl FfmpegSource {
    /// Decodes every native frame listed in `wanted` (sorted, deduplicated).
    pub fn decode(recording: &RawRecording, wanted: &[usize]) -> Result<Self> {
        let fail = |reason: String| Error::Decode { recording: recording.id.clone(), reason };
        let (width, height) = probe_dimensions(&recording.uri).map_err(fail)?;
        let mut child = Command::new("ffmpeg")
            .args(["-v", "error", "-i"])
            .arg(&recording.uri)
            .args(["-f", "rawvideo", "-pix_fmt", "rgb24", "-vsync", "passthrough", "-"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| fail(format!("cannot run ffmpeg: {e}")))?;
        let mut stdout = child.stdout.take().expect("piped stdout");
        let frame_bytes = (width * height * 3) as usize;
        let last = wanted.iter().copied().max().unwrap_or(0);
        let mut frames = vec![None; last + 1];
        let mut buf = vec![0u8; frame_bytes];
        for (index, slot) in frames.iter_mut().enumerate() {
            if stdout.read_exact(&mut buf).is_err() {
                break;
            }
            if wanted.binary_search(&index).is_ok() {
                *slot = RgbImage::from_raw(width, height, buf.clone());
            }
        }
        drop(stdout);
        let _ = child.kill();
        let _ = child.wait();
        Ok(Self { recording: recording.id.clone(), width, height, frames })
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

impl FrameSource for FfmpegSource {
    fn frame(&mut self, native_index: usize) -> Result<RgbImage> {
        self.frames
            .get(native_index)
            .and_then(Clone::clone)
            .ok_or_else(|| Error::Decode {
                recording: self.recording.clone(),
                reason: format!("stream ended before native frame {native_index}"),
            })
    }
}

fn probe_dimensions(uri: &Path) -> std::result::Result<(u32, u32), String> {
    let out = Command::new("ffprobe")
        .args(["-v", "error", "-select_streams", "v:0", "-show_entries", "stream=width,height", "-of", "csv=p=0"])
        .arg(uri)
        .output()
        .map_err(|e| format!("cannot run ffprobe: {e}"))?;
    if !out.status.success() {
        return Err(format!("ffprobe failed on {}", uri.display()));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let mut parts = text.trim().split(',');
    let w = parts.next().and_then(|s| s.trim().parse().ok());
    let h = parts.next().and_then(|s| s.trim().parse().ok());
    match (w, h) {
        (Some(w), Some(h)) => Ok((w, h)),
        _ => Err(format!("unexpected ffprobe output `{}`", text.trim())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(fps: f64, dur: f64) -> RawRecording {
        RawRecording { id: "r".into(), uri: "/nonexistent".into(), native_fps: fps, duration_s: dur, child_tag: "S".into() }
    }

    #[test]
    fn one_fps_from_thirty() {
        let s = sample_schedule(&rec(30.0, 10.0), 1.0).unwrap();
        let times: Vec<f64> = s.iter().map(|p| p.0).collect();
        assert_eq!(times, (0..10).map(|t| t as f64).collect::<Vec<_>>());
        assert_eq!(s.iter().map(|p| p.1).collect::<Vec<_>>(), (0..10).map(|t| t * 30).collect::<Vec<_>>());
    }

    #[test]
    fn five_fps_over_one_segment() {
        assert_eq!(sample_schedule(&rec(30.0, 288.0), 5.0).unwrap().len(), 1440);
        assert_eq!(sample_schedule(&rec(25.0, 288.0), 5.0).unwrap().len(), 1440);
    }

    #[test]
    fn rejects_upsampling_and_nonpositive_rates() {
        assert!(matches!(sample_schedule(&rec(30.0, 5.0), 60.0), Err(Error::Parameter(_))));
        assert!(matches!(sample_schedule(&rec(30.0, 5.0), 0.0), Err(Error::Parameter(_))));
        assert!(matches!(sample_schedule(&rec(0.0, 5.0), 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn nearest_native_frame_for_non_integer_ratio() {
        // 25 fps native, 10 fps target: t = 0.1 -> 2.5 -> rounds to 3 (half away from zero).
        let s = sample_schedule(&rec(25.0, 1.0), 10.0).unwrap();
        assert_eq!(s.iter().map(|p| p.1).collect::<Vec<_>>(), vec![0, 3, 5, 8, 10, 13, 15, 18, 20, 23]);
    }

    #[test]
    fn unreadable_source_names_recording() {
        let r = rec(30.0, 2.0);
        let err = ImageSequence::open(&r).err().unwrap();
        assert!(err.to_string().contains("`r`"), "{err}");
        let mut failing = |_i: usize| -> Result<RgbImage> { Err(Error::Format("corrupt".into())) };
        let err = decode_and_sample(&r, 1.0, &mut failing).unwrap_err();
        assert!(matches!(err, Error::Decode { ref recording, .. } if recording == "r"));
    }

    #[test]
    fn missing_ffmpeg_or_file_is_a_decode_error() {
        let err = FfmpegSource::decode(&rec(30.0, 1.0), &[0]).err().unwrap();
        assert!(matches!(err, Error::Decode { .. }));
    }
}
