use std::path::Path;

use headcam_core::ingest::recording::sample_schedule;
use headcam_core::ingest::{
    curate_labels, ingest_recordings, parse_annotations, write_dataset, CurationRules, Dataset, PreprocessConfig, RawRecording,
    SynonymTable,
};
use headcam_core::Error;
use image::{Rgb, RgbImage};
use proptest::prelude::*;

const PREP: PreprocessConfig = PreprocessConfig { minor_edge: 20, crop: 16, shift_up: 2 };

/// `frames` stills of 30×24, each filled with a color encoding its index.
fn write_sequence(dir: &Path, frames: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for k in 0..frames {
        let img = RgbImage::from_pixel(30, 24, Rgb([(k * 8) as u8, 100, 255 - (k * 8) as u8]));
        img.save(dir.join(format!("frame_{k:04}.png"))).unwrap();
    }
}

fn recording(root: &Path, id: &str, frames: usize, native_fps: f64) -> RawRecording {
    let uri = root.join(id);
    write_sequence(&uri, frames);
    RawRecording { id: id.into(), uri, native_fps, duration_s: frames as f64 / native_fps, child_tag: "T".into() }
}

#[test]
fn ingest_round_trips_through_shards() {
    let tmp = tempfile::tempdir().unwrap();
    let recs = vec![recording(tmp.path(), "a", 20, 10.0), recording(tmp.path(), "b", 12, 10.0)];
    let frames = ingest_recordings(&recs, 5.0, &PREP, 2).unwrap();
    assert_eq!(frames.len(), 10 + 6);
    assert!(frames.iter().enumerate().all(|(i, f)| f.frame_id == i as u64));
    assert_eq!(frames[10].recording_id, "b");
    assert_eq!(frames[11].timestamp_s, 0.2);
    // Frame 1 of `a` at 5 fps is native frame 2.
    assert_eq!(frames[1].image.get_pixel(8, 8), &Rgb([16, 100, 239]));
    assert_eq!(frames[0].image.dimensions(), (16, 16));

    let serial = ingest_recordings(&recs, 5.0, &PREP, 1).unwrap();
    assert_eq!(serial, frames);

    let out = tmp.path().join("ds");
    let manifest = write_dataset(&out, 5.0, PREP, &frames, 4).unwrap();
    let ds = Dataset::open(&out).unwrap();
    assert_eq!(ds.manifest, manifest);
    assert_eq!(ds.manifest.checksum().unwrap(), manifest.checksum().unwrap());
    let back = ds.load_records().unwrap();
    assert_eq!(back, frames);
}

#[test]
fn unreadable_recordings_are_decode_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = RawRecording { id: "gone".into(), uri: tmp.path().join("nope"), native_fps: 10.0, duration_s: 1.0, child_tag: "T".into() };
    assert!(matches!(ingest_recordings(&[missing], 5.0, &PREP, 1), Err(Error::Decode { .. })));
    let short = RawRecording { duration_s: 5.0, ..recording(tmp.path(), "short", 3, 10.0) };
    assert!(matches!(ingest_recordings(&[short], 5.0, &PREP, 1), Err(Error::Decode { .. })));
}

#[test]
fn curation_keeps_frequent_labels_inside_intervals() {
    let tmp = tempfile::tempdir().unwrap();
    let recs = vec![recording(tmp.path(), "a", 40, 10.0)];
    let frames = ingest_recordings(&recs, 10.0, &PREP, 1).unwrap();
    let manifest = write_dataset(&tmp.path().join("ds"), 10.0, PREP, &frames, 100).unwrap();
    let cells = parse_annotations("# rec,start,end,labels\na,0,1.5,Ball|toy\na,1.5,3.0,  BALLS \na,3.0,4.0,cup\n").unwrap();
    let mut syn = SynonymTable::default();
    syn.insert("balls", "ball");
    let rules = CurationRules { min_frames: 11, top_k: 30, drop_top: 0 };
    let out = curate_labels(&manifest, &cells, &syn, rules).unwrap();
    assert_eq!(out.class_counts, vec![("ball".to_string(), 30)]);
    assert!(out.manifest.entries.iter().all(|e| e.label.as_deref() == Some("ball") && e.timestamp_s < 3.0));
    let dropped = curate_labels(&manifest, &cells, &syn, CurationRules { drop_top: 1, min_frames: 1, top_k: 30 }).unwrap();
    assert_eq!(dropped.class_counts, vec![("cup".to_string(), 10)]);
}

proptest! {
    #[test]
    fn schedule_is_inside_the_recording(native in 1.0f64..60.0, ratio in 0.01f64..=1.0, duration in 0.5f64..120.0) {
        let target = native * ratio;
        let rec = RawRecording { id: "r".into(), uri: "x".into(), native_fps: native, duration_s: duration, child_tag: "T".into() };
        let sched = sample_schedule(&rec, target).unwrap();
        prop_assert_eq!(sched.len(), (duration * target + 1e-9).floor() as usize);
        prop_assert!(sched.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1));
        prop_assert!(sched.iter().all(|&(t, i)| t < duration + 1e-9 && i < rec.native_frame_count()));
    }
}

#[test]
fn sampling_above_native_rate_is_rejected() {
    let rec = RawRecording { id: "r".into(), uri: "x".into(), native_fps: 10.0, duration_s: 2.0, child_tag: "T".into() };
    assert!(matches!(sample_schedule(&rec, 30.0), Err(Error::Parameter(_))));
}
