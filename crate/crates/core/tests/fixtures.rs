use headcam_core::ingest::{assign_temporal_classes, Dataset, LabelingOptions};
use headcam_core::synth::{generate_episodic, generate_shapes, EpisodicWorldConfig, ShapeWorldConfig};

fn small_world(seed: u64) -> EpisodicWorldConfig {
    EpisodicWorldConfig { n_episodes: 4, frames_per_episode: 10, seed, ..EpisodicWorldConfig::default() }
}

#[test]
fn episodic_world_is_seeded_and_self_labeled() {
    let a = generate_episodic(&small_world(3)).unwrap();
    let b = generate_episodic(&small_world(3)).unwrap();
    let c = generate_episodic(&small_world(4)).unwrap();
    assert_eq!(a.frames, b.frames);
    assert_ne!(a.frames, c.frames);
    let relabeled = assign_temporal_classes(&a.manifest, a.config.segment_length_s(), LabelingOptions::default()).unwrap();
    assert_eq!(relabeled.class_of, a.labeling.class_of);
    assert_eq!(a.labeling.n_classes, 4);
}

#[test]
fn fixtures_write_readable_datasets() {
    let tmp = tempfile::tempdir().unwrap();
    let ep = generate_episodic(&small_world(0)).unwrap();
    let m = ep.write(&tmp.path().join("ep")).unwrap();
    let ds = Dataset::open(&tmp.path().join("ep")).unwrap();
    assert_eq!(ds.manifest, m);
    assert_eq!(ds.labeling().unwrap().unwrap(), ep.labeling);

    let shapes = generate_shapes(&ShapeWorldConfig { n_classes: 3, exemplars_per_class: 4, views_per_exemplar: 2, ..ShapeWorldConfig::default() }).unwrap();
    shapes.write(&tmp.path().join("sh")).unwrap();
    let ds = Dataset::open(&tmp.path().join("sh")).unwrap();
    assert_eq!(ds.manifest.len(), 24);
    assert!(ds.manifest.entries.iter().all(|e| e.label.is_some() && e.exemplar_id.is_some()));
    assert!(ds.labeling().unwrap().is_none());
    let images = ds.load_images().unwrap();
    assert_eq!(images.len(), 24);
    assert_eq!(images[5], shapes.frames[5].image);
}
