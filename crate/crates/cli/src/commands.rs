//! Subcommand bodies. Each reads its inputs, writes everything under the
//! run's output directory (including the resolved configuration) and
//! returns a summary that is also stored as JSON.

use std::path::{Path, PathBuf};

use headcam_core::analysis::{
    cam, csi, csi_csv, csi_split_half, export_attention_maps, mask_image, pca_csv, pca_curve, response_tables, top_activating_images,
    AttentionMap,
};
use headcam_core::baselines::{hog_matrix, random_backbone};
use headcam_core::container::write_atomic;
use headcam_core::imaging::resize_planar;
use headcam_core::ingest::{
    assign_temporal_classes, curate_labels, ingest_recordings, parse_annotations, write_dataset, Dataset, FrameRecord, ManifestEntry,
    SynonymTable, LABELING_FILE,
};
use headcam_core::nn::{Backbone, ConvNet};
use headcam_core::probe::{binary_task, evaluate, fit_probe, EmbeddingSet, ProbeResult};
use headcam_core::ssl::{embed_images, load_backbone, train, TrainOptions, TrainingSet};
use headcam_core::synth::{generate_episodic, generate_shapes};
use headcam_core::{Error, Planar, Real, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{FeatureSource, RunConfig};

pub const RESULTS_FILE: &str = "results.json";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const TRAIN_SUMMARY_FILE: &str = "train_summary.json";
pub const SWEEP_FILE: &str = "sweep.json";
pub const SWEEP_TABLE: &str = "sweep.csv";
pub const CSI_TABLE: &str = "csi.csv";
pub const PCA_TABLE: &str = "pca.csv";
pub const CACHE_ENV: &str = "HEADCAM_CACHE_DIR";

fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<()> {
    write_atomic(&dir.join(name), serde_json::to_string_pretty(value)?.as_bytes())
}

fn prepare(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir()?.to_path_buf();
    cfg.write_resolved()?;
    Ok(dir)
}

/// Sizes the global worker pool; later calls keep the first size.
pub fn init_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub frames: usize,
    pub temporal_classes: Option<usize>,
    pub labeled_frames: Option<usize>,
    pub manifest_checksum: String,
}

pub fn ingest(cfg: &RunConfig) -> Result<DatasetSummary> {
    let d = &cfg.data;
    if !(d.fps > 0.0 && d.fps.is_finite()) {
        return Err(Error::Parameter(format!("ingest fps must be positive, got {}", d.fps)));
    }
    if !(cfg.train.segment_length_s > 0.0) {
        return Err(Error::Parameter(format!("segment length must be positive, got {}", cfg.train.segment_length_s)));
    }
    if d.recordings.is_empty() {
        return Err(Error::Config("no recordings to ingest (data.recordings is empty)".into()));
    }
    for r in &d.recordings {
        r.validate()?;
    }
    let out = prepare(cfg)?;
    let frames = ingest_recordings(&d.recordings, d.fps, &d.preprocessing, cfg.workers.unwrap_or_else(rayon::current_num_threads))?;
    let manifest = write_dataset(&out, d.fps, d.preprocessing, &frames, d.shard_size)?;
    let labeling = assign_temporal_classes(&manifest, cfg.train.segment_length_s, cfg.train.labeling)?;
    labeling.write(&out.join(LABELING_FILE))?;

    let mut labeled_frames = None;
    if let Some(path) = &d.annotations {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cells = parse_annotations(&text)?;
        let synonyms = match &d.synonyms {
            Some(p) => SynonymTable::load(p)?,
            None => SynonymTable::default(),
        };
        let curated = curate_labels(&manifest, &cells, &synonyms, d.curation)?;
        let subset: Vec<FrameRecord> = curated
            .manifest
            .entries
            .iter()
            .map(|e| FrameRecord { label: e.label.clone(), ..frames[e.frame_id as usize].clone() })
            .collect();
        write_dataset(&out.join("labeled"), d.fps, d.preprocessing, &subset, d.shard_size)?;
        labeled_frames = Some(subset.len());
    }
    let summary = DatasetSummary {
        frames: manifest.len(),
        temporal_classes: Some(labeling.n_classes),
        labeled_frames,
        manifest_checksum: manifest.checksum()?,
    };
    write_json(&out, "ingest.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Episodic,
    Shapes,
}

pub fn synth(cfg: &RunConfig, kind: FixtureKind) -> Result<DatasetSummary> {
    let out = prepare(cfg)?;
    let (manifest, classes) = match kind {
        FixtureKind::Episodic => {
            let fx = generate_episodic(&cfg.data.episodic)?;
            (fx.write(&out)?, Some(fx.labeling.n_classes))
        }
        FixtureKind::Shapes => (generate_shapes(&cfg.data.shapes)?.write(&out)?, None),
    };
    let labeled = manifest.entries.iter().filter(|e| e.label.is_some()).count();
    let summary = DatasetSummary {
        frames: manifest.len(),
        temporal_classes: classes,
        labeled_frames: Some(labeled),
        manifest_checksum: manifest.checksum()?,
    };
    write_json(&out, "synth.json", &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub objective: String,
    pub epochs: usize,
    pub steps: u64,
    pub frames: usize,
    pub temporal_classes: usize,
    pub final_loss: Option<f64>,
    pub final_epoch_accuracy: Option<f64>,
    /// Unaugmented temporal-classification accuracy on the training frames.
    pub final_train_accuracy: Option<f64>,
    pub model: PathBuf,
}

pub fn train_cmd(cfg: &RunConfig, data_dir: &Path, resume: Option<&Path>) -> Result<TrainSummary> {
    let tc = cfg.train_config();
    tc.validate()?;
    let dataset = Dataset::open(data_dir)?;
    let set = TrainingSet::<Real>::from_dataset(&dataset, &tc)?;
    let out = prepare(cfg)?;
    let options = TrainOptions { output_dir: Some(out.clone()), resume_from: resume.map(Path::to_path_buf), stop_after_epoch: None };
    let outcome = train(&tc, &set, &options)?;
    let last = outcome.history.last();
    let summary = TrainSummary {
        objective: tc.objective.name().into(),
        epochs: outcome.checkpoint.epoch,
        steps: outcome.checkpoint.step,
        frames: set.len(),
        temporal_classes: set.n_classes,
        final_loss: last.map(|m| m.loss),
        final_epoch_accuracy: last.map(|m| m.accuracy),
        final_train_accuracy: outcome.final_train_accuracy,
        model: PathBuf::from(headcam_core::ssl::MODEL_FILE),
    };
    write_json(&out, TRAIN_SUMMARY_FILE, &summary)?;
    Ok(summary)
}

/// Labeled frames of a dataset as `[0, 1]` images with their manifest entries.
pub fn labeled_frames(dataset: &Dataset) -> Result<(Vec<Planar<Real>>, Vec<ManifestEntry>)> {
    let images = dataset.load_images()?;
    let (mut out, mut entries) = (Vec::new(), Vec::new());
    for (img, e) in images.iter().zip(&dataset.manifest.entries) {
        if e.label.is_some() {
            out.push(Planar::from_rgb(img));
            entries.push(e.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("dataset {} has no category labels", dataset.root.display())));
    }
    Ok((out, entries))
}

/// The trunk a probe or an analysis runs on.
pub fn load_trunk(cfg: &RunConfig, model: Option<&Path>) -> Result<(ConvNet<Real>, String)> {
    match cfg.probe.features {
        FeatureSource::Trunk => {
            let path = model.ok_or_else(|| Error::Config("trunk features need --model".into()))?;
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((load_backbone(path)?, format!("trunk:{name}")))
        }
        FeatureSource::Random => {
            Ok((random_backbone(&cfg.train.architecture, cfg.seed)?, format!("random:{}:{}", cfg.train.architecture, cfg.seed)))
        }
        FeatureSource::Hog => Err(Error::Config("HOG features have no trunk to analyze".into())),
    }
}

fn cache_key(cfg: &RunConfig, dataset: &Dataset, model: Option<&Path>) -> Result<String> {
    let mut h = Sha256::new();
    h.update(dataset.manifest.checksum()?.as_bytes());
    h.update(serde_json::to_vec(&(cfg.probe.features, cfg.probe.hog, &cfg.train.architecture, &cfg.train.normalization, cfg.seed))?);
    if let (FeatureSource::Trunk, Some(p)) = (cfg.probe.features, model) {
        h.update(std::fs::read(p).map_err(|e| Error::io(p, e))?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Features of every labeled frame, reusing `$HEADCAM_CACHE_DIR` when set.
pub fn extract_features(cfg: &RunConfig, dataset: &Dataset, model: Option<&Path>) -> Result<EmbeddingSet<Real>> {
    let cache = match std::env::var_os(CACHE_ENV) {
        Some(dir) => Some(PathBuf::from(dir).join("embeddings").join(format!("{}.embs", cache_key(cfg, dataset, model)?))),
        None => None,
    };
    if let Some(path) = cache.as_ref().filter(|p| p.exists()) {
        return EmbeddingSet::load(path);
    }
    let (images, entries) = labeled_frames(dataset)?;
    let set = match cfg.probe.features {
        FeatureSource::Hog => EmbeddingSet::from_entries(hog_matrix(&images, &cfg.probe.hog)?, &entries, "hog")?,
        _ => {
            let (net, source) = load_trunk(cfg, model)?;
            EmbeddingSet::from_entries(embed_images(&net, &images, &cfg.train.normalization)?, &entries, source)?
        }
    };
    if let Some(path) = cache {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        set.save(&path)?;
    }
    Ok(set)
}

fn dataset_name(dir: &Path) -> String {
    dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string())
}

pub fn probe_cmd(cfg: &RunConfig, data_dir: &Path, model: Option<&Path>) -> Result<ProbeResult> {
    let dataset = Dataset::open(data_dir)?;
    let mut set = extract_features(cfg, &dataset, model)?;
    if let Some([a, b]) = &cfg.probe.binary {
        set = binary_task(&set, a, b)?;
    }
    let out = prepare(cfg)?;
    let (result, classifier) = evaluate(&set, &dataset_name(data_dir), &cfg.split_spec(), &cfg.probe_config())?;
    set.save(&out.join("embeddings.embs"))?;
    write_json(&out, "probe.json", &classifier)?;
    write_json(&out, RESULTS_FILE, &result)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSelectivity {
    pub layer: String,
    pub mean_csi: f64,
    pub median_csi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopActivating {
    pub layer: String,
    pub feature: usize,
    pub frame_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub model: String,
    pub dataset: String,
    pub images: usize,
    pub selectivity: Vec<LayerSelectivity>,
    pub top_activating: Option<TopActivating>,
    pub pca_curve: Option<Vec<f64>>,
    /// Components needed to explain 90% of the variance.
    pub components_90: Option<usize>,
    pub attention_maps: usize,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn analyze_cmd(cfg: &RunConfig, data_dir: &Path, model: Option<&Path>) -> Result<AnalysisSummary> {
    let a = &cfg.analysis;
    let dataset = Dataset::open(data_dir)?;
    let (net, source) = load_trunk(cfg, model)?;
    let (images, entries) = labeled_frames(&dataset)?;
    let embeddings = EmbeddingSet::from_entries(embed_images(&net, &images, &cfg.train.normalization)?, &entries, source.clone())?;
    let out = prepare(cfg)?;

    let mut selectivity = Vec::new();
    let mut top_activating = None;
    if a.csi {
        let tables = response_tables(&net, &images, &embeddings.labels, &cfg.train.normalization)?;
        let mut rows = Vec::new();
        for t in &tables {
            let values = if a.csi_split_half { csi_split_half(t, cfg.seed)? } else { csi(t)? };
            selectivity.push(LayerSelectivity {
                layer: t.layer_id.clone(),
                mean_csi: values.iter().sum::<f64>() / values.len() as f64,
                median_csi: median(&values),
            });
            rows.push((t.layer_id.clone(), values));
        }
        write_atomic(&out.join(CSI_TABLE), csi_csv(&rows).as_bytes())?;
        if let (Some(t), Some((_, values))) = (tables.last(), rows.last()) {
            let feature = (0..values.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
            let sample = a.top_sample.min(t.responses.rows());
            let picked = top_activating_images(t, feature, sample, a.top_k, cfg.seed)?;
            top_activating = Some(TopActivating {
                layer: t.layer_id.clone(),
                feature,
                frame_ids: picked.iter().map(|&i| embeddings.frame_ids[i]).collect(),
            });
        }
    }

    let mut pca = None;
    let mut components_90 = None;
    if a.pca && embeddings.len() >= 2 {
        let curve = pca_curve(&embeddings.embeddings)?;
        write_atomic(&out.join(PCA_TABLE), pca_csv(&curve).as_bytes())?;
        components_90 = curve.iter().position(|&v| v >= 0.9).map(|k| k + 1);
        pca = Some(curve);
    }

    let mut maps: Vec<AttentionMap> = Vec::new();
    if a.cam_images > 0 {
        let classifier = fit_probe(&embeddings, &cfg.probe_config())?;
        let masked_dir = out.join("cams").join("masked");
        std::fs::create_dir_all(&masked_dir).map_err(|e| Error::io(&masked_dir, e))?;
        for i in 0..a.cam_images.min(images.len()) {
            let view = headcam_core::transforms::normalize(&images[i], &cfg.train.normalization)?;
            let spatial = net.spatial_features(&view)?;
            let shown = resize_planar(&images[i], a.cam.output_size, a.cam.output_size);
            for c in 0..classifier.n_classes() {
                let m = cam(&spatial, classifier.weights.row(c), c as u32, embeddings.frame_ids[i], &a.cam)?;
                let masked = mask_image(&shown, &m.upsampled)?.to_rgb()?;
                let path = masked_dir.join(format!("cam_{:06}_c{c}.png", m.image_id));
                masked.save(&path).map_err(Error::from)?;
                maps.push(m);
            }
        }
        export_attention_maps(&maps, &embeddings.label_names, &out.join("cams"))?;
    }

    let summary = AnalysisSummary {
        model: source,
        dataset: dataset_name(data_dir),
        images: images.len(),
        selectivity,
        top_activating,
        pca_curve: pca,
        components_90,
        attention_maps: maps.len(),
    };
    write_json(&out, ANALYSIS_FILE, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub fps: f64,
    pub segment_length_s: f64,
    pub augment: bool,
    pub final_train_accuracy: Option<f64>,
    pub top1: f64,
}

/// Trains one model per `(fps, segment length, augment)` cell on `train_dir`
/// and probes each on `probe_dir`.
pub fn sweep_cmd(cfg: &RunConfig, train_dir: &Path, probe_dir: &Path) -> Result<Vec<SweepCell>> {
    let s = &cfg.analysis.sweep;
    if s.fps.is_empty() || s.segment_length_s.is_empty() || s.augment.is_empty() {
        return Err(Error::Config("every sweep axis needs at least one value".into()));
    }
    let train_set = Dataset::open(train_dir)?;
    let probe_set = Dataset::open(probe_dir)?;
    let (probe_images, probe_entries) = labeled_frames(&probe_set)?;
    let out = prepare(cfg)?;
    let mut cells = Vec::new();
    let mut table = String::from("fps,segment_length_s,augment,top1\n");
    for &fps in &s.fps {
        for &segment in &s.segment_length_s {
            for &augment in &s.augment {
                let mut tc = cfg.train_config();
                tc.fps = Some(fps);
                tc.segment_length_s = segment;
                tc.augment.enabled = augment;
                tc.epochs = s.epochs.unwrap_or(tc.epochs);
                let data = TrainingSet::<Real>::from_dataset(&train_set, &tc)?;
                let outcome = train(&tc, &data, &TrainOptions::default())?;
                let emb = embed_images(&outcome.checkpoint.backbone, &probe_images, &tc.normalization)?;
                let set = EmbeddingSet::from_entries(emb, &probe_entries, "sweep")?;
                let (result, _) = evaluate(&set, &dataset_name(probe_dir), &cfg.split_spec(), &cfg.probe_config())?;
                table.push_str(&format!("{fps},{segment},{augment},{:.17e}\n", result.top1));
                cells.push(SweepCell { fps, segment_length_s: segment, augment, final_train_accuracy: outcome.final_train_accuracy, top1: result.top1 });
            }
        }
    }
    write_atomic(&out.join(SWEEP_TABLE), table.as_bytes())?;
    write_json(&out, SWEEP_FILE, &cells)?;
    Ok(cells)
}
