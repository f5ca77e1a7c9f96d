use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, EpochMetrics, Head};
use super::config::{Objective, TrainConfig};
use super::data::TrainingSet;
use super::losses::{argmax, info_nce_loss, temporal_classification_loss};
use super::moco::momentum_update;
use super::pairs::temporal_positives;
use crate::error::{Error, Result};
use crate::nn::{spatial_mean, Backbone, ConvNet, ForwardCache};
use crate::rng::stream;
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Planar};
use crate::transforms::{normalize, ViewPipeline};

pub const LOG_FILE: &str = "train_log.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const MODEL_FILE: &str = "model.ckpt";

/// Samples per gradient-accumulation chunk; fixed so that the reduction order
/// does not depend on the number of workers.
const CHUNK: usize = 8;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Where the log, the rolling checkpoint and the final model go.
    pub output_dir: Option<PathBuf>,
    pub resume_from: Option<PathBuf>,
    /// Stop once this many epochs are complete (simulated interruption).
    pub stop_after_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub checkpoint: Checkpoint<T>,
    pub history: Vec<EpochMetrics>,
    /// Every step of this invocation, in order.
    pub log: Vec<LogRecord>,
    /// Temporal-classification accuracy over all training frames without
    /// augmentation, after the last epoch.
    pub final_train_accuracy: Option<f64>,
}

fn forward_batch<T: Scalar>(net: &ConvNet<T>, views: &[Planar<T>]) -> Result<(Matrix<T>, Vec<ForwardCache<T>>)> {
    let outs: Vec<(Vec<T>, ForwardCache<T>)> = views
        .par_iter()
        .map(|v| net.forward_train(v).map(|(f, c)| (spatial_mean(&f), c)))
        .collect::<Result<_>>()?;
    let d = net.embedding_dim();
    let mut emb = Matrix::zeros(outs.len(), d);
    let mut caches = Vec::with_capacity(outs.len());
    for (i, (row, cache)) in outs.into_iter().enumerate() {
        emb.row_mut(i).copy_from_slice(&row);
        caches.push(cache);
    }
    Ok((emb, caches))
}

/// Trunk gradient for the embedding gradient `d_emb`, summed over the batch.
fn backward_batch<T: Scalar>(net: &ConvNet<T>, caches: &[ForwardCache<T>], d_emb: &Matrix<T>) -> Vec<T> {
    let len = net.params().len();
    let partials: Vec<Vec<T>> = caches
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut g = vec![T::zero(); len];
            for (j, cache) in chunk.iter().enumerate() {
                let (h, w) = cache.grid();
                let inv = T::lit(1.0 / (h * w) as f64);
                let row = d_emb.row(ci * CHUNK + j);
                let upstream: Vec<T> = row.iter().flat_map(|&v| std::iter::repeat_n(v * inv, h * w)).collect();
                net.backward(cache, &upstream, &mut g);
            }
            g
        })
        .collect();
    let mut total = vec![T::zero(); len];
    for p in partials {
        total.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    total
}

fn make_views<T: Scalar>(
    data: &TrainingSet<T>,
    indices: &[usize],
    pipeline: &ViewPipeline,
    seed: u64,
    epoch: usize,
    view: u64,
) -> Result<Vec<Planar<T>>> {
    indices
        .par_iter()
        .map(|&i| pipeline.apply_keyed(&data.images[i], seed, epoch as u64, data.frame_ids[i], view))
        .collect()
}

struct StepResult {
    loss: f64,
    accuracy: f64,
}

fn classification_step<T: Scalar>(
    state: &mut Checkpoint<T>,
    data: &TrainingSet<T>,
    batch: &[usize],
    pipeline: &ViewPipeline,
    epoch: usize,
    lr: f64,
) -> Result<StepResult> {
    let classes = data.classes.as_ref().expect("checked by train");
    let labels: Vec<u32> = batch.iter().map(|&i| classes[i]).collect();
    let views = make_views(data, batch, pipeline, state.config.seed, epoch, 0)?;
    let (emb, caches) = forward_batch(&state.backbone, &views)?;
    let Head::Classifier(head) = &mut state.head else { unreachable!("classifier head") };
    let out = temporal_classification_loss(&head.forward(&emb), &labels)?;
    if !out.loss.is_finite() {
        return Ok(StepResult { loss: out.loss, accuracy: out.accuracy });
    }
    let mut head_grad = vec![T::zero(); head.params.len()];
    let d_emb = head.backward(&emb, &out.grad, &mut head_grad);
    let trunk_grad = backward_batch(&state.backbone, &caches, &d_emb);
    state.backbone_opt.step(&mut state.backbone.params_mut().data, &trunk_grad, lr);
    state.head_opt.step(&mut head.params.data, &head_grad, lr);
    Ok(StepResult { loss: out.loss, accuracy: out.accuracy })
}

fn contrastive_step<T: Scalar>(
    state: &mut Checkpoint<T>,
    data: &TrainingSet<T>,
    batch: &[usize],
    pipeline: &ViewPipeline,
    epoch: usize,
    lr: f64,
) -> Result<StepResult> {
    let cfg = state.config.clone();
    let positives = match cfg.objective {
        Objective::TemporalContrastive => {
            let mut rng = stream(cfg.seed, "positives", &[state.step]);
            temporal_positives(&data.sequence, batch, &mut rng)?
        }
        _ => batch.to_vec(),
    };
    let q_views = make_views(data, batch, pipeline, cfg.seed, epoch, 0)?;
    let k_views = make_views(data, &positives, pipeline, cfg.seed, epoch, 1)?;
    let (emb_q, caches) = forward_batch(&state.backbone, &q_views)?;
    let Head::Contrastive(s) = &mut state.head else { unreachable!("contrastive head") };
    let (q, proj_cache) = s.projection.forward_train(&emb_q);
    let k = s.key_projection.forward(&s.key_backbone.embed_only(&k_views)?);
    let out = info_nce_loss(&q, &k, s.queue.keys(), cfg.contrastive.temperature)?;
    if !out.loss.is_finite() {
        return Ok(StepResult { loss: out.loss, accuracy: out.accuracy });
    }
    let mut proj_grad = vec![T::zero(); s.projection.param_len()];
    let d_emb = s.projection.backward(&proj_cache, &out.grad_query, &mut proj_grad);
    let trunk_grad = backward_batch(&state.backbone, &caches, &d_emb);
    state.backbone_opt.step(&mut state.backbone.params_mut().data, &trunk_grad, lr);
    let mut proj = s.projection.flat_params();
    state.head_opt.step(&mut proj, &proj_grad, lr);
    s.projection.set_flat_params(&proj);

    let m = cfg.contrastive.momentum;
    momentum_update(&state.backbone.params().data, &mut s.key_backbone.params_mut().data, m)?;
    let mut key_proj = s.key_projection.flat_params();
    momentum_update(&proj, &mut key_proj, m)?;
    s.key_projection.set_flat_params(&key_proj);
    s.queue.enqueue(&k)?;
    Ok(StepResult { loss: out.loss, accuracy: out.accuracy })
}

/// Argmax accuracy of the classifier over every training frame, unaugmented.
pub fn classification_accuracy<T: Scalar>(state: &Checkpoint<T>, data: &TrainingSet<T>) -> Result<f64> {
    let (Head::Classifier(head), Some(classes)) = (&state.head, &data.classes) else {
        return Err(Error::Config("accuracy needs a classifier head and labeled frames".into()));
    };
    let mut correct = 0usize;
    for (chunk_idx, chunk) in data.images.chunks(256).enumerate() {
        let views: Vec<Planar<T>> =
            chunk.par_iter().map(|img| normalize(img, &state.config.normalization)).collect::<Result<_>>()?;
        let logits = head.forward(&state.backbone.embed_only(&views)?);
        for (r, row) in logits.iter_rows().enumerate() {
            correct += usize::from(argmax(row) == classes[chunk_idx * 256 + r] as usize);
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

fn same_run(a: &TrainConfig, b: &TrainConfig) -> bool {
    TrainConfig { epochs: 0, ..a.clone() } == TrainConfig { epochs: 0, ..b.clone() }
}

/// Runs (or resumes) training. Deterministic given the config and data:
/// shuffling, augmentation and positive sampling draw from streams keyed by
/// seed, epoch, step and frame id, and gradients are reduced in a fixed order.
pub fn train<T: Scalar>(config: &TrainConfig, data: &TrainingSet<T>, options: &TrainOptions) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if !config.objective.is_contrastive() && data.classes.is_none() {
        return Err(Error::Config("temporal classification requires a temporal labeling".into()));
    }
    if config.objective == Objective::TemporalContrastive && data.len() < 2 {
        return Err(Error::Contract("temporal contrastive training needs at least 2 frames".into()));
    }
    let mut state = match &options.resume_from {
        Some(path) => {
            let mut s = Checkpoint::<T>::load(path)?;
            if !same_run(&s.config, config) {
                return Err(Error::Config(format!("{} was trained with a different configuration", path.display())));
            }
            s.config.epochs = config.epochs;
            s
        }
        None => Checkpoint::init(config, data.n_classes, data.len())?,
    };
    if let Head::Classifier(h) = &state.head {
        if h.outputs != data.n_classes {
            return Err(Error::Shape(format!("head has {} classes, labeling has {}", h.outputs, data.n_classes)));
        }
    }

    let pipeline = ViewPipeline {
        augment: config.augment,
        contrastive: config.objective.is_contrastive().then_some(config.contrastive_augment),
        normalization: config.normalization,
    };
    let mut log_file = match &options.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(LOG_FILE);
            Some(OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?)
        }
        None => None,
    };
    let ckpt_path = options.output_dir.as_ref().map(|d| d.join(CHECKPOINT_FILE));
    let mut last_good: Option<PathBuf> = None;
    let start = Instant::now();
    let mut history = Vec::new();
    let mut log = Vec::new();

    while state.epoch < config.epochs {
        if options.stop_after_epoch.is_some_and(|stop| state.epoch >= stop) {
            break;
        }
        let epoch = state.epoch;
        let lr = if config.objective.is_contrastive() && epoch + 1 == config.epochs { config.lr * 0.1 } else { config.lr };
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut stream(config.seed, "shuffle", &[epoch as u64]));
        let (mut loss_sum, mut acc_sum) = (0.0, 0.0);
        for batch in order.chunks(config.batch_size) {
            let r = if config.objective.is_contrastive() {
                contrastive_step(&mut state, data, batch, &pipeline, epoch, lr)?
            } else {
                classification_step(&mut state, data, batch, &pipeline, epoch, lr)?
            };
            if !r.loss.is_finite() {
                return Err(Error::Diverged { step: state.step, last_good });
            }
            state.step += 1;
            loss_sum += r.loss * batch.len() as f64;
            acc_sum += r.accuracy * batch.len() as f64;
            let record =
                LogRecord { step: state.step, epoch, loss: r.loss, accuracy: r.accuracy, wall_time: start.elapsed().as_secs_f64() };
            if let Some(f) = log_file.as_mut() {
                let mut line = serde_json::to_vec(&record)?;
                line.push(b'\n');
                let path = options.output_dir.as_ref().map(|d| d.join(LOG_FILE)).unwrap_or_default();
                f.write_all(&line).map_err(|e| Error::io(&path, e))?;
            }
            log.push(record);
        }
        state.epoch += 1;
        let metrics = EpochMetrics { epoch, loss: loss_sum / data.len() as f64, accuracy: acc_sum / data.len() as f64 };
        state.metrics = Some(metrics);
        history.push(metrics);
        if let Some(path) = &ckpt_path {
            state.save(path)?;
            last_good = Some(path.clone());
        }
    }

    let final_train_accuracy = match state.head {
        Head::Classifier(_) => Some(classification_accuracy(&state, data)?),
        Head::Contrastive(_) => None,
    };
    if let Some(dir) = &options.output_dir {
        state.save(&dir.join(MODEL_FILE))?;
    }
    Ok(TrainOutcome { checkpoint: state, history, log, final_train_accuracy })
}

/// Trunk embeddings of `images` (in `[0, 1]`), normalized but not augmented.
pub fn embed_images<T: Scalar>(net: &ConvNet<T>, images: &[Planar<T>], normalization: &crate::transforms::NormalizationConstants) -> Result<Matrix<T>> {
    let mut rows = Vec::with_capacity(images.len() * net.embedding_dim());
    for chunk in images.chunks(256) {
        let views: Vec<Planar<T>> = chunk.par_iter().map(|img| normalize(img, normalization)).collect::<Result<_>>()?;
        rows.extend_from_slice(net.embed_only(&views)?.as_slice());
    }
    Matrix::from_vec(images.len(), net.embedding_dim(), rows)
}
