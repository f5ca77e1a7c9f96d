use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::TrainConfig;
use super::moco::Queue;
use crate::container::Container;
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Architecture, ConvNet, Linear, Projection};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

pub const CHECKPOINT_KIND: [u8; 4] = *b"CKPT";
pub const CHECKPOINT_MAJOR: u16 = 1;
const CHECKPOINT_MINOR: u16 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveState<T> {
    pub projection: Projection<T>,
    pub key_backbone: ConvNet<T>,
    pub key_projection: Projection<T>,
    pub queue: Queue<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head<T> {
    Classifier(Linear<T>),
    Contrastive(Box<ContrastiveState<T>>),
}

impl<T: Scalar> Head<T> {
    pub fn param_len(&self) -> usize {
        match self {
            Head::Classifier(l) => l.params.len(),
            Head::Contrastive(s) => s.projection.param_len(),
        }
    }
}

/// Complete training state after some number of epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub config: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub step: u64,
    pub n_classes: usize,
    pub metrics: Option<EpochMetrics>,
    pub backbone: ConvNet<T>,
    pub head: Head<T>,
    pub backbone_opt: Adam<T>,
    pub head_opt: Adam<T>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    format_version: u32,
    architecture: String,
    dtype: String,
    config: TrainConfig,
    epoch: usize,
    step: u64,
    n_classes: usize,
    metrics: Option<EpochMetrics>,
    adam_steps: [u64; 2],
    queue_ptr: Option<usize>,
}

fn store_flat<T: Scalar>(c: &mut Container, name: &str, values: &[T]) -> Result<()> {
    c.add_blob(name, &[values.len()], values)
}

fn load_flat<T: Scalar>(c: &Container, name: &str, len: usize) -> Result<Vec<T>> {
    let (_, v) = c.blob::<T>(name)?;
    if v.len() != len {
        return Err(Error::Shape(format!("blob `{name}` holds {} values, expected {len}", v.len())));
    }
    Ok(v)
}

fn store_projection<T: Scalar>(c: &mut Container, prefix: &str, p: &Projection<T>) -> Result<()> {
    p.first.params.store(&format!("{prefix}/first"), c)?;
    p.second.params.store(&format!("{prefix}/second"), c)
}

fn load_projection<T: Scalar>(c: &Container, prefix: &str, p: &mut Projection<T>) -> Result<()> {
    p.first.params.load(&format!("{prefix}/first"), c)?;
    p.second.params.load(&format!("{prefix}/second"), c)
}

impl<T: Scalar> Checkpoint<T> {
    /// Fresh state for `config`; `n_frames` sizes the contrastive queue.
    pub fn init(config: &TrainConfig, n_classes: usize, n_frames: usize) -> Result<Self> {
        config.validate()?;
        let arch = Architecture::lookup(&config.architecture)?;
        let backbone = ConvNet::<T>::random(arch, config.seed);
        let d = backbone.embedding_dim();
        let head = if config.objective.is_contrastive() {
            let c = &config.contrastive;
            let projection = Projection::random(d, c.projection_hidden.unwrap_or(d), c.projection_dim, config.seed);
            let size = super::moco::effective_queue_size(c.queue_size, n_frames).max(config.batch_size);
            if size > c.queue_size {
                return Err(Error::Config(format!(
                    "batch size {} exceeds the queue size {}",
                    config.batch_size, c.queue_size
                )));
            }
            Head::Contrastive(Box::new(ContrastiveState {
                key_backbone: backbone.clone(),
                key_projection: projection.clone(),
                queue: Queue::random(size, c.projection_dim, config.seed)?,
                projection,
            }))
        } else {
            if n_classes == 0 {
                return Err(Error::Config("temporal classification needs a labeling with at least one class".into()));
            }
            Head::Classifier(Linear::random(d, n_classes, config.seed, "classifier"))
        };
        let adam = AdamConfig { lr: config.lr, ..AdamConfig::default() };
        Ok(Self {
            config: config.clone(),
            epoch: 0,
            step: 0,
            n_classes,
            metrics: None,
            backbone_opt: Adam::new(adam, backbone.params().len()),
            head_opt: Adam::new(adam, head.param_len()),
            backbone,
            head,
        })
    }

    pub fn to_container(&self) -> Result<Container> {
        let queue_ptr = match &self.head {
            Head::Contrastive(s) => Some(s.queue.ptr()),
            Head::Classifier(_) => None,
        };
        let meta = Metadata {
            format_version: u32::from(CHECKPOINT_MAJOR),
            architecture: self.backbone.architecture().id.clone(),
            dtype: T::DTYPE.into(),
            config: self.config.clone(),
            epoch: self.epoch,
            step: self.step,
            n_classes: self.n_classes,
            metrics: self.metrics,
            adam_steps: [self.backbone_opt.t, self.head_opt.t],
            queue_ptr,
        };
        let mut c = Container::new(CHECKPOINT_KIND, CHECKPOINT_MAJOR, CHECKPOINT_MINOR, serde_json::to_value(meta)?);
        self.backbone.params().store("backbone", &mut c)?;
        match &self.head {
            Head::Classifier(l) => l.params.store("classifier", &mut c)?,
            Head::Contrastive(s) => {
                store_projection(&mut c, "projection", &s.projection)?;
                s.key_backbone.params().store("key_backbone", &mut c)?;
                store_projection(&mut c, "key_projection", &s.key_projection)?;
                let q = s.queue.keys();
                c.add_blob("queue", &[q.rows(), q.cols()], q.as_slice())?;
            }
        }
        for (name, opt) in [("backbone", &self.backbone_opt), ("head", &self.head_opt)] {
            store_flat(&mut c, &format!("adam/{name}/m"), &opt.m)?;
            store_flat(&mut c, &format!("adam/{name}/v"), &opt.v)?;
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container()?.write_atomic(path)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let meta: Metadata = serde_json::from_value(c.metadata.clone())?;
        let mut state = Self::init(&meta.config, meta.n_classes, 0)?;
        if meta.architecture != state.backbone.architecture().id {
            return Err(Error::Format(format!("checkpoint architecture `{}` disagrees with its config", meta.architecture)));
        }
        state.backbone.params_mut().load("backbone", c)?;
        match &mut state.head {
            Head::Classifier(l) => l.params.load("classifier", c)?,
            Head::Contrastive(s) => {
                load_projection(c, "projection", &mut s.projection)?;
                s.key_backbone.params_mut().load("key_backbone", c)?;
                load_projection(c, "key_projection", &mut s.key_projection)?;
                let (shape, keys) = c.blob::<T>("queue")?;
                if shape.len() != 2 {
                    return Err(Error::Format("queue blob must be two-dimensional".into()));
                }
                let ptr = meta.queue_ptr.ok_or_else(|| Error::Format("contrastive checkpoint without queue pointer".into()))?;
                s.queue = Queue::from_parts(Matrix::from_vec(shape[0], shape[1], keys)?, ptr)?;
            }
        }
        let (bl, hl) = (state.backbone.params().len(), state.head.param_len());
        for (name, opt, len, t) in [
            ("backbone", &mut state.backbone_opt, bl, meta.adam_steps[0]),
            ("head", &mut state.head_opt, hl, meta.adam_steps[1]),
        ] {
            opt.m = load_flat(c, &format!("adam/{name}/m"), len)?;
            opt.v = load_flat(c, &format!("adam/{name}/v"), len)?;
            opt.t = t;
        }
        state.epoch = meta.epoch;
        state.step = meta.step;
        state.metrics = meta.metrics;
        Ok(state)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read(path, CHECKPOINT_KIND, CHECKPOINT_MAJOR)?)
    }
}

/// Reads only the trunk of a checkpoint.
pub fn load_backbone<T: Scalar>(path: &Path) -> Result<ConvNet<T>> {
    let c = Container::read(path, CHECKPOINT_KIND, CHECKPOINT_MAJOR)?;
    let arch = c
        .metadata
        .get("architecture")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Format(format!("{} has no architecture field", path.display())))?;
    let mut net = ConvNet::zeros(Architecture::lookup(arch)?);
    net.params_mut().load("backbone", &c)?;
    Ok(net)
}

/// Writes a bare trunk (e.g. a random-init baseline) in checkpoint-compatible form.
pub fn save_backbone<T: Scalar>(net: &ConvNet<T>, source: &str, path: &Path) -> Result<()> {
    let meta = json!({
        "format_version": CHECKPOINT_MAJOR,
        "architecture": net.architecture().id,
        "dtype": T::DTYPE,
        "source": source,
    });
    let mut c = Container::new(CHECKPOINT_KIND, CHECKPOINT_MAJOR, CHECKPOINT_MINOR, meta);
    net.params().store("backbone", &mut c)?;
    c.write_atomic(path)
}
