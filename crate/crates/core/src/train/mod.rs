//! Manifests, synthetic decoys, the training loop and checkpoints.

pub mod checkpoint;
pub mod manifest;
pub mod synth;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint, TrainingMeta,
};
pub use manifest::{load_manifest, DatasetManifest, ManifestEntry};
pub use synth::{folded_chain, label_spaced_sigmas, synth_decoys};

use crate::error::{Error, Result};
use crate::geom::{filter_heavy_cno, read_structure, Structure};
use crate::graph::{build_multiplex, MultiplexGraph};
use crate::model::{init_params, loss_and_grads, predict, ModelConfig};
use crate::tensor::{adam_step, AdamConfig, AdamState, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Transition point of the smooth L1 loss, Å.
    pub beta: f64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            learning_rate: 1e-4,
            max_epochs: 500,
            patience: 25,
            seed: 0,
            beta: 1.0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("smooth L1 beta must be positive, got {}", self.beta)));
        }
        self.model.validate()
    }
}

/// A prepared training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub graph: MultiplexGraph,
    /// Å
    pub label: f64,
}

pub fn sample_from_structure(s: &Structure, label: f64, config: &ModelConfig) -> Result<Sample> {
    Ok(Sample {
        id: s.id.clone(),
        graph: build_multiplex(s, config.local_cutoff, config.global_cutoff)?,
        label,
    })
}

/// Reads a structure file, keeps its C/N/O atoms and builds the graph.
pub fn load_graph(path: &std::path::Path, config: &ModelConfig) -> Result<MultiplexGraph> {
    let s = filter_heavy_cno(&read_structure(path)?)?;
    build_multiplex(&s, config.local_cutoff, config.global_cutoff)
}

/// Reads every entry and builds its graph, failing on the first bad entry in
/// manifest order.
pub fn prepare_samples(manifest: &DatasetManifest, config: &ModelConfig) -> Result<Vec<Sample>> {
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let id = e.path.display().to_string();
            match load_graph(&e.path, config) {
                Ok(graph) => Ok(Sample {
                    id,
                    graph,
                    label: e.label,
                }),
                Err(err) => Err(err.in_entry(id)),
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Mean smooth L1 loss and mean gradients over `batch`. Per-sample work runs
/// in parallel; the reduction follows batch order.
pub fn batch_loss_and_grads(
    config: &ModelConfig,
    params: &ParamStore,
    batch: &[&Sample],
    beta: f64,
) -> Result<(f64, ParamStore)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let results = batch
        .par_iter()
        .map(|s| {
            loss_and_grads(config, params, &s.graph, s.label, beta)
                .map_err(|e| e.in_entry(s.id.clone()))
        })
        .collect::<Vec<_>>();
    let mut total = 0.0;
    let mut grads = params.zeros_like();
    for r in results {
        let (loss, g) = r?;
        total += loss;
        grads.add_scaled(&g, 1.0)?;
    }
    let scale = 1.0 / batch.len() as f64;
    let mut mean = params.zeros_like();
    mean.add_scaled(&grads, scale)?;
    Ok((total * scale, mean))
}

/// One Adam update on `batch`; returns the batch loss before the update.
pub fn train_step(
    config: &TrainConfig,
    params: &mut ParamStore,
    state: &mut AdamState,
    batch: &[&Sample],
) -> Result<f64> {
    let (loss, grads) = batch_loss_and_grads(&config.model, params, batch, config.beta)?;
    adam_step(params, &grads, state)?;
    Ok(loss)
}

/// Mean smooth L1 loss over `samples`.
pub fn evaluate_loss(
    config: &ModelConfig,
    params: &ParamStore,
    samples: &[Sample],
    beta: f64,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("no samples to evaluate".into()));
    }
    let losses = samples
        .par_iter()
        .map(|s| {
            predict(config, params, &s.graph)
                .and_then(|y| crate::tensor::smooth_l1(y, s.label, beta))
                .map_err(|e| e.in_entry(s.id.clone()))
        })
        .collect::<Vec<_>>();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best monitored loss; stops after `patience` consecutive epochs
/// without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn update(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best epoch.
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochReport>,
}

/// Trains from a seeded initialization. Early stopping watches the validation
/// loss, or the epoch's mean training loss when `val` is `None`.
pub fn train_samples(
    train: &[Sample],
    val: Option<&[Sample]>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if val.is_some_and(|v| v.is_empty()) {
        return Err(Error::Config("validation set is empty".into()));
    }
    let mut params = init_params(&config.model, config.seed)?;
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut state = AdamState::new(&params, adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = (params.clone(), state.clone());
    let mut history = Vec::new();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            weighted += train_step(config, &mut params, &mut state, &batch)? * batch.len() as f64;
        }
        let train_loss = weighted / train.len() as f64;
        let val_loss = match val {
            Some(v) => Some(evaluate_loss(&config.model, &params, v, config.beta)?),
            None => None,
        };
        let report = EpochReport {
            epoch,
            train_loss,
            val_loss,
        };
        on_epoch(&report);
        history.push(report);
        match stopper.update(epoch, val_loss.unwrap_or(train_loss)) {
            StopDecision::Improved => best = (params.clone(), state.clone()),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                log::info!("early stop at epoch {epoch}, best epoch {}", stopper.best_epoch());
                break;
            }
        }
    }
    let (params, state) = best;
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: config.model,
            params,
            optimizer: Some(state),
            meta: TrainingMeta {
                epoch: stopper.best_epoch(),
                best_val_loss: stopper.best(),
                seed: config.seed,
            },
        },
        history,
    })
}

/// Preflights every entry, then trains.
pub fn train(
    train: &DatasetManifest,
    val: Option<&DatasetManifest>,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainOutcome> {
    config.validate()?;
    let train_samples_ = prepare_samples(train, &config.model)?;
    let val_samples = match val {
        Some(v) => Some(prepare_samples(v, &config.model)?),
        None => None,
    };
    train_samples(&train_samples_, val_samples.as_deref(), config, on_epoch)
}
