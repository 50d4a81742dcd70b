//! End-to-end training loop and the evaluation harness.

mod eval;

pub use eval::{evaluate_checkpoints, evaluate_model, EvalReport, SampleEval, SeedEval};

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    augment, load_cornell, load_jacquard, load_synth_dataset, make_splits, preprocess,
    synth_dataset, synth_w_max_px, AugmentSpec, DatasetError, Modality, Preprocessed, Sample,
    SplitSpec,
};
use crate::geometry::{render_target_maps, GeometryError};
use crate::model::{save_checkpoint, Model, ModelConfig, ModelError, TrainMeta};
use crate::tensor::{adam_step, add, scale, smooth_l1, AdamConfig, TensorError};
use crate::{Scalar, Tensor32};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    DatasetEmpty,
    #[error("training diverged: non-finite loss at seed {seed}, step {step}")]
    Diverged { seed: u64, step: u64 },
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("checkpoint expects {expected} input channels but the {requested} modality provides {provided}")]
    ModalityMismatch {
        expected: usize,
        requested: Modality,
        provided: usize,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where samples come from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    /// Generated in-process: `count` scenes at the model input size.
    Synthetic {
        count: usize,
        max_objects: usize,
        seed: u64,
    },
    /// A directory written by the synthetic generator.
    SyntheticDir { root: PathBuf },
    Cornell { root: PathBuf },
    Jacquard { root: PathBuf },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dataset: DatasetSpec,
    pub modality: Modality,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    pub split: SplitSpec,
    /// Loss term weights for (quality, cos, sin, width).
    pub loss_weights: [f64; 4],
    pub augment: bool,
    /// Model shape; `input_channels` is overridden by the modality.
    pub model: ModelConfig,
    /// Gripper-opening normalization for targets and extraction, pixels.
    pub w_max_px: f64,
    /// Validate (and checkpoint on improvement) every this many epochs.
    pub val_every: usize,
    pub out_dir: PathBuf,
}

impl TrainConfig {
    /// Desk-scale synthetic recipe: 640 scenes split 5-fold (512 train /
    /// 128 validation), 20 epochs, seeds 1..3.
    pub fn synthetic_desk(out_dir: PathBuf) -> Self {
        let input_size = 48;
        TrainConfig {
            dataset: DatasetSpec::Synthetic {
                count: 640,
                max_objects: 3,
                seed: 9000,
            },
            modality: Modality::Rgbd,
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 20,
            seeds: vec![1, 2, 3],
            split: SplitSpec::default(),
            loss_weights: [1.0, 1.0, 1.0, 1.0],
            augment: false,
            model: ModelConfig::desk(4, input_size),
            w_max_px: synth_w_max_px(input_size),
            val_every: 4,
            out_dir,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Dataset(DatasetError::Format(
                "batch_size must be at least 1".into(),
            )));
        }
        if self.seeds.is_empty() {
            return Err(TrainError::Dataset(DatasetError::Format(
                "at least one seed is required".into(),
            )));
        }
        if self.epochs == 0 || self.val_every == 0 {
            return Err(TrainError::Dataset(DatasetError::Format(
                "epochs and val_every must be positive".into(),
            )));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            input_channels: self.modality.channels(),
            ..self.model.clone()
        }
    }
}

/// Loads the configured dataset into canonical samples.
pub fn load_samples(spec: &DatasetSpec, input_size: usize) -> Result<Vec<Sample>, TrainError> {
    let samples = match spec {
        DatasetSpec::Synthetic {
            count,
            max_objects,
            seed,
        } => synth_dataset(*seed, *count, input_size, *max_objects)
            .into_iter()
            .map(|s| s.sample)
            .collect(),
        DatasetSpec::SyntheticDir { root } => load_synth_dataset(root)?,
        DatasetSpec::Cornell { root } => load_cornell(root)?,
        DatasetSpec::Jacquard { root } => load_jacquard(root)?,
    };
    if samples.is_empty() {
        return Err(TrainError::DatasetEmpty);
    }
    Ok(samples)
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub checkpoint: PathBuf,
    pub best_val_accuracy: f64,
    pub final_loss: f64,
    pub steps: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainOutcome {
    pub per_seed: Vec<SeedOutcome>,
    pub log_path: PathBuf,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
}

struct StepLoss {
    total: f64,
    parts: [f64; 4],
}

fn train_step(
    model: &Model<f32>,
    batch: &[&Preprocessed],
    weights: [f64; 4],
    w_max: f64,
    adam: &AdamConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StepLoss, TrainError> {
    let size = batch[0].size;
    let input = Preprocessed::batch_tensor(batch);
    let mut target_planes: [Vec<f32>; 4] = Default::default();
    for pre in batch {
        let maps = render_target_maps(&pre.sample.rectangles, size, size, w_max);
        target_planes[0].extend_from_slice(maps.quality.as_slice());
        target_planes[1].extend_from_slice(maps.cos2t.as_slice());
        target_planes[2].extend_from_slice(maps.sin2t.as_slice());
        target_planes[3].extend_from_slice(maps.width.as_slice());
    }
    let shape = [batch.len(), 1, size, size];
    let targets =
        target_planes.map(|plane| Tensor32::new(plane, &shape, false));

    let out = model.forward_train(&input, rng)?;
    let losses = [
        smooth_l1(&out.quality, &targets[0])?,
        smooth_l1(&out.cos2t, &targets[1])?,
        smooth_l1(&out.sin2t, &targets[2])?,
        smooth_l1(&out.width, &targets[3])?,
    ];
    let parts = [
        losses[0].item() as f64,
        losses[1].item() as f64,
        losses[2].item() as f64,
        losses[3].item() as f64,
    ];
    let weighted: Vec<_> = losses
        .iter()
        .zip(weights)
        .map(|(l, w)| scale(l, w))
        .collect();
    let total = add(
        &add(&weighted[0], &weighted[1])?,
        &add(&weighted[2], &weighted[3])?,
    )?;
    let total_val = total.item() as f64;
    total.backward()?;
    adam_step(&model.parameters(), adam)?;
    model.zero_grad();
    Ok(StepLoss {
        total: total_val,
        parts,
    })
}

/// Trains one model per seed, logging per-step losses to a shared CSV and
/// keeping the best-by-validation checkpoint for each seed.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let model_cfg = config.model_config();
    let samples = load_samples(&config.dataset, model_cfg.input_size)?;
    let (train_ids, val_ids) = make_splits(&samples, &config.split)?;
    if val_ids.is_empty() {
        return Err(TrainError::EmptyValidation);
    }
    let by_id: HashMap<&str, &Sample> = samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let adam = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    if config.learning_rate == 0.0 {
        log::warn!("learning rate is 0; parameters will not change");
    }

    let log_path = config.out_dir.join("train_log.csv");
    let mut log_file = std::io::BufWriter::new(std::fs::File::create(&log_path)?);
    writeln!(
        log_file,
        "step,seed,loss_total,loss_q,loss_cos,loss_sin,loss_w,lr"
    )?;

    let max_offset = model_cfg.input_size as f64 * 0.08;
    let mut per_seed = Vec::new();
    for &seed in &config.seeds {
        let model = Model::<f32>::build(&model_cfg, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut step: u64 = 0;
        let mut best_acc = f64::NEG_INFINITY;
        let mut final_loss = f64::NAN;
        let checkpoint = config.out_dir.join(format!("model_seed{seed}.grcn"));
        for epoch in 0..config.epochs {
            let mut order: Vec<&str> = train_ids.iter().map(|s| s.as_str()).collect();
            order.shuffle(&mut rng);
            for chunk in order.chunks(config.batch_size) {
                let mut batch: Vec<Preprocessed> = Vec::with_capacity(chunk.len());
                for id in chunk {
                    let sample = by_id[id];
                    let s = if config.augment {
                        augment(sample, &AugmentSpec::sample(&mut rng, max_offset))
                    } else {
                        sample.clone()
                    };
                    batch.push(preprocess(&s, model_cfg.input_size, config.modality)?);
                }
                let refs: Vec<&Preprocessed> = batch.iter().collect();
                let loss = train_step(
                    &model,
                    &refs,
                    config.loss_weights,
                    config.w_max_px,
                    &adam,
                    &mut rng,
                )?;
                step += 1;
                if !loss.total.is_finite() {
                    return Err(TrainError::Diverged { seed, step });
                }
                final_loss = loss.total;
                writeln!(
                    log_file,
                    "{step},{seed},{},{},{},{},{},{}",
                    loss.total,
                    loss.parts[0],
                    loss.parts[1],
                    loss.parts[2],
                    loss.parts[3],
                    config.learning_rate
                )?;
            }
            let last_epoch = epoch + 1 == config.epochs;
            if (epoch + 1) % config.val_every == 0 || last_epoch {
                let eval = evaluate_model(
                    &model,
                    &by_id,
                    &val_ids,
                    config.modality,
                    config.w_max_px,
                    seed,
                )?;
                log::info!(
                    "seed {seed} epoch {} val accuracy {:.3}",
                    epoch + 1,
                    eval.accuracy
                );
                if eval.accuracy >= best_acc {
                    best_acc = eval.accuracy;
                    save_checkpoint(
                        &model,
                        &TrainMeta {
                            seed,
                            epoch: epoch + 1,
                            optimizer_step: step,
                        },
                        &checkpoint,
                    )?;
                }
            }
        }
        per_seed.push(SeedOutcome {
            seed,
            checkpoint,
            best_val_accuracy: best_acc,
            final_loss,
            steps: step,
        });
    }
    log_file.flush()?;
    Ok(TrainOutcome {
        per_seed,
        log_path,
        train_ids,
        val_ids,
    })
}

/// Trains and evaluates each modality with shared seeds and splits.
pub fn ablate_modalities(
    base: &TrainConfig,
) -> Result<Vec<(Modality, TrainOutcome, EvalReport)>, TrainError> {
    let mut rows = Vec::new();
    for modality in [Modality::D, Modality::Rgb, Modality::Rgbd] {
        let cfg = TrainConfig {
            modality,
            out_dir: base.out_dir.join(modality.to_string()),
            ..base.clone()
        };
        let outcome = train(&cfg)?;
        let samples = load_samples(&cfg.dataset, cfg.model.input_size)?;
        let paths: Vec<PathBuf> = outcome.per_seed.iter().map(|s| s.checkpoint.clone()).collect();
        let report = evaluate_checkpoints(&paths, &samples, &outcome.val_ids, modality, cfg.w_max_px)?;
        rows.push((modality, outcome, report));
    }
    Ok(rows)
}

/// After one backward pass: (parameters with a gradient, parameters whose
/// gradient has a nonzero element, total parameters).
pub fn gradient_flow<S: Scalar>(model: &Model<S>) -> (usize, usize, usize) {
    let params = model.parameters();
    let total = params.len();
    let mut populated = 0;
    let mut nonzero = 0;
    for p in &params {
        if let Some(g) = p.tensor().grad() {
            populated += 1;
            if g.iter().any(|v| *v != S::zero()) {
                nonzero += 1;
            }
        }
    }
    (populated, nonzero, total)
}
