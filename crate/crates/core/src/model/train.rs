use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use candle_core::{Tensor, D};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use image::imageops::{self, FilterType};
use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::checkpoint::{save_checkpoint, CheckpointHeader, CHECKPOINT_VERSION};
use super::config::TrainingConfig;
use super::history::{should_stop, EpochRecord, TrainingHistory};
use super::network::{argmax, Classifier};
use crate::augment::{apply_augmentation, AugmentationPolicy};
use crate::dataset::{derive_seed, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::labels::LabelScheme;
use crate::metrics::ConfusionMatrix;

/// Images with class indices under some label scheme.
#[derive(Debug, Clone, Default)]
pub struct LabeledImages {
    pub images: Vec<RgbImage>,
    pub labels: Vec<usize>,
}

impl LabeledImages {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Reads one split of a manifest, relabelled under `scheme` and resized to `size`.
pub fn load_split(
    manifest: &DatasetManifest,
    dataset_dir: &Path,
    split: Split,
    scheme: LabelScheme,
    size: u32,
) -> Result<LabeledImages> {
    let recs: Vec<_> = manifest.crops_in(split).collect();
    let images = recs
        .par_iter()
        .map(|r| {
            let path = dataset_dir.join(&r.path);
            let img = image::open(&path).map_err(|e| Error::Image { path, source: e })?.to_rgb8();
            Ok(if img.dimensions() == (size, size) {
                img
            } else {
                imageops::resize(&img, size, size, FilterType::Triangle)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledImages {
        images,
        labels: recs.iter().map(|r| scheme.index_of(r.class)).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct TrainingData {
    pub scheme: LabelScheme,
    pub train: LabeledImages,
    pub val: LabeledImages,
}

impl TrainingData {
    /// Train and val splits of `manifest`; fails before loading pixels when either is empty.
    pub fn from_manifest(manifest: &DatasetManifest, dataset_dir: &Path, scheme: LabelScheme, size: u32) -> Result<Self> {
        for split in [Split::Train, Split::Val] {
            if manifest.split_total(split) == 0 {
                return Err(Error::Consistency(format!("the {split} split is empty")));
            }
        }
        Ok(TrainingData {
            scheme,
            train: load_split(manifest, dataset_dir, Split::Train, scheme, size)?,
            val: load_split(manifest, dataset_dir, Split::Val, scheme, size)?,
        })
    }
}

/// One epoch of work plus persistence of improved states.
pub trait EpochRunner {
    fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord>;
    /// Called when `record` becomes the best epoch so far.
    fn on_improvement(&mut self, record: &EpochRecord) -> Result<()>;
}

/// Epoch loop with early stopping on `config.monitor`.
pub fn fit(runner: &mut dyn EpochRunner, config: &TrainingConfig) -> Result<TrainingHistory> {
    config.validate()?;
    let mut records = Vec::new();
    for epoch in 1..=config.max_epochs {
        let rec = runner.run_epoch(epoch)?;
        if !rec.train_loss.is_finite() || !rec.val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                train_loss: rec.train_loss,
                val_loss: rec.val_loss,
            });
        }
        rec.validate()?;
        log::info!(
            "epoch {epoch}: loss {:.4} acc {:.4} | val_loss {:.4} val_acc {:.4}",
            rec.train_loss,
            rec.train_accuracy,
            rec.val_loss,
            rec.val_accuracy
        );
        records.push(rec);
        let (stop, best) = should_stop(&records, config.patience, config.monitor);
        if best == epoch {
            runner.on_improvement(&rec)?;
        }
        if stop {
            return Ok(TrainingHistory {
                records,
                best_epoch: best,
                stopped_epoch: epoch,
            });
        }
    }
    let (_, best) = should_stop(&records, config.patience, config.monitor);
    Ok(TrainingHistory {
        records,
        best_epoch: best,
        stopped_epoch: config.max_epochs,
    })
}

/// Trains a [`Classifier`] with Adam and categorical cross-entropy.
pub struct CandleRunner<'a> {
    model: &'a Classifier,
    data: &'a TrainingData,
    policy: AugmentationPolicy,
    config: TrainingConfig,
    optimizer: AdamW,
    checkpoint_path: PathBuf,
    best_weights: Option<Vec<u8>>,
}

impl<'a> CandleRunner<'a> {
    pub fn new(
        model: &'a Classifier,
        data: &'a TrainingData,
        policy: AugmentationPolicy,
        config: &TrainingConfig,
        checkpoint_path: impl Into<PathBuf>,
    ) -> Result<Self> {
        policy.validate()?;
        if model.config().num_classes != data.scheme.num_classes() {
            return Err(Error::Config(format!(
                "model has {} outputs but the label scheme has {} classes",
                model.config().num_classes,
                data.scheme.num_classes()
            )));
        }
        let params = ParamsAdamW {
            lr: config.learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            weight_decay: 0.0,
        };
        let optimizer = AdamW::new(model.trainable_vars(config.freeze_backbone), params)?;
        Ok(CandleRunner {
            model,
            data,
            policy,
            config: config.clone(),
            optimizer,
            checkpoint_path: checkpoint_path.into(),
            best_weights: None,
        })
    }

    fn labels_tensor(&self, labels: &[usize]) -> Result<Tensor> {
        let l: Vec<u32> = labels.iter().map(|&i| i as u32).collect();
        Ok(Tensor::from_vec(l, labels.len(), self.model.device())?)
    }

    fn train_pass(&mut self, epoch: usize) -> Result<(f64, f64)> {
        let seed = self.config.seed;
        let train = &self.data.train;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, epoch as u64])));
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[2, epoch as u64]));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(self.config.batch_size) {
            let policy = self.policy;
            let images = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[3, epoch as u64, i as u64]));
                    let params = policy.sample_params(&mut rng);
                    apply_augmentation(&train.images[i], &params, &policy)
                })
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels[i]).collect();
            let x = self.model.input_tensor(&images)?;
            let logits = self.model.forward(&x, Some(&mut dropout_rng))?;
            let loss = candle_nn::loss::cross_entropy(&logits, &self.labels_tensor(&labels)?)?;
            self.optimizer.backward_step(&loss)?;
            loss_sum += loss.to_scalar::<f32>()? as f64 * batch.len() as f64;
            correct += count_correct(&logits, &labels)?;
        }
        let n = train.len() as f64;
        Ok((loss_sum / n, correct as f64 / n))
    }

    fn val_pass(&self, policy: &AugmentationPolicy) -> Result<(f64, f64)> {
        assert!(!policy.enabled, "validation must run without augmentation");
        let val = &self.data.val;
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (images, labels) in val.images.chunks(self.config.batch_size).zip(val.labels.chunks(self.config.batch_size)) {
            let logits = self.model.forward(&self.model.input_tensor(images)?, None)?;
            let loss = candle_nn::loss::cross_entropy(&logits, &self.labels_tensor(labels)?)?;
            loss_sum += loss.to_scalar::<f32>()? as f64 * labels.len() as f64;
            correct += count_correct(&logits, labels)?;
        }
        let n = val.len() as f64;
        Ok((loss_sum / n, correct as f64 / n))
    }

    /// Puts the best epoch's weights back into the model.
    pub fn restore_best(&self) -> Result<()> {
        if let Some(bytes) = &self.best_weights {
            let tensors = candle_core::safetensors::load_buffer(bytes, self.model.device())?;
            self.model.load_weights(&tensors)?;
        }
        Ok(())
    }
}

impl EpochRunner for CandleRunner<'_> {
    fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord> {
        let (train_loss, train_accuracy) = self.train_pass(epoch)?;
        let (val_loss, val_accuracy) = self.val_pass(&AugmentationPolicy::disabled())?;
        Ok(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        })
    }

    fn on_improvement(&mut self, record: &EpochRecord) -> Result<()> {
        let metrics = BTreeMap::from([
            ("train_loss".to_string(), record.train_loss),
            ("train_accuracy".to_string(), record.train_accuracy),
            ("val_loss".to_string(), record.val_loss),
            ("val_accuracy".to_string(), record.val_accuracy),
        ]);
        let header = CheckpointHeader {
            format_version: CHECKPOINT_VERSION,
            model_config: self.model.config().clone(),
            training_config: self.config.clone(),
            classes: self.data.scheme.classes(),
            label_scheme: self.data.scheme,
            epoch: record.epoch,
            val_accuracy: record.val_accuracy,
            metrics,
        };
        save_checkpoint(&self.checkpoint_path, &header, self.model)?;
        self.best_weights = Some(self.model.weights_bytes()?);
        Ok(())
    }
}

fn count_correct(logits: &Tensor, labels: &[usize]) -> Result<usize> {
    let pred = logits.argmax(D::Minus1)?.to_vec1::<u32>()?;
    Ok(pred.iter().zip(labels).filter(|(p, l)| **p as usize == **l).count())
}

/// Trains `model` in place, leaving it at the best epoch's weights.
pub fn train(
    model: &Classifier,
    data: &TrainingData,
    policy: &AugmentationPolicy,
    config: &TrainingConfig,
    checkpoint_path: &Path,
) -> Result<TrainingHistory> {
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Consistency("train and val splits must be non-empty".into()));
    }
    let mut runner = CandleRunner::new(model, data, *policy, config, checkpoint_path)?;
    let history = fit(&mut runner, config)?;
    runner.restore_best()?;
    Ok(history)
}

/// Confusion matrix of `model` on already-sized images.
pub fn evaluate_images(model: &Classifier, data: &LabeledImages, classes: &[String]) -> Result<ConfusionMatrix> {
    let mut predicted = Vec::with_capacity(data.len());
    for chunk in data.images.chunks(32) {
        let logits = model.forward(&model.input_tensor(chunk)?, None)?;
        for row in logits.to_vec2::<f32>()? {
            predicted.push(argmax(&row));
        }
    }
    ConfusionMatrix::from_indices(&data.labels, &predicted, classes)
}

/// Replays a fixed validation-accuracy series; useful for checking the stopping rule.
#[derive(Debug, Clone)]
pub struct ScriptedRunner {
    pub val_accuracy: Vec<f64>,
    pub improvements: Vec<usize>,
}

impl ScriptedRunner {
    pub fn new(val_accuracy: Vec<f64>) -> Self {
        ScriptedRunner {
            val_accuracy,
            improvements: Vec::new(),
        }
    }
}

impl EpochRunner for ScriptedRunner {
    fn run_epoch(&mut self, epoch: usize) -> Result<EpochRecord> {
        let acc = *self
            .val_accuracy
            .get(epoch - 1)
            .ok_or_else(|| Error::Training(format!("script has no value for epoch {epoch}")))?;
        Ok(EpochRecord {
            epoch,
            train_loss: 1.0 - acc,
            train_accuracy: acc,
            val_loss: if acc.is_finite() { 1.0 - acc } else { acc },
            val_accuracy: if acc.is_finite() { acc } else { 0.0 },
        })
    }

    fn on_improvement(&mut self, record: &EpochRecord) -> Result<()> {
        self.improvements.push(record.epoch);
        Ok(())
    }
}
