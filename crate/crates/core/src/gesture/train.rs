//! Mini-batch training with Adam, and accuracy / confusion metrics.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::argmax;
use crate::config::{ConfigError, KeyValues};
use crate::exec;
use crate::nn::{
    adam_step, forward, log_sum_exp, loss_and_grads, AdamConfig, AdamState, MaskKey, Mode,
    NetworkSpec, NnError, ParameterStore, Sample,
};
use crate::signal::WindowSet;

/// Windows per evaluation work item.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("windows are {found:?}, network expects {expected:?}")]
    WindowShape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("batch size must be at least 1")]
    ZeroBatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Rate of every dropout layer when the network is built from a variant.
    pub dropout_rate: f32,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            batch_size: 4096,
            epochs: 200,
            dropout_rate: 0.5,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    /// Reads the training keys present in `kv`, leaving other keys for the
    /// caller.
    pub fn take_from(kv: &mut KeyValues) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        kv.set("learning_rate", &mut c.learning_rate)?;
        kv.set("beta1", &mut c.beta1)?;
        kv.set("beta2", &mut c.beta2)?;
        kv.set("epsilon", &mut c.epsilon)?;
        kv.set("batch_size", &mut c.batch_size)?;
        kv.set("epochs", &mut c.epochs)?;
        kv.set("dropout_rate", &mut c.dropout_rate)?;
        kv.set("seed", &mut c.seed)?;
        Ok(c)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Square count matrix indexed `[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    pub classes: usize,
    pub counts: Vec<u64>,
}

impl Confusion {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn add(&mut self, actual: usize, predicted: usize) {
        self.counts[actual * self.classes + predicted] += 1;
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, actual: usize) -> u64 {
        (0..self.classes).map(|j| self.get(actual, j)).sum()
    }
}

impl fmt::Display for Confusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.classes {
            let row: Vec<String> = (0..self.classes)
                .map(|j| self.get(i, j).to_string())
                .collect();
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch,{},train_loss,{:.6},train_acc,{:.6},val_acc,{:.6}",
            self.epoch, self.train_loss, self.train_acc, self.val_acc
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    /// Mean cross-entropy over the evaluated windows.
    pub loss: f64,
    pub confusion: Confusion,
    pub history: Vec<EpochRecord>,
}

impl Metrics {
    /// Epoch with the highest validation accuracy, if any.
    pub fn best_epoch(&self) -> Option<&EpochRecord> {
        self.history
            .iter()
            .fold(None, |best: Option<&EpochRecord>, r| match best {
                Some(b) if b.val_acc >= r.val_acc => Some(b),
                _ => Some(r),
            })
    }
}

fn check_set(
    spec: &NetworkSpec,
    set: &dyn WindowSet,
    name: &'static str,
) -> Result<(), TrainError> {
    if set.is_empty() {
        return Err(TrainError::EmptySet(name));
    }
    if set.shape() != spec.input {
        return Err(TrainError::WindowShape {
            expected: spec.input,
            found: set.shape(),
        });
    }
    Ok(())
}

/// Inference-mode accuracy, loss and confusion over `set`.
pub fn evaluate(
    spec: &NetworkSpec,
    params: &ParameterStore<f32>,
    set: &dyn WindowSet,
) -> Result<Metrics, TrainError> {
    check_set(spec, set, "evaluation")?;
    let classes = spec.num_outputs()?;
    if !spec.is_classifier() {
        return Err(NnError::NotClassifier.into());
    }
    let last = spec.layers.len() - 1;
    let chunks = set.len().div_ceil(EVAL_CHUNK);
    let parts = exec::map_indexed(chunks, |c| -> Result<Vec<(usize, usize, f64)>, NnError> {
        let end = ((c + 1) * EVAL_CHUNK).min(set.len());
        (c * EVAL_CHUNK..end)
            .map(|i| {
                let label = set.label(i).index();
                if label >= classes {
                    return Err(NnError::LabelOutOfRange { label, classes });
                }
                let (probs, trace) = forward(spec, params, set.window(i), Mode::Infer)?;
                let logits = &trace.activations[last];
                let loss = f64::from(log_sum_exp(logits) - logits[label]);
                Ok((label, argmax(&probs), loss))
            })
            .collect()
    });
    let mut confusion = Confusion::new(classes);
    let mut loss = 0.0;
    for part in parts {
        for (actual, predicted, l) in part? {
            confusion.add(actual, predicted);
            loss += l;
        }
    }
    let total = confusion.total() as f64;
    Ok(Metrics {
        accuracy: confusion.trace() as f64 / total,
        loss: loss / total,
        confusion,
        history: Vec::new(),
    })
}

/// Trains from a seeded initialisation. `on_epoch` sees every history record
/// as soon as it is produced.
pub fn train_with(
    spec: &NetworkSpec,
    train_set: &dyn WindowSet,
    val_set: &dyn WindowSet,
    config: &TrainingConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ParameterStore<f32>, Metrics), TrainError> {
    check_set(spec, train_set, "training")?;
    check_set(spec, val_set, "validation")?;
    if config.batch_size == 0 {
        return Err(TrainError::ZeroBatch);
    }
    let mut params = ParameterStore::<f32>::init(spec, config.seed)?;
    let mut adam = AdamState::new(&params, config.adam());
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(exec::derive_key(&[config.seed, epoch as u64, 0x5u64]));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<Sample<f32>> = idx
                .iter()
                .map(|&i| Sample {
                    input: train_set.window(i),
                    label: train_set.label(i).index(),
                })
                .collect();
            let seed = config.seed;
            let result = loss_and_grads(spec, &params, &batch, |i| {
                Mode::Train(MaskKey::new(seed, epoch as u64, b as u64, i as u64))
            })?;
            adam_step(&mut params, &result.grads, &mut adam)?;
            loss_sum += result.loss * batch.len() as f64;
            correct += result.correct;
        }
        let val = evaluate(spec, &params, val_set)?;
        let n = train_set.len() as f64;
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss: val.loss,
            val_acc: val.accuracy,
        };
        on_epoch(&record);
        history.push(record);
    }
    let mut metrics = evaluate(spec, &params, val_set)?;
    metrics.history = history;
    Ok((params, metrics))
}

pub fn train(
    spec: &NetworkSpec,
    train_set: &dyn WindowSet,
    val_set: &dyn WindowSet,
    config: &TrainingConfig,
) -> Result<(ParameterStore<f32>, Metrics), TrainError> {
    train_with(spec, train_set, val_set, config, |_| {})
}
