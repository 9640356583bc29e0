//! Minibatch SGD with separate learning rates for the encoder and the type matrix.

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_gradients, Gradients, TrainingExample};
use super::metrics::{typing_metrics, TypingScores};
use super::TyperModel;
use crate::corpus::{encode_gold_types, GoldCoverage, TypingExample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Step size for token embeddings, projection and bias.
    pub encoder_lr: f64,
    /// Step size for the type matrix `E`.
    pub type_matrix_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Decision threshold for the per-epoch dev metrics.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            encoder_lr: 0.1,
            type_matrix_lr: 0.5,
            batch_size: 32,
            epochs: 10,
            seed: 0,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.encoder_lr > 0.0 && self.type_matrix_lr > 0.0) {
            return Err(Error::InvalidArgument("learning rates must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidArgument("threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-example summed BCE over the epoch's minibatches.
    pub mean_loss: f64,
    /// Macro scores on the dev set, when one was given.
    pub dev: Option<TypingScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Training examples with no in-vocabulary gold type.
    pub dropped_examples: usize,
    pub train_examples: usize,
    pub coverage: GoldCoverage,
}

impl TyperModel {
    /// `θ ← θ − lr · scale · ∇`, with `encoder_lr` for the encoder and `type_lr` for `E`.
    pub fn apply_gradients(&mut self, grads: &Gradients, encoder_lr: f64, type_lr: f64, scale: f64) {
        let d = self.dim();
        let enc = encoder_lr * scale;
        for (&row, g) in &grads.embeddings {
            for (w, gk) in self.embeddings_mut()[row * d..(row + 1) * d].iter_mut().zip(g) {
                *w -= enc * gk;
            }
        }
        for (w, g) in self.projection_mut().iter_mut().zip(&grads.projection) {
            *w -= enc * g;
        }
        for (w, g) in self.bias_mut().iter_mut().zip(&grads.bias) {
            *w -= enc * g;
        }
        let typ = type_lr * scale;
        for (w, g) in self.type_matrix_mut().iter_mut().zip(&grads.type_matrix) {
            *w -= typ * g;
        }
    }
}

pub(crate) fn prepare(
    model: &TyperModel,
    examples: &[TypingExample],
    coverage: &mut GoldCoverage,
) -> Result<Vec<TrainingExample>> {
    examples
        .iter()
        .map(|ex| {
            Ok(TrainingExample {
                input: model.featurize(&ex.mention, &ex.context)?,
                gold: encode_gold_types(ex, model.vocab(), coverage),
            })
        })
        .collect()
}

/// Trains `model` and returns it with a per-epoch report.
pub fn train(
    model: TyperModel,
    train_examples: &[TypingExample],
    dev_examples: &[TypingExample],
    config: &TrainConfig,
) -> Result<(TyperModel, TrainReport)> {
    train_with_observer(model, train_examples, dev_examples, config, |_| {})
}

/// As [`train`], calling `on_epoch` after every epoch.
pub fn train_with_observer(
    mut model: TyperModel,
    train_examples: &[TypingExample],
    dev_examples: &[TypingExample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(TyperModel, TrainReport)> {
    config.validate()?;
    let mut coverage = GoldCoverage::default();
    let prepared = prepare(&model, train_examples, &mut coverage)?;
    let total = prepared.len();
    let train_set: Vec<TrainingExample> = prepared.into_iter().filter(|ex| ex.gold.popcount() > 0).collect();
    let dropped = total - train_set.len();
    if train_set.is_empty() {
        return Err(Error::EmptyInput(
            "no training example has an in-vocabulary gold type".into(),
        ));
    }
    let dev_set = prepare(&model, dev_examples, &mut GoldCoverage::default())?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport {
        epochs: Vec::with_capacity(config.epochs),
        dropped_examples: dropped,
        train_examples: train_set.len(),
        coverage,
    };
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i].clone()));
            let (loss, grads) = loss_gradients(&model, &batch)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence { epoch, step, loss });
            }
            epoch_loss += loss;
            model.apply_gradients(
                &grads,
                config.encoder_lr,
                config.type_matrix_lr,
                1.0 / batch.len() as f64,
            );
        }
        if !model.is_finite() {
            return Err(Error::Divergence {
                epoch,
                step: order.len().div_ceil(config.batch_size),
                loss: f64::NAN,
            });
        }
        let dev = if dev_set.is_empty() {
            None
        } else {
            Some(evaluate_prepared(&model, &dev_set, config.threshold)?)
        };
        let stats = EpochStats {
            epoch,
            mean_loss: epoch_loss / train_set.len() as f64,
            dev,
        };
        match &stats.dev {
            Some(s) => info!(
                "epoch {epoch}: loss {:.6} dev P {:.4} R {:.4} F1 {:.4}",
                stats.mean_loss, s.precision, s.recall, s.f1
            ),
            None => info!("epoch {epoch}: loss {:.6}", stats.mean_loss),
        }
        on_epoch(&stats);
        report.epochs.push(stats);
    }
    Ok((model, report))
}

fn evaluate_prepared(model: &TyperModel, set: &[TrainingExample], threshold: f64) -> Result<TypingScores> {
    let mut preds = Vec::with_capacity(set.len());
    let mut golds = Vec::with_capacity(set.len());
    for ex in set {
        preds.push(model.type_probabilities(&model.encode(&ex.input))?);
        golds.push(ex.gold.clone());
    }
    typing_metrics(&preds, &golds, threshold)
}

/// Macro P/R/F1 of `model` on raw examples.
pub fn evaluate_typing(model: &TyperModel, examples: &[TypingExample], threshold: f64) -> Result<TypingScores> {
    let set = prepare(model, examples, &mut GoldCoverage::default())?;
    evaluate_prepared(model, &set, threshold)
}
