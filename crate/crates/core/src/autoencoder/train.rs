use rand::seq::SliceRandom;
use rand::Rng;

use super::{codebook, Autoencoder};
use crate::channel::{noise_variance, streams, RngStream};
use crate::codec::GdrCodec;
use crate::error::{Error, Result};
use crate::nn::{mean_cross_entropy, AdamConfig, AdamState, Matrix};

/// Training recipe. Defaults: 150 epochs, batch 45, 2·10⁴ training
/// messages, 10⁶ test blocks, trained at 0 dB, Adam with learning rate 10⁻³.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub trained_ebn0_db: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 45,
            train_samples: 20_000,
            test_samples: 1_000_000,
            trained_ebn0_db: 0.0,
            learning_rate: 1e-3,
            seed: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("train_samples", self.train_samples),
            ("test_samples", self.test_samples),
        ] {
            if v == 0 {
                return Err(Error::Domain(format!("{name} must be at least 1")));
            }
        }
        if self.batch_size < 2 || self.train_samples < 2 {
            return Err(Error::Domain(
                "batch normalization needs batch_size and train_samples of at least 2".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Domain(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !self.trained_ebn0_db.is_finite() {
            return Err(Error::Domain("trained Eb/N0 must be finite".into()));
        }
        Ok(())
    }

    /// Batch boundaries for one epoch. The last batch keeps the remainder;
    /// a remainder of one row is folded into the preceding batch because
    /// batch statistics need two rows.
    pub fn batch_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut ranges: Vec<_> = (0..self.train_samples)
            .step_by(self.batch_size)
            .map(|start| start..(start + self.batch_size).min(self.train_samples))
            .collect();
        if ranges.len() > 1 && ranges.last().is_some_and(|r| r.len() == 1) {
            let last = ranges.pop().unwrap();
            ranges.last_mut().unwrap().end = last.end;
        }
        ranges
    }
}

/// Mean training loss of every epoch, in nats.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory(pub Vec<f64>);

impl LossHistory {
    pub fn epochs(&self) -> usize {
        self.0.len()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.0.last().copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Trains `model` end to end on `codec` over the AWGN channel at the
/// configured Eb/N0. Messages, shuffling and noise each draw from their own
/// stream of `config.seed`, and fresh noise is drawn for every presentation.
pub fn train(
    model: &mut Autoencoder,
    codec: &GdrCodec,
    config: &TrainingConfig,
) -> Result<LossHistory> {
    config.validate()?;
    if codec.vector_size() != model.vector_size() || codec.channel_uses() != model.channel_uses() {
        return Err(Error::InvalidInput(format!(
            "codec (M={}, n={}) does not match model (M={}, n={})",
            codec.vector_size(),
            codec.channel_uses(),
            model.vector_size(),
            model.channel_uses()
        )));
    }
    let sigma = noise_variance(codec.data_rate(), config.trained_ebn0_db)?.sqrt();
    let book = codebook(codec)?;
    let vector_size = codec.vector_size();
    let channel_uses = codec.channel_uses();

    let mut message_rng = RngStream::new(config.seed, streams::TRAIN_MESSAGES);
    let mut dataset: Vec<usize> = (0..config.train_samples)
        .map(|_| message_rng.random_range(0..codec.num_messages()) as usize)
        .collect();
    let mut shuffle_rng = RngStream::new(config.seed, streams::SHUFFLE);
    let mut noise_rng = RngStream::new(config.seed, streams::TRAIN_NOISE);

    let mut adam = AdamState::new(
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
        &model.param_sizes(),
    );
    model.meta.order = codec.order();
    model.meta.trained_ebn0_db = config.trained_ebn0_db;
    model.meta.seed = config.seed;

    let ranges = config.batch_ranges();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        dataset.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for range in &ranges {
            let rows = range.len();
            let mut targets = Matrix::zeros(rows, vector_size);
            for (r, &s) in dataset[range.clone()].iter().enumerate() {
                targets.row_mut(r).copy_from_slice(book.row(s));
            }
            let mut noise = Matrix::zeros(rows, channel_uses);
            for v in noise.as_mut_slice() {
                *v = sigma * noise_rng.gaussian();
            }
            let cache = model.forward_train(&targets, &noise)?;
            let loss = mean_cross_entropy(&targets, cache.probabilities())?.value;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch: epoch + 1,
                    loss,
                });
            }
            total += loss * rows as f64;
            let grads = model.backward(&cache, &targets)?;
            adam.step(&mut model.params_mut(), &grads.tensors())?;
        }
        let mean = total / config.train_samples as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged {
                epoch: epoch + 1,
                loss: mean,
            });
        }
        history.push(mean);
    }
    Ok(LossHistory(history))
}
