//! Mini-batch training loop.

use super::{adam_step, AdamState, Gradients, Model, ModelSpec, NetInput};
use crate::error::{GaitError, Result};
use crate::losses::{mode_loss, LabelPair, LossConfig, LossMode};
use crate::rng;

/// Training hyperparameters. All randomness (init, shuffling) derives from
/// `seed`, so a fixed config reproduces bit-identical models.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
    pub loss_mode: LossMode,
    pub loss: LossConfig,
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainConfig {
            epochs: 600,
            batch_size: 64,
            lr_start: 1e-3,
            lr_end: 1e-6,
            seed,
            loss_mode: LossMode::FocalOrdinal,
            loss: LossConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(GaitError::InvalidInput("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(GaitError::InvalidInput("batch size must be >= 1".into()));
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end) {
            return Err(GaitError::InvalidInput(format!(
                "need lr_start >= lr_end > 0, got {} and {}",
                self.lr_start, self.lr_end
            )));
        }
        self.loss.validate()
    }
}

/// Exponential annealing from `lr_start` at epoch 0 down to `lr_end` at the
/// final epoch.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    debug_assert!(epoch < cfg.epochs);
    if cfg.epochs == 1 {
        return cfg.lr_start;
    }
    let frac = epoch as f64 / (cfg.epochs - 1) as f64;
    cfg.lr_start * (cfg.lr_end / cfg.lr_start).powf(frac)
}

/// A trained model plus the mean loss per epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub loss_history: Vec<f64>,
}

/// Trains a fresh model on labeled clips by mini-batch gradient descent
/// with Adam and seeded shuffling. Batch loss is the mean over samples.
pub fn train(
    items: &[(&NetInput, usize)],
    spec: &ModelSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(GaitError::InvalidInput("empty training set".into()));
    }
    for (_, label) in items {
        if *label >= spec.n_classes {
            return Err(GaitError::InvalidInput(format!(
                "label {} out of range for {} classes",
                label, spec.n_classes
            )));
        }
    }
    let labels: Vec<LabelPair> = items
        .iter()
        .map(|(_, l)| LabelPair::new(*l, spec.n_classes))
        .collect::<Result<_>>()?;

    let mut model = Model::init(*spec, cfg.seed);
    let mut adam = AdamState::new(spec);
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, cfg);
        let mut shuffle_rng = rng::stream(cfg.seed, "train_shuffle", epoch as u64);
        rng::shuffle(&mut shuffle_rng, &mut order);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let inv = 1.0 / batch.len() as f64;
            let mut grads = Gradients::zeros(spec);
            for &idx in batch {
                let (input, _) = items[idx];
                let fwd = model.forward(input)?;
                let loss = mode_loss(cfg.loss_mode, &labels[idx], &fwd.probs, &cfg.loss)?;
                epoch_loss += loss.value;
                let dlogits: Vec<f64> = loss.grad_logits.iter().map(|g| g * inv).collect();
                let sample_grads = model.backward(&fwd, &dlogits)?;
                grads.add_assign(&sample_grads);
            }
            adam_step(&mut model.params, &grads, &mut adam, lr);
        }
        let mean = epoch_loss / items.len() as f64;
        loss_history.push(mean);
        log::debug!("epoch {:>4}: lr {:.3e} mean loss {:.6}", epoch, lr, mean);
    }

    Ok(TrainOutcome {
        model,
        loss_history,
    })
}
