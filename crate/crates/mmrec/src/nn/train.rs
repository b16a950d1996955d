//! Mini-batch training with Adam, seeded shuffling, and early stopping on
//! validation loss.
//!
//! The per-batch loss is the mean over users of the per-user item-summed
//! loss, which keeps the learning rate independent of batch size. The
//! parameters returned are those of the epoch with the minimum validation
//! loss. Everything is driven by one seeded RNG, so a fixed seed gives a
//! bit-identical trajectory.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::encoders::sequence::EncodedStep;
use crate::error::{Error, Result};
use crate::nn::adam::{Adam, AdamConfig};
use crate::nn::loss::{loss_and_grad, LossKind, WeightedTarget};
use crate::nn::network::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            max_epochs: 200,
            patience: 5,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::config("batch size must be ≥ 1"));
        }
        if self.patience < 1 {
            return Err(Error::config("early-stop patience must be ≥ 1"));
        }
        if self.max_epochs < 1 {
            return Err(Error::config("max epochs must be ≥ 1"));
        }
        Ok(())
    }
}

/// One training example: an encoded event sequence and its weighted loss
/// targets (one hard target, plus optional distillation terms).
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub steps: Vec<EncodedStep>,
    pub targets: Vec<WeightedTarget>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// 1-based index of the epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_valid_loss: f64,
}

/// Trains `net` in place; on return `net` holds the parameters from the
/// best-validation epoch.
pub fn train(
    net: &mut Network,
    loss: LossKind,
    train_set: &[TrainSample],
    valid_set: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::input("empty training set"));
    }
    if valid_set.is_empty() {
        return Err(Error::input("empty validation set"));
    }

    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam, net);
    let mut grads = net.zeros_like();

    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(usize, f64, Network)> = None;
    let mut epochs_since_best = 0usize;
    let mut log = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in indices.chunks(cfg.batch_size).enumerate() {
            grads.for_each_tensor_mut(&mut |_, t| t.fill(0.0));
            let mut batch_loss = 0.0;
            for &i in batch {
                let sample = &train_set[i];
                let (logits, cache) = net.forward(&sample.steps, Some(&mut rng))?;
                let (l, grad_logits) = loss_and_grad(loss, &logits, &sample.targets);
                batch_loss += l;
                net.backward(&cache, &grad_logits, &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: batch_idx,
                    msg: "non-finite training loss".into(),
                });
            }
            grads.for_each_tensor_mut(&mut |_, t| {
                for g in t.iter_mut() {
                    *g *= scale;
                }
            });
            adam.update(net, &grads);
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let valid_loss = evaluate_loss(net, loss, valid_set)?;
        if !valid_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                batch: 0,
                msg: "non-finite validation loss".into(),
            });
        }
        log.push(EpochStats {
            epoch,
            train_loss,
            valid_loss,
        });

        let improved = best.as_ref().map(|(_, v, _)| valid_loss < *v).unwrap_or(true);
        if improved {
            best = Some((epoch, valid_loss, net.clone()));
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                break;
            }
        }
    }

    let (best_epoch, best_valid_loss, best_net) = best.expect("at least one epoch ran");
    *net = best_net;
    Ok(TrainReport {
        epochs: log,
        best_epoch,
        best_valid_loss,
    })
}

/// Mean per-user loss at inference (no dropout).
pub fn evaluate_loss(net: &Network, loss: LossKind, samples: &[TrainSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::input("empty evaluation set"));
    }
    let mut total = 0.0;
    for sample in samples {
        let (logits, _) = net.forward(&sample.steps, None)?;
        let (l, _) = loss_and_grad(loss, &logits, &sample.targets);
        total += l;
    }
    Ok(total / samples.len() as f64)
}
