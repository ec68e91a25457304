use std::path::PathBuf;

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::network::{Example, Seq2SeqModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inverse-square-root learning rate with linear warmup:
/// `factor · d^-½ · min(step^-½, step · warmup^-3/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoamSchedule {
    pub factor: f64,
    pub d_model: usize,
    pub warmup: usize,
}

impl NoamSchedule {
    pub fn lr(&self, step: usize) -> f64 {
        let s = step.max(1) as f64;
        let w = self.warmup.max(1) as f64;
        self.factor * (self.d_model as f64).powf(-0.5) * s.powf(-0.5).min(s * w.powf(-1.5))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr_factor: f64,
    pub warmup: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    /// 0 disables periodic snapshots/checkpoints.
    pub checkpoint_every: usize,
    pub checkpoint_path: Option<PathBuf>,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            batch_size: 32,
            lr_factor: 1.0,
            warmup: 400,
            beta1: 0.9,
            beta2: 0.98,
            adam_eps: 1e-9,
            seed: 1,
            checkpoint_every: 100,
            checkpoint_path: None,
            log_every: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState<T> {
    pub step: usize,
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    /// (step, mean batch loss)
    pub loss_curve: Vec<(usize, f64)>,
}

struct Snapshot<T> {
    step: usize,
    params: Vec<T>,
    first_moment: Vec<T>,
    second_moment: Vec<T>,
}

/// Adam over a flat parameter buffer with a seed-determined batch order.
pub struct Trainer<T> {
    config: TrainConfig,
    schedule: NoamSchedule,
    state: TrainState<T>,
    order_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    snapshot: Option<Snapshot<T>>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(config: TrainConfig, model: &Seq2SeqModel<T>) -> Self {
        let n = model.num_params();
        let schedule = NoamSchedule {
            factor: config.lr_factor,
            d_model: model.config().d_model,
            warmup: config.warmup,
        };
        Trainer {
            order_rng: ChaCha8Rng::seed_from_u64(config.seed),
            dropout_rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15),
            config,
            schedule,
            state: TrainState {
                step: 0,
                first_moment: vec![T::zero(); n],
                second_moment: vec![T::zero(); n],
                loss_curve: Vec::new(),
            },
            order: Vec::new(),
            cursor: 0,
            snapshot: None,
        }
    }

    pub fn state(&self) -> &TrainState<T> {
        &self.state
    }

    pub fn into_state(self) -> TrainState<T> {
        self.state
    }

    fn next_batch(&mut self, n: usize) -> Vec<usize> {
        let size = self.config.batch_size.max(1).min(n);
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor >= self.order.len() {
                self.order = (0..n).collect();
                self.order.shuffle(&mut self.order_rng);
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }

    fn take_snapshot(&mut self, model: &Seq2SeqModel<T>) {
        self.snapshot = Some(Snapshot {
            step: self.state.step,
            params: model.params().data().to_vec(),
            first_moment: self.state.first_moment.clone(),
            second_moment: self.state.second_moment.clone(),
        });
    }

    fn restore(&mut self, model: &mut Seq2SeqModel<T>) -> usize {
        let snap = self
            .snapshot
            .as_ref()
            .expect("snapshot taken before training");
        model.params_mut().data_mut().copy_from_slice(&snap.params);
        self.state.first_moment.clone_from(&snap.first_moment);
        self.state.second_moment.clone_from(&snap.second_moment);
        self.state.step = snap.step;
        snap.step
    }

    /// One optimizer step on the given examples. Returns the batch loss.
    pub fn step(&mut self, model: &mut Seq2SeqModel<T>, batch: &[Example]) -> Result<f64> {
        if self.snapshot.is_none() {
            self.take_snapshot(model);
        }
        let smoothing = model.config().label_smoothing;
        let (loss, grads) =
            model.loss_and_gradient(batch, smoothing, Some(&mut self.dropout_rng))?;
        let step = self.state.step + 1;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            let restored_step = self.restore(model);
            warn!("non-finite loss at step {step}, restored step {restored_step}");
            return Err(Error::Divergence {
                step,
                restored_step,
            });
        }
        let lr = self.schedule.lr(step);
        let (b1, b2) = (self.config.beta1, self.config.beta2);
        let c1 = T::of(1.0 - b1.powi(step as i32));
        let c2 = T::of(1.0 - b2.powi(step as i32));
        let (b1, b2) = (T::of(b1), T::of(b2));
        let (lr, eps) = (T::of(lr), T::of(self.config.adam_eps));
        let one = T::one();
        let params = model.params_mut().data_mut();
        let m = &mut self.state.first_moment;
        let v = &mut self.state.second_moment;
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = b1 * m[i] + (one - b1) * g;
            v[i] = b2 * v[i] + (one - b2) * g * g;
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            params[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
        self.state.step = step;
        self.state.loss_curve.push((step, loss));
        Ok(loss)
    }

    /// Runs `config.steps` steps over `data`, checkpointing on schedule.
    pub fn train(&mut self, model: &mut Seq2SeqModel<T>, data: &[Example]) -> Result<()> {
        if data.is_empty() {
            if self.config.steps == 0 {
                return Ok(());
            }
            return Err(Error::Empty("training data"));
        }
        self.take_snapshot(model);
        for _ in 0..self.config.steps {
            let idx = self.next_batch(data.len());
            let batch: Vec<Example> = idx.iter().map(|&i| data[i].clone()).collect();
            let loss = self.step(model, &batch)?;
            let step = self.state.step;
            if self.config.log_every > 0 && step.is_multiple_of(self.config.log_every) {
                info!(
                    "step {step} loss {loss:.4} lr {:.2e}",
                    self.schedule.lr(step)
                );
            }
            if self.config.checkpoint_every > 0 && step.is_multiple_of(self.config.checkpoint_every)
            {
                self.take_snapshot(model);
                if let Some(path) = &self.config.checkpoint_path {
                    debug!("checkpoint at step {step} -> {}", path.display());
                    save_checkpoint(model, path)?;
                }
            }
        }
        Ok(())
    }
}

/// Trains `model` in place and returns the optimizer state.
pub fn train<T: Scalar>(
    model: &mut Seq2SeqModel<T>,
    data: &[Example],
    config: TrainConfig,
) -> Result<TrainState<T>> {
    let mut trainer = Trainer::new(config, model);
    trainer.train(model, data)?;
    Ok(trainer.into_state())
}
