use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{LabelGrid, ScoreTargets};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

use super::backward::{backward_f64, Gradient};
use super::forward::check_ids;
use super::loss::LossConfig;
use super::{ModelConfig, Parameters};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 10,
            epochs: 200,
            seed: 0,
            grad_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// One encoded segment mapped to vocabulary ids.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub ids: Vec<usize>,
    pub labels: LabelGrid,
    pub targets: ScoreTargets,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Parameters,
    /// Mean per-segment loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut Parameters, grad: &Gradient, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for (k, (p, g)) in params.values.iter_mut().zip(&grad.values).enumerate() {
            self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * g;
            self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            *p = (f64::from(*p) - lr * m_hat / (v_hat.sqrt() + ADAM_EPS)) as f32;
        }
    }
}

/// Mini-batch Adam over the summed batch loss, with global-norm clipping.
/// Per-segment gradients of one batch run in parallel and are summed in
/// batch order, so results do not depend on the thread count.
pub fn train(
    config: &ModelConfig,
    params: Parameters,
    corpus: &[TrainingExample],
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<TrainOutcome> {
    train_with(config, params, corpus, train_cfg, loss_cfg, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean loss)` after each epoch.
pub fn train_with(
    config: &ModelConfig,
    mut params: Parameters,
    corpus: &[TrainingExample],
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    train_cfg.validate()?;
    loss_cfg.validate()?;
    let layout = config.layout();
    if params.len() != layout.total {
        return Err(Error::ShapeMismatch {
            expected: layout.total,
            found: params.len(),
        });
    }
    for ex in corpus {
        check_ids(&layout, &ex.ids)?;
        if ex.labels.size() != ex.ids.len() {
            return Err(Error::ShapeMismatch {
                expected: ex.ids.len(),
                found: ex.labels.size(),
            });
        }
    }

    let mut rng = rng_from_seed(train_cfg.seed);
    let mut adam = Adam::new(layout.total);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut epoch_losses = Vec::with_capacity(train_cfg.epochs);

    for epoch in 0..train_cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(train_cfg.batch_size) {
            let w = params.to_f64();
            let results: Vec<(f64, Gradient)> = batch
                .par_iter()
                .map(|&k| {
                    let ex = &corpus[k];
                    backward_f64(&layout, &w, &ex.ids, &ex.labels, &ex.targets, loss_cfg)
                })
                .collect();
            let mut grad = Gradient::zeros(layout.total);
            for (loss, g) in &results {
                epoch_loss += loss;
                grad.add_assign(g);
            }
            let norm = grad.norm();
            if norm > train_cfg.grad_clip {
                grad.scale(train_cfg.grad_clip / norm);
            }
            adam.update(&mut params, &grad, train_cfg.learning_rate);
        }
        let mean = epoch_loss / corpus.len() as f64;
        epoch_losses.push(mean);
        on_epoch(epoch, mean);
    }
    Ok(TrainOutcome {
        params,
        epoch_losses,
    })
}
