//! Regularizer training: the two-term L1 loss and Adam.

use std::io::Write;

use crate::error::{NettError, Result};
use crate::phantom::TrainingPair;
use crate::regularizer::{net_forward, net_forward_traced, net_pullback, NetGradient, NetParams};
use crate::rng::{self, purpose, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Weight of the `||Phi(x_a) - x_a||_1` term.
    pub gamma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Pairs held out for the loss log. Only applied when the dataset has at
    /// least twice as many pairs.
    pub holdout: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            gamma: 0.1,
            epochs: 50,
            batch_size: 10,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            holdout: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(NettError::InvalidParameter("learning_rate must be > 0".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(NettError::InvalidParameter("gamma must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(NettError::InvalidParameter("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(NettError::InvalidParameter("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `sum_a ||Phi(h_a) - x_a||_1 + gamma ||Phi(x_a) - x_a||_1`.
pub fn train_loss(theta: &NetParams, batch: &[TrainingPair], gamma: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(NettError::InvalidParameter("empty batch".into()));
    }
    let mut total = 0.0;
    for pair in batch {
        let side = pair.truth.side;
        let x = &pair.truth.image;
        total += l1(&net_forward(theta, &pair.corrupted, side)?, x);
        if gamma != 0.0 {
            total += gamma * l1(&net_forward(theta, x, side)?, x);
        }
    }
    Ok(total)
}

/// Loss of a batch and its gradient with respect to the weights. The L1
/// subgradient at 0 is taken as 0.
pub fn train_loss_and_grad(
    theta: &NetParams,
    batch: &[TrainingPair],
    gamma: f64,
) -> Result<(f64, NetGradient)> {
    if batch.is_empty() {
        return Err(NettError::InvalidParameter("empty batch".into()));
    }
    let mut grad = NetGradient::zeros_like(theta);
    let mut total = 0.0;
    let term = |input: &[f64], target: &[f64], side: usize, weight: f64, grad: &mut NetGradient| -> Result<f64> {
        let eval = net_forward_traced(theta, input, side)?;
        let cot: Vec<f64> = eval
            .output
            .iter()
            .zip(target)
            .map(|(o, t)| weight * sign(o - t))
            .collect();
        net_pullback(theta, &eval, &cot, grad, false)?;
        Ok(weight * l1(&eval.output, target))
    };
    for pair in batch {
        let side = pair.truth.side;
        total += term(&pair.corrupted, &pair.truth.image, side, 1.0, &mut grad)?;
        if gamma != 0.0 {
            total += term(&pair.truth.image, &pair.truth.image, side, gamma, &mut grad)?;
        }
    }
    Ok((total, grad))
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update on a flat parameter vector.
pub fn adam_update<'a>(
    params: impl Iterator<Item = &'a mut f64>,
    grad: impl Iterator<Item = &'a f64>,
    state: &mut AdamState,
    config: &TrainConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for (((p, g), m), v) in params.zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
    }
}

/// Adam step on network weights.
pub fn adam_step(theta: &mut NetParams, grad: &NetGradient, state: &mut AdamState, config: &TrainConfig) {
    adam_update(theta.iter_mut(), grad.iter(), state, config);
}

/// One row of the loss log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean per-pair loss over the epoch's batches.
    pub train_loss: f64,
    /// Mean per-pair loss on the held-out pairs after the epoch (NaN when
    /// nothing is held out).
    pub holdout_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub theta: NetParams,
    pub log: Vec<EpochLoss>,
}

/// Trains from `initial` for `config.epochs` epochs of shuffled mini-batches.
pub fn train(dataset: &[TrainingPair], initial: NetParams, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(NettError::InvalidParameter("training set is empty".into()));
    }
    let holdout = if dataset.len() >= 2 * config.holdout {
        config.holdout
    } else {
        0
    };
    let (train_set, held) = dataset.split_at(dataset.len() - holdout);
    let mut theta = initial;
    let mut state = AdamState::new(theta.parameter_count());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = rng::stream(config.seed, purpose::SHUFFLE, epoch as u64);
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<TrainingPair> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, grad) = train_loss_and_grad(&theta, &batch, config.gamma)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(NettError::NonFinite(format!(
                    "training loss or gradient at epoch {epoch}"
                )));
            }
            epoch_total += loss;
            adam_step(&mut theta, &grad, &mut state, config);
        }
        let holdout_loss = if held.is_empty() {
            f64::NAN
        } else {
            train_loss(&theta, held, config.gamma)? / held.len() as f64
        };
        log.push(EpochLoss {
            epoch: epoch + 1,
            train_loss: epoch_total / train_set.len() as f64,
            holdout_loss,
        });
    }
    Ok(TrainOutcome { theta, log })
}

/// Writes the loss log as CSV.
pub fn write_loss_csv<W: Write>(mut w: W, log: &[EpochLoss]) -> Result<()> {
    writeln!(w, "epoch,train_loss,holdout_loss")?;
    for row in log {
        writeln!(w, "{},{:e},{:e}", row.epoch, row.train_loss, row.holdout_loss)?;
    }
    Ok(())
}
