//! Gradients of the two training objectives and the two-stage training loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GcsError, Result};
use crate::split::{shuffle, SplitIndices, SplitSpec};

use super::adam::{AdamState, DecayMode};
use super::loss::{
    design_error, loss_forward, loss_inverse, weighted_error, InverseLoss, LossMode, LossWeights,
};
use super::mlp::{Head, Mlp, FORWARD_DIMS};

/// RNG stream reserved for the inverse network so both stages can share one
/// seed without sharing random draws.
const INVERSE_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Weight of the design-proximity term in the inverse loss.
    pub alpha: f64,
    pub seed: u64,
    /// (train, val, test) percentages.
    pub split: (u32, u32, u32),
    pub decay_mode: DecayMode,
    pub loss_mode: LossMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            weight_decay: 1.0,
            batch_size: 16,
            max_epochs: 500,
            patience: 50,
            alpha: 0.0,
            seed: 0,
            split: (80, 10, 10),
            decay_mode: DecayMode::Decoupled,
            loss_mode: LossMode::Elementwise,
        }
    }
}

impl TrainConfig {
    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed: self.seed,
            percents: self.split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite()
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0
            && self.alpha >= 0.0
            && self.alpha.is_finite();
        if !ok {
            return Err(GcsError::InvalidInput(format!(
                "invalid training config {self:?}"
            )));
        }
        self.split_spec().validate()
    }
}

/// Encoded (design, performance) rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearningSet {
    pub designs: Vec<Vec<f64>>,
    pub performances: Vec<Vec<f64>>,
}

impl LearningSet {
    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    pub fn rows(&self, indices: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            indices.iter().map(|&i| self.designs[i].clone()).collect(),
            indices
                .iter()
                .map(|&i| self.performances[i].clone())
                .collect(),
        )
    }

    fn pairs<'a>(&'a self, indices: &[usize]) -> Vec<(&'a [f64], &'a [f64])> {
        indices
            .iter()
            .map(|&i| (self.designs[i].as_slice(), self.performances[i].as_slice()))
            .collect()
    }
}

/// Batch-mean forward loss and its gradient with respect to every parameter.
pub fn forward_loss_gradient(
    net: &Mlp,
    batch: &[(&[f64], &[f64])],
    w: &LossWeights,
    mode: LossMode,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(GcsError::Empty("batch"));
    }
    let mut grads = vec![0.0; net.parameter_count()];
    let mut loss = 0.0;
    for (design, performance) in batch {
        let trace = net.trace(design)?;
        let (l, g) = weighted_error(&trace.output, performance, w, mode);
        loss += l;
        net.backward(&trace, &g, Some(&mut grads));
    }
    let n = batch.len() as f64;
    grads.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grads))
}

/// Gradient of the inverse loss. The forward block stays zero: the forward
/// network is frozen and only relays gradients to its input.
#[derive(Clone, Debug, PartialEq)]
pub struct TandemGradient {
    pub loss: InverseLoss,
    pub inverse: Vec<f64>,
    pub forward: Vec<f64>,
}

pub fn inverse_loss_gradient(
    forward: &Mlp,
    inverse: &Mlp,
    batch: &[(&[f64], &[f64])],
    w: &LossWeights,
    alpha: f64,
    mode: LossMode,
) -> Result<TandemGradient> {
    if batch.is_empty() {
        return Err(GcsError::Empty("batch"));
    }
    let mut grads = vec![0.0; inverse.parameter_count()];
    let (mut lp, mut ld) = (0.0, 0.0);
    for (design, performance) in batch {
        let inv = inverse.trace(performance)?;
        let fwd = forward.trace(&inv.output)?;
        let (lp_i, g_pred) = weighted_error(&fwd.output, performance, w, mode);
        let (ld_i, g_design) = design_error(&inv.output, design);
        lp += lp_i;
        ld += ld_i;
        let mut g_generated = forward.backward(&fwd, &g_pred, None);
        for (g, gd) in g_generated.iter_mut().zip(&g_design) {
            *g += alpha * gd;
        }
        inverse.backward(&inv, &g_generated, Some(&mut grads));
    }
    let n = batch.len() as f64;
    grads.iter_mut().for_each(|g| *g /= n);
    Ok(TandemGradient {
        loss: InverseLoss {
            performance: lp / n,
            design: ld / n,
            alpha,
        },
        inverse: grads,
        forward: vec![0.0; forward.parameter_count()],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Validation loss of the freshly initialized network.
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

#[derive(Clone, Debug)]
pub struct TrainedNet {
    pub net: Mlp,
    pub history: History,
}

fn check_split(split: &SplitIndices, n: usize) -> Result<()> {
    if split.train.is_empty() {
        return Err(GcsError::Empty("training split"));
    }
    if split.val.is_empty() {
        return Err(GcsError::Empty("validation split"));
    }
    if split
        .train
        .iter()
        .chain(&split.val)
        .chain(&split.test)
        .any(|&i| i >= n)
    {
        return Err(GcsError::InvalidInput("split index out of range".into()));
    }
    Ok(())
}

/// Mini-batch Adam with best-validation checkpointing and patience.
fn fit<E, G>(
    mut net: Mlp,
    data: &LearningSet,
    split: &SplitIndices,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    evaluate: E,
    gradient: G,
) -> Result<TrainedNet>
where
    E: Fn(&Mlp, &[(&[f64], &[f64])]) -> Result<f64>,
    G: Fn(&Mlp, &[(&[f64], &[f64])]) -> Result<(f64, Vec<f64>)>,
{
    let val = data.pairs(&split.val);
    let mask = net.decay_mask();
    let mut adam = AdamState::new(net.parameter_count());
    let mut history = History {
        initial_val_loss: evaluate(&net, &val)?,
        ..History::default()
    };
    history.best_val_loss = f64::INFINITY;
    let mut best = net.clone();
    let mut order = split.train.clone();
    for epoch in 1..=config.max_epochs {
        shuffle(&mut order, rng);
        let mut train_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = data.pairs(chunk);
            let (loss, grads) = gradient(&net, &batch)?;
            train_loss += loss * chunk.len() as f64;
            adam.step(
                net.params_mut(),
                &grads,
                Some(&mask),
                config.learning_rate,
                config.weight_decay,
                config.decay_mode,
            )?;
        }
        let val_loss = evaluate(&net, &val)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: train_loss / order.len() as f64,
            val_loss,
        });
        history.epochs_run = epoch;
        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best.params_mut().copy_from_slice(net.params());
        } else if epoch - history.best_epoch >= config.patience {
            history.stopped_early = true;
            break;
        }
        log::debug!(
            "epoch {epoch}: train {:.6e} val {val_loss:.6e}",
            train_loss / order.len() as f64
        );
    }
    Ok(TrainedNet { net: best, history })
}

fn forward_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn inverse_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INVERSE_STREAM);
    rng
}

/// The untrained forward network that `train_forward` starts from.
pub fn initial_forward(seed: u64) -> Mlp {
    Mlp::forward_network(&mut forward_rng(seed))
}

/// The untrained inverse network that `train_inverse` starts from.
pub fn initial_inverse(seed: u64) -> Mlp {
    Mlp::inverse_network(&mut inverse_rng(seed))
}

/// Stage one: trains the forward network on the weighted performance loss.
pub fn train_forward(
    data: &LearningSet,
    split: &SplitIndices,
    weights: &LossWeights,
    config: &TrainConfig,
) -> Result<TrainedNet> {
    config.validate()?;
    check_split(split, data.len())?;
    let mut rng = forward_rng(config.seed);
    let net = Mlp::forward_network(&mut rng);
    let mode = config.loss_mode;
    fit(
        net,
        data,
        split,
        config,
        &mut rng,
        |net, rows| {
            let preds = rows
                .iter()
                .map(|(d, _)| net.forward(d))
                .collect::<Result<Vec<_>>>()?;
            let targets: Vec<Vec<f64>> = rows.iter().map(|(_, p)| p.to_vec()).collect();
            loss_forward(&preds, &targets, weights, mode)
        },
        |net, batch| forward_loss_gradient(net, batch, weights, mode),
    )
}

/// Stage two: trains the inverse network through the frozen forward network.
pub fn train_inverse(
    data: &LearningSet,
    split: &SplitIndices,
    forward: &Mlp,
    weights: &LossWeights,
    config: &TrainConfig,
) -> Result<TrainedNet> {
    config.validate()?;
    check_split(split, data.len())?;
    if forward.dims() != FORWARD_DIMS || forward.head() != Head::Linear {
        return Err(GcsError::InvalidInput(format!(
            "forward network has architecture {:?}, expected {:?}",
            forward.dims(),
            FORWARD_DIMS
        )));
    }
    let mut rng = inverse_rng(config.seed);
    let net = Mlp::inverse_network(&mut rng);
    let (alpha, mode) = (config.alpha, config.loss_mode);
    fit(
        net,
        data,
        split,
        config,
        &mut rng,
        |inverse, rows| {
            let designs: Vec<Vec<f64>> = rows.iter().map(|(d, _)| d.to_vec()).collect();
            let perfs: Vec<Vec<f64>> = rows.iter().map(|(_, p)| p.to_vec()).collect();
            Ok(loss_inverse(&designs, &perfs, forward, inverse, weights, alpha, mode)?.total())
        },
        |inverse, batch| {
            let g = inverse_loss_gradient(forward, inverse, batch, weights, alpha, mode)?;
            Ok((g.loss.total(), g.inverse))
        },
    )
}
