//! Edge-popup ticket search with global top-k sparsity restricted to FREE
//! positions, straight-through score gradients, SGD-with-momentum / AdamW,
//! and cosine learning-rate decay.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::freeze::{Cell, FreezeMask, FreezePlan};
use crate::nn::{self, ArchSpec, BatchNormState, Mode};
use crate::rng::{InitKind, Purpose, StreamKey};
use crate::tensor::Tensor;
use crate::{freeze, rng};

/// Searchable state: fixed seed-derived weights, trainable scores, and the
/// freezing mask. Weights never change after construction.
#[derive(Debug, Clone)]
pub struct TicketModel {
    pub arch: ArchSpec,
    pub global_seed: u64,
    pub init: InitKind,
    pub weights: Vec<Tensor>,
    pub scores: Vec<Tensor>,
    pub plan: FreezePlan,
    pub freeze: FreezeMask,
    /// Target SLT sparsity k: fraction of parameters inactive in the ticket.
    pub sparsity: f32,
    pub bn: Vec<Option<BatchNormState>>,
}

impl TicketModel {
    /// Materialize the freezing mask and draw weights and scores from seed.
    /// For SKC the per-layer scaling sparsity is the global target k (the
    /// realized per-layer value is only known after search).
    pub fn new(
        arch: ArchSpec,
        global_seed: u64,
        init: InitKind,
        plan: FreezePlan,
        sparsity: f32,
    ) -> Result<Self> {
        let init = init.with_sparsity(sparsity);
        let freeze_mask = freeze::materialize_mask(&plan, global_seed);
        let mut weights = arch.zero_params();
        let mut scores = arch.zero_params();
        for &li in &arch.param_layers() {
            let spec = &arch.layers[li];
            weights[li] =
                rng::init_weights(spec, init, StreamKey::new(global_seed, li as u32, Purpose::Weights))?;
            scores[li] = rng::init_scores(spec, StreamKey::new(global_seed, li as u32, Purpose::Scores))?;
        }
        let bn = arch.fresh_bn();
        Ok(TicketModel {
            arch,
            global_seed,
            init,
            weights,
            scores,
            plan,
            freeze: freeze_mask,
            sparsity,
            bn,
        })
    }

    /// Number of active parameters the ticket must have: round((1-k) N).
    pub fn active_target(&self) -> usize {
        let n = self.plan.total_params() as f64;
        ((1.0 - self.sparsity as f64) * n).round() as usize
    }

    /// Checksum of the weight tensors; search must leave it unchanged.
    pub fn weights_hash(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for w in &self.weights {
            for v in &w.data {
                h.update(&v.to_le_bytes());
            }
        }
        h.finalize()
    }

    /// Realized per-layer sparsity of a given effective mask.
    pub fn realized_layer_sparsity(&self, masks: &[Tensor]) -> Vec<f32> {
        self.plan
            .layers
            .iter()
            .map(|lp| {
                let active: f32 = masks[lp.layer_index].data.iter().sum();
                1.0 - active / lp.size as f32
            })
            .collect()
    }
}

/// Supermask from the current scores: all LOCKED positions plus the globally
/// top-scored FREE positions, up to round((1-k) N) active parameters.
/// PRUNED positions are never active. Ties break deterministically by
/// (higher score, lower layer index, lower flat index).
pub fn effective_mask(model: &TicketModel) -> Result<Vec<Tensor>> {
    let locked = model.plan.total_locked();
    let free_total = model.plan.total_free();
    let target = model.active_target() as i64;
    let need = target - locked as i64;
    if need < 0 || need > free_total as i64 {
        return Err(Error::WindowViolation {
            k: model.sparsity,
            lower: model.plan.prune_ratio,
            upper: 1.0 - model.plan.lock_ratio,
            required: need,
            available: free_total,
        });
    }
    let need = need as usize;

    let mut candidates: Vec<(f32, u32, u32)> = Vec::with_capacity(free_total);
    for (slot, lm) in model.freeze.layers.iter().enumerate() {
        let scores = &model.scores[lm.layer_index];
        for (i, cell) in lm.cells.iter().enumerate() {
            if *cell == Cell::Free {
                candidates.push((scores.data[i], slot as u32, i as u32));
            }
        }
    }
    let better = |a: &(f32, u32, u32), b: &(f32, u32, u32)| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    };
    if need > 0 && need < candidates.len() {
        candidates.select_nth_unstable_by(need - 1, better);
    }

    let mut masks: Vec<Tensor> = model
        .arch
        .layers
        .iter()
        .map(|l| if l.has_params() { Tensor::zeros(&l.param_shape()) } else { Tensor::empty() })
        .collect();
    for lm in &model.freeze.layers {
        let m = &mut masks[lm.layer_index];
        for (i, cell) in lm.cells.iter().enumerate() {
            if *cell == Cell::Locked {
                m.data[i] = 1.0;
            }
        }
    }
    for &(_, slot, idx) in candidates.iter().take(need) {
        let li = model.freeze.layers[slot as usize].layer_index;
        masks[li].data[idx as usize] = 1.0;
    }
    Ok(masks)
}

/// Straight-through score gradient: g_s = grad_effective_weight * w on FREE
/// positions, zero on PRUNED and LOCKED ones.
pub fn score_gradient(model: &TicketModel, grad_effective: &[Tensor]) -> Vec<Tensor> {
    let mut out: Vec<Tensor> = model
        .arch
        .layers
        .iter()
        .map(|l| if l.has_params() { Tensor::zeros(&l.param_shape()) } else { Tensor::empty() })
        .collect();
    for lm in &model.freeze.layers {
        let li = lm.layer_index;
        let w = &model.weights[li];
        let g = &grad_effective[li];
        let o = &mut out[li];
        for (i, cell) in lm.cells.iter().enumerate() {
            if *cell == Cell::Free {
                o.data[i] = g.data[i] * w.data[i];
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    SgdMomentum,
    AdamW,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd_momentum" | "sgd" => Ok(OptimizerKind::SgdMomentum),
            "adamw" => Ok(OptimizerKind::AdamW),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub optimizer: OptimizerKind,
    pub lr0: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    pub batch_size: usize,
    pub epochs: usize,
    /// Steps between supermask recomputations; 1 regenerates per minibatch.
    pub topk_interval: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            optimizer: OptimizerKind::SgdMomentum,
            lr0: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 128,
            epochs: 10,
            topk_interval: 1,
        }
    }
}

pub fn cosine_lr(lr0: f32, t: usize, total: usize) -> f32 {
    let frac = t as f32 / total.max(1) as f32;
    lr0 * 0.5 * (1.0 + (std::f32::consts::PI * frac).cos())
}

const ADAM_BETA1: f32 = 0.9;
const ADAM_BETA2: f32 = 0.999;
const ADAM_EPS: f32 = 1e-8;

/// Score optimizer. Updates only FREE positions; weight decay is decoupled
/// for AdamW and folded into the gradient before momentum for SGD.
pub struct Optimizer {
    kind: OptimizerKind,
    momentum: f32,
    weight_decay: f32,
    vel: Vec<Tensor>,
    adam_v: Vec<Tensor>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, momentum: f32, weight_decay: f32, arch: &ArchSpec) -> Self {
        Optimizer {
            kind,
            momentum,
            weight_decay,
            vel: arch.zero_params(),
            adam_v: arch.zero_params(),
            t: 0,
        }
    }

    pub fn step(
        &mut self,
        scores: &mut [Tensor],
        grads: &[Tensor],
        freeze: &FreezeMask,
        lr: f32,
    ) {
        self.t += 1;
        let wd = self.weight_decay;
        for lm in &freeze.layers {
            let li = lm.layer_index;
            let s = &mut scores[li];
            let g = &grads[li];
            let vel = &mut self.vel[li];
            let av = &mut self.adam_v[li];
            match self.kind {
                OptimizerKind::SgdMomentum => {
                    for (i, cell) in lm.cells.iter().enumerate() {
                        if *cell != Cell::Free {
                            continue;
                        }
                        let grad = g.data[i] + wd * s.data[i];
                        vel.data[i] = self.momentum * vel.data[i] + grad;
                        s.data[i] -= lr * vel.data[i];
                    }
                }
                OptimizerKind::AdamW => {
                    let bc1 = 1.0 - ADAM_BETA1.powi(self.t);
                    let bc2 = 1.0 - ADAM_BETA2.powi(self.t);
                    for (i, cell) in lm.cells.iter().enumerate() {
                        if *cell != Cell::Free {
                            continue;
                        }
                        let grad = g.data[i];
                        vel.data[i] = ADAM_BETA1 * vel.data[i] + (1.0 - ADAM_BETA1) * grad;
                        av.data[i] = ADAM_BETA2 * av.data[i] + (1.0 - ADAM_BETA2) * grad * grad;
                        let m_hat = vel.data[i] / bc1;
                        let v_hat = av.data[i] / bc2;
                        s.data[i] -= lr * (m_hat / (v_hat.sqrt() + ADAM_EPS)) + lr * wd * s.data[i];
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f32,
    pub val_acc: f32,
    pub lr: f32,
}

pub struct SearchOutcome {
    /// Model restored to the best-validation state (scores + bn statistics).
    pub model: TicketModel,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_val_acc: f32,
}

/// Classification accuracy of a fixed (weights, masks) pair on a split.
pub fn evaluate(
    arch: &ArchSpec,
    weights: &[Tensor],
    masks: &[Tensor],
    bn: &mut [Option<BatchNormState>],
    data: &Dataset,
    split: &crate::data::Split,
    batch_size: usize,
) -> Result<f32> {
    if split.n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut correct = 0usize;
    let mut at = 0usize;
    while at < split.n {
        let end = (at + batch_size).min(split.n);
        let idxs: Vec<usize> = (at..end).collect();
        let (x, labels) = split.gather(&idxs, &data.sample_shape);
        let (logits, _) = nn::forward(arch, weights, masks, bn, &x, Mode::Eval)?;
        let classes = arch.num_classes;
        for (b, &label) in labels.iter().enumerate() {
            let row = &logits.data[b * classes..(b + 1) * classes];
            let mut best = 0usize;
            for c in 1..classes {
                if row[c] > row[best] {
                    best = c;
                }
            }
            if best == label {
                correct += 1;
            }
        }
        at = end;
    }
    Ok(correct as f32 / split.n as f32)
}

pub fn search(model: TicketModel, config: &SearchConfig, data: &Dataset) -> Result<SearchOutcome> {
    search_observed(model, config, data, |_, _| Ok(()))
}

/// Search loop with a per-step observer (used by invariant checks). The
/// observer sees the model and the supermask in effect after each update.
pub fn search_observed(
    mut model: TicketModel,
    config: &SearchConfig,
    data: &Dataset,
    mut observe: impl FnMut(&TicketModel, &[Tensor]) -> Result<()>,
) -> Result<SearchOutcome> {
    if data.train.n == 0 || data.val.n == 0 {
        return Err(Error::EmptyDataset);
    }
    let steps_per_epoch = data.train.n.div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut optimizer =
        Optimizer::new(config.optimizer, config.momentum, config.weight_decay, &model.arch);
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut best: Option<(Vec<Tensor>, Vec<Option<BatchNormState>>, usize, f32)> = None;
    let mut masks = effective_mask(&model)?;
    let mut t = 0usize;

    for epoch in 0..config.epochs {
        let order = epoch_order(model.global_seed, epoch, data.train.n);
        let mut loss_sum = 0.0f64;
        let mut lr = config.lr0;
        for chunk in order.chunks(config.batch_size) {
            if t % config.topk_interval.max(1) == 0 {
                masks = effective_mask(&model)?;
            }
            let (x, labels) = data.train.gather(chunk, &data.sample_shape);
            let (logits, cache) =
                nn::forward(&model.arch, &model.weights, &masks, &mut model.bn, &x, Mode::Train)?;
            let (loss, grad_logits) = nn::cross_entropy(&logits, &labels)?;
            loss_sum += loss as f64;
            let (grads, _) = nn::backward(&model.arch, &model.weights, &masks, &cache, &grad_logits)?;
            let g_s = score_gradient(&model, &grads);
            lr = cosine_lr(config.lr0, t, total_steps);
            optimizer.step(&mut model.scores, &g_s, &model.freeze, lr);
            t += 1;
            observe(&model, &masks)?;
        }
        masks = effective_mask(&model)?;
        let val_acc = evaluate(
            &model.arch,
            &model.weights,
            &masks,
            &mut model.bn,
            data,
            &data.val,
            config.batch_size,
        )?;
        metrics.push(EpochMetrics {
            epoch,
            train_loss: (loss_sum / steps_per_epoch as f64) as f32,
            val_acc,
            lr,
        });
        let improved = best.as_ref().map_or(true, |(_, _, _, acc)| val_acc > *acc);
        if improved {
            best = Some((model.scores.clone(), model.bn.clone(), epoch, val_acc));
        }
    }

    let (scores, bn, best_epoch, best_val_acc) = best.expect("epochs >= 1");
    model.scores = scores;
    model.bn = bn;
    Ok(SearchOutcome { model, metrics, best_epoch, best_val_acc })
}

pub(crate) fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    let key = StreamKey::new(seed, 0x4000_0000 | epoch as u32, Purpose::DataSplit);
    order.shuffle(&mut rng::stream(key));
    order
}
