//! Supervised training of both networks from a babbling dataset.
//!
//! Validation uses contiguous blocks of ticks rather than random samples:
//! neighbouring ticks are nearly identical, so a random split would leak.

use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use softarm_core::dataset::Dataset;

use crate::adam::{Adam, AdamConfig};
use crate::bilstm::{bilstm_forward, sum_and_range_node, BiLstmSpec, BiLstmWeights};
use crate::model::{assemble_features, ModelBundle, ModelKind, ACTION_HISTORY, CONFIG_HISTORY};
use crate::norm::Normalizer;
use crate::tape::{Graph, Var};
use crate::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub validation_fraction: f64,
    /// Length in ticks of the contiguous split blocks.
    pub block_len: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 64,
            max_epochs: 200,
            patience: 20,
            validation_fraction: 0.1,
            block_len: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NeuralError> {
        let ok = self.adam.learning_rate > 0.0
            && self.batch_size >= 1
            && self.max_epochs >= 1
            && self.block_len >= 1
            && self.validation_fraction > 0.0
            && self.validation_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(NeuralError::InvalidSpec(format!("bad training config {self:?}")))
        }
    }

    fn is_validation(&self, tick: usize) -> bool {
        let period = (1.0 / self.validation_fraction).round().max(2.0) as usize;
        (tick / self.block_len) % period == period - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean absolute validation error as a percentage of the `[−1, 1]` range.
    pub val_error_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_error_pct: f64,
    pub train_samples: usize,
    pub val_samples: usize,
    pub elapsed_secs: f64,
}

/// Per-module input and target matrices, rows aligned across modules.
#[derive(Debug, Clone)]
pub struct Supervised {
    pub inputs: Vec<Array2<f64>>,
    pub targets: Vec<Array2<f64>>,
}

impl Supervised {
    pub fn len(&self) -> usize {
        self.inputs.first().map_or(0, |a| a.nrows())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn from_rows(n: usize, inputs: &[Vec<f64>], targets: &[Vec<f64>], din: usize, dout: usize) -> Self {
        let block = |rows: &[Vec<f64>], width: usize, m: usize| {
            Array2::from_shape_fn((rows.len(), width), |(r, k)| rows[r][m * width + k])
        };
        Self {
            inputs: (0..n).map(|m| block(inputs, din, m)).collect(),
            targets: (0..n).map(|m| block(targets, dout, m)).collect(),
        }
    }

    fn rows(&self, idx: &[usize]) -> Supervised {
        Supervised {
            inputs: self.inputs.iter().map(|a| a.select(Axis(0), idx)).collect(),
            targets: self.targets.iter().map(|a| a.select(Axis(0), idx)).collect(),
        }
    }
}

/// Forward-model pairs: normalized encoder configuration to normalized state.
pub fn c2s_pairs(
    dataset: &Dataset,
    config: &TrainConfig,
) -> (Supervised, Supervised, Normalizer, Normalizer) {
    let n = dataset.module_count();
    let train: Vec<_> = dataset
        .records
        .iter()
        .enumerate()
        .filter(|(t, _)| !config.is_validation(*t))
        .map(|(_, r)| r)
        .collect();
    let in_norm = Normalizer::fit(train.iter().map(|r| r.encoder_configs.as_slice()));
    let out_norm = Normalizer::fit(train.iter().map(|r| r.true_state.as_slice()));
    let (mut tr_in, mut tr_out, mut va_in, mut va_out) = (vec![], vec![], vec![], vec![]);
    for (t, r) in dataset.records.iter().enumerate() {
        let x = in_norm.normalize(&r.encoder_configs);
        let y = out_norm.normalize(&r.true_state);
        if config.is_validation(t) {
            va_in.push(x);
            va_out.push(y);
        } else {
            tr_in.push(x);
            tr_out.push(y);
        }
    }
    (
        Supervised::from_rows(n, &tr_in, &tr_out, 3, 6),
        Supervised::from_rows(n, &va_in, &va_out, 3, 6),
        in_norm,
        out_norm,
    )
}

/// Controller pairs from a sliding window: the configuration reached after
/// tick `t` is the target, the four before it and the five previous actions
/// are history, and the action applied at `t` is the label. Windows that
/// would need ticks before the start, or that straddle the split, are
/// skipped.
pub fn c2a_pairs(
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(Supervised, Supervised, Normalizer), NeuralError> {
    let n = dataset.module_count();
    let recs = &dataset.records;
    let train_rows = recs
        .iter()
        .enumerate()
        .filter(|(t, _)| !config.is_validation(*t))
        .map(|(_, r)| r.encoder_configs.as_slice());
    let norm = Normalizer::fit(train_rows);
    let (mut tr_in, mut tr_out, mut va_in, mut va_out) = (vec![], vec![], vec![], vec![]);
    let first = CONFIG_HISTORY.max(ACTION_HISTORY);
    for t in first..recs.len() {
        let split = config.is_validation(t);
        if (t - first..t).any(|k| config.is_validation(k) != split) {
            continue;
        }
        let past_configs: Vec<&[f64]> = (1..=CONFIG_HISTORY)
            .map(|k| recs[t - k].encoder_configs.as_slice())
            .collect();
        let past_actions: Vec<&[f64]> = (1..=ACTION_HISTORY)
            .map(|k| recs[t - k].actions.as_slice())
            .collect();
        let input = assemble_features(&norm, n, &recs[t].encoder_configs, &past_configs, &past_actions)?;
        let x: Vec<f64> = input.features.iter().flatten().copied().collect();
        let y = recs[t].actions.clone();
        if split {
            va_in.push(x);
            va_out.push(y);
        } else {
            tr_in.push(x);
            tr_out.push(y);
        }
    }
    Ok((
        Supervised::from_rows(n, &tr_in, &tr_out, crate::C2A_FEATURES, 3),
        Supervised::from_rows(n, &va_in, &va_out, crate::C2A_FEATURES, 3),
        norm,
    ))
}

/// Network outputs per module for a batch, on the graph.
fn predict(
    g: &mut Graph,
    kind: ModelKind,
    spec: &BiLstmSpec,
    weights: &BiLstmWeights,
    inputs: &[Array2<f64>],
) -> Result<(Vec<Var>, Vec<Var>), NeuralError> {
    let vars = weights.leaves(g);
    let xs: Vec<Var> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let raw = bilstm_forward(g, spec, &vars, &xs)?;
    let out = match kind {
        ModelKind::ForwardModel => raw,
        ModelKind::Controller => raw
            .into_iter()
            .map(|r| sum_and_range_node(g, r))
            .collect::<Result<_, _>>()?,
    };
    Ok((vars.params, out))
}

/// Mean over modules of the per-module mean squared error.
fn mse(g: &mut Graph, preds: &[Var], targets: &[Array2<f64>]) -> Result<Var, NeuralError> {
    let mut total = None;
    for (p, t) in preds.iter().zip(targets) {
        let t = g.leaf(t.clone());
        let d = g.sub(*p, t)?;
        let sq = g.square(d);
        let m = g.mean(sq);
        total = Some(match total {
            None => m,
            Some(acc) => g.add(acc, m)?,
        });
    }
    let total = total.expect("at least one module");
    Ok(g.scale(total, 1.0 / preds.len() as f64))
}

/// Validation loss and normalized error, evaluated in fixed chunks.
pub fn evaluate(
    kind: ModelKind,
    spec: &BiLstmSpec,
    weights: &BiLstmWeights,
    data: &Supervised,
) -> Result<(f64, f64), NeuralError> {
    let len = data.len();
    if len == 0 {
        return Ok((f64::NAN, f64::NAN));
    }
    let (mut sq, mut abs, mut count) = (0.0, 0.0, 0usize);
    let idx: Vec<usize> = (0..len).collect();
    for chunk in idx.chunks(1024) {
        let part = data.rows(chunk);
        let mut g = Graph::new();
        let (_, preds) = predict(&mut g, kind, spec, weights, &part.inputs)?;
        for (p, t) in preds.iter().zip(&part.targets) {
            let d = g.value(*p) - t;
            sq += d.mapv(|x| x * x).sum();
            abs += d.mapv(f64::abs).sum();
            count += d.len();
        }
    }
    let count = count as f64;
    Ok((sq / count, abs / count / 2.0 * 100.0))
}

/// Generic minibatch loop with early stopping; returns the best weights.
pub fn fit(
    kind: ModelKind,
    spec: &BiLstmSpec,
    train: &Supervised,
    val: &Supervised,
    config: &TrainConfig,
) -> Result<(BiLstmWeights, TrainReport), NeuralError> {
    spec.validate()?;
    config.validate()?;
    if train.len() < 10 * config.batch_size {
        return Err(NeuralError::InsufficientData(format!(
            "{} training samples for batch size {}",
            train.len(),
            config.batch_size
        )));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = BiLstmWeights::init(spec, &mut rng);
    let mut adam = Adam::new(config.adam, weights.params().iter().map(|p| p.dim()));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, 0usize, weights.clone(), f64::NAN);
    let mut epochs = Vec::new();

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch = train.rows(idx);
            let mut g = Graph::new();
            let (params, preds) = predict(&mut g, kind, spec, &weights, &batch.inputs)?;
            let loss = mse(&mut g, &preds, &batch.targets)?;
            let value = g.scalar_value(loss);
            if !value.is_finite() {
                return Err(NeuralError::NonFiniteLoss { epoch, batch: b });
            }
            let mut grads = g.backward(loss)?;
            let grads: Vec<Array2<f64>> = params
                .iter()
                .map(|p| grads.take(*p).expect("parameters feed the loss"))
                .collect();
            adam.step(&mut weights.params_mut(), &grads);
            loss_sum += value;
            batches += 1;
        }
        let (val_loss, val_error_pct) = evaluate(kind, spec, &weights, val)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_loss,
            val_error_pct,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, weights.clone(), val_error_pct);
        } else if epoch - best.1 >= config.patience {
            break;
        }
    }
    let report = TrainReport {
        epochs,
        best_epoch: best.1,
        best_val_error_pct: best.3,
        train_samples: train.len(),
        val_samples: val.len(),
        elapsed_secs: start.elapsed().as_secs_f64(),
    };
    Ok((best.2, report))
}

pub fn train_c2s(
    dataset: &Dataset,
    spec: &BiLstmSpec,
    config: &TrainConfig,
) -> Result<(ModelBundle, TrainReport), NeuralError> {
    let (train, val, in_norm, out_norm) = c2s_pairs(dataset, config);
    let (weights, report) = fit(ModelKind::ForwardModel, spec, &train, &val, config)?;
    Ok((
        ModelBundle {
            kind: ModelKind::ForwardModel,
            spec: *spec,
            weights,
            module_count: dataset.module_count(),
            input_norm: Some(in_norm),
            output_norm: Some(out_norm),
            seed: config.seed,
        },
        report,
    ))
}

pub fn train_c2a(
    dataset: &Dataset,
    spec: &BiLstmSpec,
    config: &TrainConfig,
) -> Result<(ModelBundle, TrainReport), NeuralError> {
    let (train, val, norm) = c2a_pairs(dataset, config)?;
    let (weights, report) = fit(ModelKind::Controller, spec, &train, &val, config)?;
    Ok((
        ModelBundle {
            kind: ModelKind::Controller,
            spec: *spec,
            weights,
            module_count: dataset.module_count(),
            input_norm: Some(norm),
            output_norm: None,
            seed: config.seed,
        },
        report,
    ))
}
