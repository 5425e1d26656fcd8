//! Small dense classifier used to produce logits at desk scale, and the
//! MC-Dropout and ensemble uncertainty baselines built on it.
//!
//! Hidden layers use ReLU; the output layer is linear and its values are the
//! raw predictions. Softmax only enters through the training loss and the
//! baselines' max-probability statistic.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::matrix::RowMatrix;
use crate::predictions::PredictionSet;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MC_RUNS: usize = 100;
pub const DEFAULT_MC_RATE: f64 = 0.2;
pub const MC_RATE_GRID: [f64; 3] = [0.1, 0.2, 0.4];
pub const DEFAULT_ENSEMBLE_SIZE: usize = 10;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Fully connected layer, weights row-major `[outputs × inputs]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (o, b) in self.biases.iter().enumerate() {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z: f64 = w.iter().zip(input).map(|(w, x)| w * x).sum();
            out.push(z + b);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub final_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModel {
    pub format_version: u32,
    /// `[d_in, hidden..., k]`.
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<DenseLayer>,
    /// Rate used during training; MC-Dropout takes its own rate.
    pub dropout_rate: f64,
    pub seed: u64,
    pub training: Option<TrainingMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 32],
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 32,
            dropout_rate: 0.0,
            seed: 0,
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::invalid(format!("dropout rate must be in [0, 1), got {rate}")))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|v| v / total).collect()
}

pub fn max_probability(logits: &[f64]) -> f64 {
    softmax(logits).into_iter().fold(0.0, f64::max)
}

/// Population (1/N) standard deviation.
pub fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    // deviations from the first value, so equal inputs give exactly 0 even
    // when their rounded mean is off by an ulp
    let Some(&first) = values.first() else {
        return f64::NAN;
    };
    let shifted: Vec<f64> = values.iter().map(|v| v - first).collect();
    let mean = shifted.iter().sum::<f64>() / n;
    let var = shifted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

/// Keep-masks for the inputs of every dense layer after the first.
pub type DropoutMasks = Vec<Vec<bool>>;

impl ToyModel {
    /// He-initialized network with zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::invalid(
                "a model needs at least input and output sizes, all non-zero",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                DenseLayer {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights: (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect(),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(ToyModel {
            format_version: MODEL_FORMAT_VERSION,
            layer_sizes: layer_sizes.to_vec(),
            layers,
            dropout_rate: 0.0,
            seed,
            training: None,
        })
    }

    /// Builds a model from explicit layers.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::invalid("a model needs at least one layer"))?;
        let mut sizes = vec![first.inputs];
        for layer in &layers {
            check_dim(*sizes.last().unwrap(), layer.inputs)?;
            check_dim(layer.inputs * layer.outputs, layer.weights.len())?;
            check_dim(layer.outputs, layer.biases.len())?;
            sizes.push(layer.outputs);
        }
        Ok(ToyModel {
            format_version: MODEL_FORMAT_VERSION,
            layer_sizes: sizes,
            layers,
            dropout_rate: 0.0,
            seed: 0,
            training: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().expect("non-empty")
    }

    /// Deterministic forward pass returning the logits.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), input.len())?;
        Ok(self.forward_inner(input, None, 0.0))
    }

    /// Forward pass with explicit keep-masks (inverted dropout at `rate`).
    pub fn forward_with_masks(&self, input: &[f64], masks: &[Vec<bool>], rate: f64) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), input.len())?;
        check_rate(rate)?;
        check_dim(self.layers.len() - 1, masks.len())?;
        for (mask, layer) in masks.iter().zip(&self.layers[1..]) {
            check_dim(layer.inputs, mask.len())?;
        }
        Ok(self.forward_inner(input, Some(masks), rate))
    }

    fn forward_inner(&self, input: &[f64], masks: Option<&[Vec<bool>]>, rate: f64) -> Vec<f64> {
        let mut act = input.to_vec();
        let mut next = Vec::new();
        let keep_scale = 1.0 / (1.0 - rate);
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                if let Some(masks) = masks {
                    for (a, &keep) in act.iter_mut().zip(&masks[l - 1]) {
                        *a = if keep { *a * keep_scale } else { 0.0 };
                    }
                }
            }
            layer.forward(&act, &mut next);
            if l + 1 < self.layers.len() {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut act, &mut next);
        }
        act
    }

    pub fn sample_masks(&self, rate: f64, rng: &mut impl Rng) -> DropoutMasks {
        self.layers[1..]
            .iter()
            .map(|layer| (0..layer.inputs).map(|_| !rng.random_bool(rate)).collect())
            .collect()
    }

    /// Logits for every row, in row order.
    pub fn logits(&self, features: &RowMatrix) -> Result<RowMatrix> {
        check_dim(self.input_dim(), features.cols())?;
        let rows: Vec<Vec<f64>> = (0..features.rows())
            .into_par_iter()
            .map(|i| self.forward_inner(features.row(i), None, 0.0))
            .collect();
        let mut out = RowMatrix::empty(self.classes());
        for row in &rows {
            out.push_row(row)?;
        }
        Ok(out)
    }

    /// Raw predictions with correctness against `labels`.
    pub fn predict_raw(&self, features: &RowMatrix, labels: &[usize]) -> Result<PredictionSet> {
        check_dim(features.rows(), labels.len())?;
        PredictionSet::new(self.logits(features)?, labels.to_vec())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.flush()?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let model: ToyModel = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        let mut checked = ToyModel::from_layers(model.layers.clone())?;
        check_dim(checked.layer_sizes.len(), model.layer_sizes.len())?;
        checked.dropout_rate = model.dropout_rate;
        checked.seed = model.seed;
        checked.training = model.training;
        Ok(checked)
    }
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

/// Trains on the dataset's train split.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<ToyModel> {
    let (features, labels) = dataset.train();
    train_on(&features, &labels, dataset.classes, config)
}

/// Minibatch Adam on softmax cross-entropy. Parameters of layer `l` are laid
/// out as weights followed by biases in the optimizer state.
pub fn train_on(
    features: &RowMatrix,
    labels: &[usize],
    classes: usize,
    config: &TrainConfig,
) -> Result<ToyModel> {
    check_dim(features.rows(), labels.len())?;
    if config.epochs == 0 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::invalid("batch size and learning rate must be positive"));
    }
    check_rate(config.dropout_rate)?;
    let mut present = vec![false; classes];
    for &l in labels {
        if l >= classes {
            return Err(Error::invalid(format!("label {l} out of range for {classes} classes")));
        }
        present[l] = true;
    }
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(Error::invalid("training data must contain at least two classes"));
    }

    let mut sizes = vec![features.cols()];
    sizes.extend(&config.hidden);
    sizes.push(classes);
    let mut model = ToyModel::init(&sizes, config.seed)?;
    model.dropout_rate = config.dropout_rate;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let param_len = |l: &DenseLayer| l.weights.len() + l.biases.len();
    let mut adam = AdamState {
        m: model.layers.iter().map(|l| vec![0.0; param_len(l)]).collect(),
        v: model.layers.iter().map(|l| vec![0.0; param_len(l)]).collect(),
        step: 0,
    };
    let mut grads: Vec<Vec<f64>> = model.layers.iter().map(|l| vec![0.0; param_len(l)]).collect();
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut final_loss = f64::NAN;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| g.fill(0.0));
            for &i in batch {
                let masks = (config.dropout_rate > 0.0)
                    .then(|| model.sample_masks(config.dropout_rate, &mut rng));
                loss_sum += backprop(
                    &model,
                    features.row(i),
                    labels[i],
                    masks.as_deref(),
                    config.dropout_rate,
                    &mut grads,
                );
            }
            let scale = 1.0 / batch.len() as f64;
            adam_step(&mut model, &mut adam, &grads, scale, config.learning_rate);
        }
        let loss = loss_sum / labels.len() as f64;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        final_loss = loss;
    }

    let logits = model.logits(features)?;
    let accuracy = PredictionSet::new(logits, labels.to_vec())?.accuracy();
    model.training = Some(TrainingMetadata {
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        beta1: ADAM_BETA1,
        beta2: ADAM_BETA2,
        epsilon: ADAM_EPS,
        final_loss,
        train_accuracy: accuracy,
    });
    Ok(model)
}

/// Accumulates the cross-entropy gradient of one sample into `grads` and
/// returns its loss.
fn backprop(
    model: &ToyModel,
    input: &[f64],
    label: usize,
    masks: Option<&[Vec<bool>]>,
    rate: f64,
    grads: &mut [Vec<f64>],
) -> f64 {
    let n_layers = model.layers.len();
    let keep_scale = 1.0 / (1.0 - rate);
    // inputs[l] is what layer l saw (after dropout), pre[l] its pre-activation
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    let mut act = input.to_vec();
    for (l, layer) in model.layers.iter().enumerate() {
        if l > 0 {
            if let Some(masks) = masks {
                for (a, &keep) in act.iter_mut().zip(&masks[l - 1]) {
                    *a = if keep { *a * keep_scale } else { 0.0 };
                }
            }
        }
        let mut z = Vec::new();
        layer.forward(&act, &mut z);
        let next = if l + 1 < n_layers {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.clone()
        };
        inputs.push(act);
        pre.push(z);
        act = next;
    }

    let max = act.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = max + act.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let loss = log_norm - act[label];
    let mut delta: Vec<f64> = softmax(&act);
    delta[label] -= 1.0;

    for l in (0..n_layers).rev() {
        let layer = &model.layers[l];
        let g = &mut grads[l];
        let (gw, gb) = g.split_at_mut(layer.weights.len());
        for (o, d) in delta.iter().enumerate() {
            gb[o] += d;
            let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
            for (gwi, x) in row.iter_mut().zip(&inputs[l]) {
                *gwi += d * x;
            }
        }
        if l == 0 {
            break;
        }
        let mut back = vec![0.0; layer.inputs];
        for (o, d) in delta.iter().enumerate() {
            let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (b, w) in back.iter_mut().zip(row) {
                *b += d * w;
            }
        }
        if let Some(masks) = masks {
            for (b, &keep) in back.iter_mut().zip(&masks[l - 1]) {
                *b = if keep { *b * keep_scale } else { 0.0 };
            }
        }
        for (b, z) in back.iter_mut().zip(&pre[l - 1]) {
            if *z <= 0.0 {
                *b = 0.0;
            }
        }
        delta = back;
    }
    loss
}

fn adam_step(model: &mut ToyModel, state: &mut AdamState, grads: &[Vec<f64>], scale: f64, lr: f64) {
    state.step += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.step);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.step);
    for (l, layer) in model.layers.iter_mut().enumerate() {
        let n_w = layer.weights.len();
        let (m, v, g) = (&mut state.m[l], &mut state.v[l], &grads[l]);
        for j in 0..g.len() {
            let grad = g[j] * scale;
            m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * grad;
            v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * grad * grad;
            let update = lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + ADAM_EPS);
            if j < n_w {
                layer.weights[j] -= update;
            } else {
                layer.biases[j - n_w] -= update;
            }
        }
    }
}

/// Standard deviation of the max-softmax probability over `runs` stochastic
/// forward passes with dropout at `rate`.
pub fn mc_dropout_score(
    model: &ToyModel,
    input: &[f64],
    rate: f64,
    runs: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    check_rate(rate)?;
    check_dim(model.input_dim(), input.len())?;
    if runs < 2 {
        return Err(Error::invalid("MC-Dropout needs at least two runs"));
    }
    if rate == 0.0 {
        return Ok(0.0);
    }
    let probs: Vec<f64> = (0..runs)
        .map(|_| {
            let masks = model.sample_masks(rate, rng);
            max_probability(&model.forward_inner(input, Some(&masks), rate))
        })
        .collect();
    Ok(population_std(&probs))
}

/// [`mc_dropout_score`] for every row. Row `i` draws from ChaCha stream `i`
/// of `seed`, so scores do not depend on batch order.
pub fn mc_dropout_scores(
    model: &ToyModel,
    inputs: &RowMatrix,
    rate: f64,
    runs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_dim(model.input_dim(), inputs.cols())?;
    (0..inputs.rows())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            mc_dropout_score(model, inputs.row(i), rate, runs, &mut rng)
        })
        .collect()
}

fn check_ensemble(models: &[ToyModel]) -> Result<()> {
    if models.len() < 2 {
        return Err(Error::invalid(format!(
            "an ensemble needs at least two members, got {}",
            models.len()
        )));
    }
    for m in &models[1..] {
        if m.layer_sizes != models[0].layer_sizes {
            return Err(Error::Shape {
                expected: models[0].layer_sizes.iter().product(),
                found: m.layer_sizes.iter().product(),
            });
        }
    }
    Ok(())
}

/// Standard deviation across members of the max-softmax probability.
pub fn ensemble_score(models: &[ToyModel], input: &[f64]) -> Result<f64> {
    check_ensemble(models)?;
    let probs = models
        .iter()
        .map(|m| m.forward(input).map(|l| max_probability(&l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(population_std(&probs))
}

pub fn ensemble_scores(models: &[ToyModel], inputs: &RowMatrix) -> Result<Vec<f64>> {
    check_ensemble(models)?;
    check_dim(models[0].input_dim(), inputs.cols())?;
    (0..inputs.rows())
        .into_par_iter()
        .map(|i| ensemble_score(models, inputs.row(i)))
        .collect()
}

/// Trains `members` models on the same data with seeds `seed, seed+1, ...`.
pub fn train_ensemble(dataset: &Dataset, config: &TrainConfig, members: usize) -> Result<Vec<ToyModel>> {
    (0..members)
        .into_par_iter()
        .map(|j| {
            let cfg = TrainConfig {
                seed: config.seed.wrapping_add(j as u64),
                ..config.clone()
            };
            train(dataset, &cfg)
        })
        .collect()
}
