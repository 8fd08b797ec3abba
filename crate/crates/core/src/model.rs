//! Reference classifier: a two-hidden-layer MLP trained with Adam.
//!
//! Everything is implemented directly over `f64` slices — initialization,
//! forward pass, softmax cross-entropy, analytic backprop, and the Adam
//! update — so training is a pure function of (data, config, seed) with no
//! hidden global state. Samples enter flattened time-major (t * C + c).
//!
//! Model selection tracks validation macro-F1 after every epoch and keeps
//! the earliest best epoch; with no validation set, the final epoch is used.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{standardize, DataError, Dataset, Standardizer};
use crate::metrics::{self, MetricError};
use crate::rng::{self, tags};
use crate::split::Split;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("input has {got} features, model expects {expected}")]
    InputSizeMismatch { expected: usize, got: usize },
    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("validation set is empty but selection needs validation scores")]
    EmptyValSet,
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("layer sizes must be positive")]
    ZeroDimension,
    #[error("{field} must be positive")]
    BadConfig { field: &'static str },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Weights and biases of the MLP: input -> hidden -> hidden -> classes,
/// ReLU between layers, all matrices row-major with fan-in on the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub d_in: usize,
    pub hidden: usize,
    pub k_out: usize,
    /// d_in x hidden.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// hidden x hidden.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// hidden x k_out.
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

impl MlpParams {
    pub fn n_weights(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len() + self.w3.len() + self.b3.len()
    }
}

/// How the reported model is chosen from the epoch history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSelection {
    /// Parameters from the epoch with the best validation macro-F1
    /// (earliest epoch on ties). Requires a validation set.
    BestValMacroF1,
    /// Parameters after the final epoch; no validation set needed.
    LastEpoch,
}

/// Training hyperparameters. Defaults: two hidden layers of 64, 100 epochs,
/// batches of 32, Adam at 1e-3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub selection: ModelSelection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_width: 64,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            selection: ModelSelection::BestValMacroF1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        for (field, ok) in [
            ("hidden_width", self.hidden_width >= 1),
            ("epochs", self.epochs >= 1),
            ("batch_size", self.batch_size >= 1),
            ("learning_rate", self.learning_rate > 0.0),
            ("adam_beta1", (0.0..1.0).contains(&self.adam_beta1)),
            ("adam_beta2", (0.0..1.0).contains(&self.adam_beta2)),
            ("adam_eps", self.adam_eps > 0.0),
        ] {
            if !ok {
                return Err(ModelError::BadConfig { field });
            }
        }
        Ok(())
    }
}

/// Per-epoch training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Mean training cross-entropy over the epoch's batches.
    pub train_loss: f64,
    /// `None` when there is no validation set.
    pub val_accuracy: Option<f64>,
    pub val_macro_f1: Option<f64>,
}

/// A trained classifier: parameters, the standardizer fitted on its
/// training set, and the training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: MlpParams,
    pub config: TrainConfig,
    pub standardizer: Standardizer,
    /// 1-based epoch the reported parameters come from.
    pub selected_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Glorot-uniform initialization: weights drawn from
/// `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`, biases zero.
/// Deterministic in `seed`.
pub fn init_model(
    d_in: usize,
    hidden: usize,
    k_out: usize,
    seed: u64,
) -> Result<MlpParams, ModelError> {
    if d_in == 0 || hidden == 0 || k_out == 0 {
        return Err(ModelError::ZeroDimension);
    }
    let mut stream = rng::stream(seed, &[tags::MODEL_INIT]);
    let mut layer = |fan_in: usize, fan_out: usize| -> Vec<f64> {
        let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        (0..fan_in * fan_out)
            .map(|_| stream.random_range(-bound..bound))
            .collect()
    };
    Ok(MlpParams {
        d_in,
        hidden,
        k_out,
        w1: layer(d_in, hidden),
        b1: vec![0.0; hidden],
        w2: layer(hidden, hidden),
        b2: vec![0.0; hidden],
        w3: layer(hidden, k_out),
        b3: vec![0.0; k_out],
    })
}

/// `out[b] += relu(x[b] * w + bias)` for a row-major batch.
fn dense_relu(x: &[f64], n: usize, d_in: usize, w: &[f64], bias: &[f64], out: &mut [f64]) {
    let d_out = bias.len();
    for b in 0..n {
        let row = &x[b * d_in..(b + 1) * d_in];
        let out_row = &mut out[b * d_out..(b + 1) * d_out];
        out_row.copy_from_slice(bias);
        for (i, &xi) in row.iter().enumerate() {
            let w_row = &w[i * d_out..(i + 1) * d_out];
            for (o, &wij) in out_row.iter_mut().zip(w_row) {
                *o += xi * wij;
            }
        }
        for o in out_row.iter_mut() {
            if *o < 0.0 {
                *o = 0.0;
            }
        }
    }
}

/// Linear layer without activation.
fn dense(x: &[f64], n: usize, d_in: usize, w: &[f64], bias: &[f64], out: &mut [f64]) {
    let d_out = bias.len();
    for b in 0..n {
        let row = &x[b * d_in..(b + 1) * d_in];
        let out_row = &mut out[b * d_out..(b + 1) * d_out];
        out_row.copy_from_slice(bias);
        for (i, &xi) in row.iter().enumerate() {
            let w_row = &w[i * d_out..(i + 1) * d_out];
            for (o, &wij) in out_row.iter_mut().zip(w_row) {
                *o += xi * wij;
            }
        }
    }
}

/// Numerically stable in-place softmax per row; returns nothing, rows of
/// `logits` become probabilities.
fn softmax_rows(logits: &mut [f64], n: usize, k: usize) {
    for b in 0..n {
        let row = &mut logits[b * k..(b + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

struct ForwardCache {
    h1: Vec<f64>,
    h2: Vec<f64>,
    /// Softmax probabilities, n x k.
    probs: Vec<f64>,
}

fn forward_cached(params: &MlpParams, x: &[f64], n: usize) -> ForwardCache {
    let mut h1 = vec![0.0; n * params.hidden];
    dense_relu(x, n, params.d_in, &params.w1, &params.b1, &mut h1);
    let mut h2 = vec![0.0; n * params.hidden];
    dense_relu(&h1, n, params.hidden, &params.w2, &params.b2, &mut h2);
    let mut probs = vec![0.0; n * params.k_out];
    dense(&h2, n, params.hidden, &params.w3, &params.b3, &mut probs);
    softmax_rows(&mut probs, n, params.k_out);
    ForwardCache { h1, h2, probs }
}

/// Class probabilities for a row-major batch of `n` flattened samples.
pub fn forward(params: &MlpParams, x: &[f64], n: usize) -> Result<Vec<f64>, ModelError> {
    if n == 0 {
        return Err(ModelError::EmptyBatch);
    }
    if x.len() != n * params.d_in {
        return Err(ModelError::InputSizeMismatch { expected: n * params.d_in, got: x.len() });
    }
    Ok(forward_cached(params, x, n).probs)
}

/// Gradients with the same shapes as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to every parameter.
pub fn loss_and_grad(
    params: &MlpParams,
    x: &[f64],
    labels: &[usize],
    n: usize,
) -> Result<(f64, MlpGrads), ModelError> {
    if n == 0 {
        return Err(ModelError::EmptyBatch);
    }
    if x.len() != n * params.d_in {
        return Err(ModelError::InputSizeMismatch { expected: n * params.d_in, got: x.len() });
    }
    if labels.len() != n {
        return Err(ModelError::InputSizeMismatch { expected: n, got: labels.len() });
    }
    let k = params.k_out;
    for &l in labels {
        if l >= k {
            return Err(ModelError::LabelOutOfRange { label: l, k });
        }
    }
    let h = params.hidden;
    let cache = forward_cached(params, x, n);

    // Loss: mean over the batch of -log p[label]. Probabilities come out of
    // an exact softmax, so re-log is stable enough for f64 away from exact
    // zeros, which the softmax cannot produce.
    let mut loss = 0.0;
    for (b, &label) in labels.iter().enumerate() {
        loss -= libm::log(cache.probs[b * k + label]);
    }
    loss /= n as f64;

    // dL/dlogits = (p - onehot) / n.
    let mut d_logits = cache.probs.clone();
    for (b, &label) in labels.iter().enumerate() {
        d_logits[b * k + label] -= 1.0;
    }
    for v in d_logits.iter_mut() {
        *v /= n as f64;
    }

    let mut grads = MlpGrads {
        w1: vec![0.0; params.w1.len()],
        b1: vec![0.0; h],
        w2: vec![0.0; params.w2.len()],
        b2: vec![0.0; h],
        w3: vec![0.0; params.w3.len()],
        b3: vec![0.0; k],
    };

    // Layer 3: logits = h2 * w3 + b3.
    for b in 0..n {
        let h2_row = &cache.h2[b * h..(b + 1) * h];
        let d_row = &d_logits[b * k..(b + 1) * k];
        for (i, &hv) in h2_row.iter().enumerate() {
            let g_row = &mut grads.w3[i * k..(i + 1) * k];
            for (g, &d) in g_row.iter_mut().zip(d_row) {
                *g += hv * d;
            }
        }
        for (g, &d) in grads.b3.iter_mut().zip(d_row) {
            *g += d;
        }
    }

    // dL/dh2 through w3, masked by ReLU.
    let mut d_h2 = vec![0.0; n * h];
    for b in 0..n {
        let d_row = &d_logits[b * k..(b + 1) * k];
        let h2_row = &cache.h2[b * h..(b + 1) * h];
        let dst = &mut d_h2[b * h..(b + 1) * h];
        for i in 0..h {
            if h2_row[i] > 0.0 {
                let w_row = &params.w3[i * k..(i + 1) * k];
                dst[i] = w_row.iter().zip(d_row).map(|(&w, &d)| w * d).sum();
            }
        }
    }

    // Layer 2: h2 = relu(h1 * w2 + b2).
    for b in 0..n {
        let h1_row = &cache.h1[b * h..(b + 1) * h];
        let d_row = &d_h2[b * h..(b + 1) * h];
        for (i, &hv) in h1_row.iter().enumerate() {
            if hv != 0.0 {
                let g_row = &mut grads.w2[i * h..(i + 1) * h];
                for (g, &d) in g_row.iter_mut().zip(d_row) {
                    *g += hv * d;
                }
            }
        }
        for (g, &d) in grads.b2.iter_mut().zip(d_row) {
            *g += d;
        }
    }

    let mut d_h1 = vec![0.0; n * h];
    for b in 0..n {
        let d_row = &d_h2[b * h..(b + 1) * h];
        let h1_row = &cache.h1[b * h..(b + 1) * h];
        let dst = &mut d_h1[b * h..(b + 1) * h];
        for i in 0..h {
            if h1_row[i] > 0.0 {
                let w_row = &params.w2[i * h..(i + 1) * h];
                dst[i] = w_row.iter().zip(d_row).map(|(&w, &d)| w * d).sum();
            }
        }
    }

    // Layer 1: h1 = relu(x * w1 + b1).
    for b in 0..n {
        let x_row = &x[b * params.d_in..(b + 1) * params.d_in];
        let d_row = &d_h1[b * h..(b + 1) * h];
        for (i, &xv) in x_row.iter().enumerate() {
            if xv != 0.0 {
                let g_row = &mut grads.w1[i * h..(i + 1) * h];
                for (g, &d) in g_row.iter_mut().zip(d_row) {
                    *g += xv * d;
                }
            }
        }
        for (g, &d) in grads.b1.iter_mut().zip(d_row) {
            *g += d;
        }
    }

    Ok((loss, grads))
}

/// First/second moment accumulators for Adam, one pair per parameter tensor.
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(
        &mut self,
        offset: usize,
        params: &mut [f64],
        grads: &[f64],
        config: &TrainConfig,
    ) {
        let (b1, b2) = (config.adam_beta1, config.adam_beta2);
        let t = self.t as f64;
        let corr1 = 1.0 - libm::pow(b1, t);
        let corr2 = 1.0 - libm::pow(b2, t);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[offset + i];
            let v = &mut self.v[offset + i];
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / corr1;
            let v_hat = *v / corr2;
            *p -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + config.adam_eps);
        }
    }
}

/// Flattens `dataset.samples[indices]` into a row-major feature batch after
/// applying `standardizer`, plus the matching labels.
fn gather(
    dataset: &Dataset,
    indices: &[usize],
    standardizer: &Standardizer,
) -> Result<(Vec<f64>, Vec<usize>), ModelError> {
    let d_in = dataset.meta.sample_len();
    let mut x = Vec::with_capacity(indices.len() * d_in);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        let values = standardizer.apply(&dataset.samples[i].values)?;
        x.extend_from_slice(values.as_slice());
        labels.push(dataset.samples[i].label);
    }
    Ok((x, labels))
}

/// Argmax per row; ties resolve to the smallest class index.
fn argmax_rows(probs: &[f64], k: usize) -> Vec<usize> {
    probs
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Trains the MLP on `split.train`, scoring `split.val` after each epoch.
///
/// The standardizer is fitted on the training indices only and becomes part
/// of the returned model. Mini-batches follow a seeded shuffle that is
/// redrawn each epoch from one stream, so the whole run is a deterministic
/// function of (dataset, split, config).
pub fn train(
    dataset: &Dataset,
    split: &Split,
    config: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(ModelError::EmptyTrainSet);
    }
    let with_val = !split.val.is_empty();
    if config.selection == ModelSelection::BestValMacroF1 && !with_val {
        return Err(ModelError::EmptyValSet);
    }

    let (standardized, standardizer) = standardize(dataset, &split.train)?;
    let d_in = standardized.meta.sample_len();
    let k = standardized.meta.n_classes();
    let identity = Standardizer {
        mean: vec![0.0; standardized.meta.n_channels],
        stddev: vec![1.0; standardized.meta.n_channels],
    };
    let (train_x, train_labels) = gather(&standardized, &split.train, &identity)?;
    let (val_x, val_labels) = gather(&standardized, &split.val, &identity)?;
    for &l in train_labels.iter().chain(&val_labels) {
        if l >= k {
            return Err(ModelError::LabelOutOfRange { label: l, k });
        }
    }

    let mut params = init_model(d_in, config.hidden_width, k, config.seed)?;
    let n_train = split.train.len();
    let sizes = [
        params.w1.len(),
        params.b1.len(),
        params.w2.len(),
        params.b2.len(),
        params.w3.len(),
        params.b3.len(),
    ];
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let mut adam = AdamState::new(sizes.iter().sum());
    let mut shuffle_stream = rng::stream(config.seed, &[tags::EPOCH_SHUFFLE]);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, MlpParams)> = None;
    let mut batch_x = Vec::new();
    let mut batch_labels = Vec::new();

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..n_train).collect();
        order.shuffle(&mut shuffle_stream);

        let mut loss_sum = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            batch_x.clear();
            batch_labels.clear();
            for &row in batch {
                batch_x.extend_from_slice(&train_x[row * d_in..(row + 1) * d_in]);
                batch_labels.push(train_labels[row]);
            }
            let (loss, grads) =
                loss_and_grad(&params, &batch_x, &batch_labels, batch.len())?;
            if !loss.is_finite() {
                return Err(ModelError::Diverged { epoch, batch: batch_no });
            }
            loss_sum += loss * batch.len() as f64;
            adam.t += 1;
            adam.step(offsets[0], &mut params.w1, &grads.w1, config);
            adam.step(offsets[1], &mut params.b1, &grads.b1, config);
            adam.step(offsets[2], &mut params.w2, &grads.w2, config);
            adam.step(offsets[3], &mut params.b2, &grads.b2, config);
            adam.step(offsets[4], &mut params.w3, &grads.w3, config);
            adam.step(offsets[5], &mut params.b3, &grads.b3, config);
        }
        let train_loss = loss_sum / n_train as f64;

        let (val_accuracy, val_macro_f1) = if with_val {
            let probs = forward(&params, &val_x, val_labels.len())?;
            let pred = argmax_rows(&probs, k);
            (
                Some(metrics::accuracy(k, &val_labels, &pred)?),
                Some(metrics::macro_f1(k, &val_labels, &pred)?),
            )
        } else {
            (None, None)
        };
        history.push(EpochRecord { train_loss, val_accuracy, val_macro_f1 });

        if config.selection == ModelSelection::BestValMacroF1 {
            let f1 = val_macro_f1.expect("validation enforced above");
            let improved = best.as_ref().is_none_or(|(best_f1, _, _)| f1 > *best_f1);
            if improved {
                best = Some((f1, epoch, params.clone()));
            }
        }
    }

    let (selected_epoch, params) = match config.selection {
        ModelSelection::BestValMacroF1 => {
            let (_, epoch, params) = best.expect("at least one epoch ran");
            (epoch, params)
        }
        ModelSelection::LastEpoch => (config.epochs, params),
    };

    Ok(TrainedModel {
        params,
        config: config.clone(),
        standardizer,
        selected_epoch,
        history,
    })
}

/// Predicted class per sample in `indices`, using the model's own
/// standardizer. Returns predictions and the full probability rows.
pub fn predict(
    model: &TrainedModel,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<(Vec<usize>, Vec<f64>), ModelError> {
    let d_in = dataset.meta.sample_len();
    if d_in != model.params.d_in {
        return Err(ModelError::InputSizeMismatch { expected: model.params.d_in, got: d_in });
    }
    let (x, _) = gather(dataset, indices, &model.standardizer)?;
    let probs = forward(&model.params, &x, indices.len())?;
    Ok((argmax_rows(&probs, model.params.k_out), probs))
}

/// Baseline predictor: `n` labels drawn uniformly from `0..k`.
pub fn uniform_random_predict(k: usize, n: usize, seed: u64) -> Result<Vec<usize>, ModelError> {
    if k == 0 {
        return Err(ModelError::ZeroDimension);
    }
    let mut stream = rng::stream(seed, &[tags::UNIFORM_PREDICT]);
    Ok((0..n).map(|_| stream.random_range(0..k)).collect())
}
