//! Model assembly and mini-batch training: a stack of recurrent layers over
//! the encoded feature sequence, batch norm and dropout on the final hidden
//! state, a dense output layer, and a sigmoid or softmax head. Includes a
//! finite-difference gradient checker for the whole composed model and a
//! bit-exact persistence format.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{encode_batch, Dataset, SequenceMode};
use crate::error::{Error, Result};
use crate::layers::{
    batchnorm_backward, batchnorm_forward, dense_backward, dense_forward, dropout_backward,
    dropout_forward, rnn_layer_backward, rnn_layer_forward, sigmoid, softmax, BatchNormCache,
    BatchNormParams, DenseCache, DenseGrads, DenseParams, DropoutSpec, Mode, RecurrentGrads,
    RecurrentParams, RnnCache,
};
use crate::loss::{head_loss_grad, sgd_step, sgd_step_matrix, Head, SgdConfig};
use crate::tensor::{Matrix, Rng};

pub const MAX_RECURRENT_LAYERS: usize = 6;
pub const MAX_EPOCHS: usize = 1000;

/// Head selection in a topology; `Auto` resolves against the class count at
/// build time (2 classes -> sigmoid, otherwise softmax).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadChoice {
    #[default]
    Auto,
    Sigmoid,
    Softmax,
}

/// Architecture knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologyConfig {
    pub num_recurrent_layers: usize,
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub use_batchnorm: bool,
    pub sequence_mode: SequenceMode,
    pub head: HeadChoice,
}

impl Default for TopologyConfig {
    fn default() -> TopologyConfig {
        TopologyConfig {
            num_recurrent_layers: 1,
            hidden_units: 768,
            dropout_rate: 0.001,
            use_batchnorm: true,
            sequence_mode: SequenceMode::PerFeature,
            head: HeadChoice::Auto,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_recurrent_layers == 0 || self.num_recurrent_layers > MAX_RECURRENT_LAYERS {
            return Err(Error::Config(format!(
                "recurrent depth must be 1..={MAX_RECURRENT_LAYERS}, got {}",
                self.num_recurrent_layers
            )));
        }
        if self.hidden_units == 0 {
            return Err(Error::Config("hidden units must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0,1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Training-loop knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig { learning_rate: 0.01, epochs: 100, batch_size: 128, seed: 42, shuffle: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs > MAX_EPOCHS {
            return Err(Error::Config(format!(
                "epoch budget must be at most {MAX_EPOCHS}, got {}",
                self.epochs
            )));
        }
        if self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch training statistics. `seconds` is wall clock and is not part of
/// any persisted artifact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub accuracy: f64,
    pub seconds: f64,
}

/// One entry per completed epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

#[derive(Debug, Clone)]
struct RecurrentLayer {
    p: RecurrentParams,
    v_w_in: Matrix,
    v_w_rec: Matrix,
    v_b: Vec<f64>,
}

impl RecurrentLayer {
    fn new(p: RecurrentParams) -> RecurrentLayer {
        let v_w_in = Matrix::zeros(p.w_in.rows(), p.w_in.cols());
        let v_w_rec = Matrix::zeros(p.w_rec.rows(), p.w_rec.cols());
        let v_b = vec![0.0; p.b.len()];
        RecurrentLayer { p, v_w_in, v_w_rec, v_b }
    }
}

/// The assembled classifier with per-parameter velocity buffers.
#[derive(Debug, Clone)]
pub struct Model {
    input_dim: usize,
    num_classes: usize,
    head: Head,
    sequence_mode: SequenceMode,
    use_batchnorm: bool,
    recurrent: Vec<RecurrentLayer>,
    batchnorm: Option<BatchNormParams>,
    v_gamma: Vec<f64>,
    v_beta: Vec<f64>,
    dropout: DropoutSpec,
    dense: DenseParams,
    v_dense_w: Matrix,
    v_dense_b: Vec<f64>,
}

/// Caches from one train-mode forward pass, consumed by one backward pass.
#[derive(Debug, Clone)]
pub struct ModelCache {
    rnn: Vec<RnnCache>,
    bn: Option<BatchNormCache>,
    dropout_mask: Matrix,
    dense: DenseCache,
    steps: usize,
    batch_rows: usize,
    /// Pre-head output values, the input to the fused head-loss gradient.
    pub logits: Matrix,
}

/// Gradients for every trainable parameter of a [`Model`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    recurrent: Vec<RecurrentGrads>,
    bn_gamma: Option<Vec<f64>>,
    bn_beta: Option<Vec<f64>>,
    dense: DenseGrads,
}

/// Build a model from a topology: `L` stacked recurrent layers (each layer
/// consuming the full hidden sequence of the previous one), then batch norm,
/// dropout, and a dense layer into the head, reading only the final
/// timestep's top hidden state. Weights are Xavier-uniform
/// (`limit = sqrt(6/(fan_in+fan_out))`) from the seeded generator, drawn in a
/// pinned order; biases start at zero.
pub fn build_model(
    topology: &TopologyConfig,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
) -> Result<Model> {
    topology.validate()?;
    if input_dim == 0 {
        return Err(Error::Config("input dimension must be at least 1".into()));
    }
    if num_classes < 2 {
        return Err(Error::Config("need at least two classes".into()));
    }
    let head = match topology.head {
        HeadChoice::Auto => {
            if num_classes == 2 {
                Head::Sigmoid
            } else {
                Head::Softmax
            }
        }
        HeadChoice::Sigmoid => {
            if num_classes != 2 {
                return Err(Error::Config(format!(
                    "sigmoid head requires exactly 2 classes, got {num_classes}"
                )));
            }
            Head::Sigmoid
        }
        HeadChoice::Softmax => Head::Softmax,
    };
    let out_width = match head {
        Head::Sigmoid => 1,
        Head::Softmax => num_classes,
    };
    let h = topology.hidden_units;
    let step_dim = topology.sequence_mode.step_dim(input_dim);

    let mut rng = Rng::new(seed);
    let xavier = |rng: &mut Rng, rows: usize, cols: usize| -> Result<Matrix> {
        let limit = (6.0 / (cols + rows) as f64).sqrt();
        rng.uniform_matrix(rows, cols, -limit, limit)
    };

    let mut recurrent = Vec::with_capacity(topology.num_recurrent_layers);
    for layer in 0..topology.num_recurrent_layers {
        let d = if layer == 0 { step_dim } else { h };
        let p = RecurrentParams {
            w_in: xavier(&mut rng, h, d)?,
            w_rec: xavier(&mut rng, h, h)?,
            b: vec![0.0; h],
        };
        recurrent.push(RecurrentLayer::new(p));
    }
    let batchnorm = topology.use_batchnorm.then(|| BatchNormParams::new(h));
    let dense = DenseParams { w: xavier(&mut rng, out_width, h)?, b: vec![0.0; out_width] };
    let dropout = DropoutSpec::new(topology.dropout_rate, rng.split())?;

    Ok(Model {
        input_dim,
        num_classes,
        head,
        sequence_mode: topology.sequence_mode,
        use_batchnorm: topology.use_batchnorm,
        v_gamma: vec![0.0; if topology.use_batchnorm { h } else { 0 }],
        v_beta: vec![0.0; if topology.use_batchnorm { h } else { 0 }],
        recurrent,
        batchnorm,
        dropout,
        v_dense_w: Matrix::zeros(out_width, h),
        v_dense_b: vec![0.0; out_width],
        dense,
    })
}

impl Model {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn sequence_mode(&self) -> SequenceMode {
        self.sequence_mode
    }

    pub fn depth(&self) -> usize {
        self.recurrent.len()
    }

    pub fn hidden_units(&self) -> usize {
        self.recurrent[0].p.hidden_units()
    }

    pub fn output_width(&self) -> usize {
        self.dense.w.rows()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout.rate
    }

    /// Steps the sequence encoder produces for this model's input dimension.
    pub fn sequence_len(&self) -> usize {
        self.sequence_mode.steps(self.input_dim)
    }

    /// Step dimensionality fed to the first recurrent layer.
    pub fn step_dim(&self) -> usize {
        self.sequence_mode.step_dim(self.input_dim)
    }

    /// Count of trainable scalars.
    pub fn num_parameters(&self) -> usize {
        self.param_vector().len()
    }

    fn check_features(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "batch of {}x{} against model input dimension {}",
                batch.rows(),
                batch.cols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Train-mode forward pass: batch statistics, active dropout, and a full
    /// cache for [`Model::backward`]. Returns head probabilities.
    pub fn forward_train(&mut self, batch: &Matrix) -> Result<(Matrix, ModelCache)> {
        self.check_features(batch)?;
        let b = batch.rows();
        let h = self.hidden_units();
        let mut seq = encode_batch(batch, self.sequence_mode);
        let mut rnn_caches = Vec::with_capacity(self.recurrent.len());
        for layer in &self.recurrent {
            let h0 = Matrix::zeros(b, h);
            let (outs, cache) = rnn_layer_forward(seq, &layer.p, &h0)?;
            rnn_caches.push(cache);
            seq = outs;
        }
        let last_hidden = seq.pop().expect("sequence is nonempty");

        let (bn_out, bn_cache) = match self.batchnorm.as_mut() {
            Some(p) => {
                let (out, cache) = batchnorm_forward(&last_hidden, p, Mode::Train)?;
                (out, Some(cache))
            }
            None => (last_hidden, None),
        };
        let (dropped, mask) = dropout_forward(&bn_out, &mut self.dropout, Mode::Train);
        let (logits, dense_cache) = dense_forward(&dropped, &self.dense)?;
        let probs = self.apply_head(&logits);
        let cache = ModelCache {
            rnn: rnn_caches,
            bn: bn_cache,
            dropout_mask: mask,
            dense: dense_cache,
            steps: self.sequence_len(),
            batch_rows: b,
            logits,
        };
        Ok((probs, cache))
    }

    /// Inference forward pass: running statistics, dropout inactive, no
    /// mutable state touched. Pure in (parameters, input).
    pub fn infer(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_features(batch)?;
        let b = batch.rows();
        let h = self.hidden_units();
        let mut seq = encode_batch(batch, self.sequence_mode);
        for layer in &self.recurrent {
            let h0 = Matrix::zeros(b, h);
            let (outs, _) = rnn_layer_forward(seq, &layer.p, &h0)?;
            seq = outs;
        }
        let last_hidden = seq.pop().expect("sequence is nonempty");
        let bn_out = match &self.batchnorm {
            Some(p) => batchnorm_forward(&last_hidden, &mut p.clone(), Mode::Infer)?.0,
            None => last_hidden,
        };
        let (logits, _) = dense_forward(&bn_out, &self.dense)?;
        Ok(self.apply_head(&logits))
    }

    fn apply_head(&self, logits: &Matrix) -> Matrix {
        match self.head {
            Head::Sigmoid => sigmoid(logits),
            Head::Softmax => softmax(logits),
        }
    }

    /// Exact reverse-mode gradients of the composed model for one cached
    /// train-mode pass, given the loss gradient with respect to the logits.
    pub fn backward(&self, cache: &ModelCache, grad_logits: &Matrix) -> Result<ModelGrads> {
        let (dense_grads, after_dense) = dense_backward(&cache.dense, &self.dense, grad_logits)?;
        let after_dropout =
            dropout_backward(&cache.dropout_mask, self.dropout.rate, &after_dense)?;
        let (top_grad, bn_gamma, bn_beta) = match &cache.bn {
            Some(bn_cache) => {
                let (dx, dg, db) = batchnorm_backward(bn_cache, &after_dropout)?;
                (dx, Some(dg), Some(db))
            }
            None => (after_dropout, None, None),
        };

        // Per-step upstream gradients for the layer under consideration.
        // Only the final timestep of the top layer receives loss gradient;
        // lower layers receive the input gradients of the layer above.
        let mut step_grads =
            vec![Matrix::zeros(cache.batch_rows, self.hidden_units()); cache.steps];
        *step_grads.last_mut().expect("at least one step") = top_grad;

        let mut collected = Vec::with_capacity(self.recurrent.len());
        for (idx, layer) in self.recurrent.iter().enumerate().rev() {
            let (grads, grad_inputs, _) =
                rnn_layer_backward(&cache.rnn[idx], &layer.p, &step_grads)?;
            collected.push(grads);
            step_grads = grad_inputs;
        }
        collected.reverse();
        Ok(ModelGrads { recurrent: collected, bn_gamma, bn_beta, dense: dense_grads })
    }

    /// One SGD step over every trainable parameter, in the pinned order.
    pub fn apply_step(&mut self, grads: &ModelGrads, cfg: &SgdConfig) -> Result<()> {
        if grads.recurrent.len() != self.recurrent.len() {
            return Err(Error::Shape(format!(
                "{} recurrent gradients against {} layers",
                grads.recurrent.len(),
                self.recurrent.len()
            )));
        }
        for (layer, g) in self.recurrent.iter_mut().zip(&grads.recurrent) {
            sgd_step_matrix(&mut layer.p.w_in, &g.w_in, &mut layer.v_w_in, cfg)?;
            sgd_step_matrix(&mut layer.p.w_rec, &g.w_rec, &mut layer.v_w_rec, cfg)?;
            sgd_step(&mut layer.p.b, &g.b, &mut layer.v_b, cfg)?;
        }
        if let Some(bn) = self.batchnorm.as_mut() {
            let (dg, db) = match (&grads.bn_gamma, &grads.bn_beta) {
                (Some(dg), Some(db)) => (dg, db),
                _ => {
                    return Err(Error::Shape(
                        "missing batch-norm gradients for a batch-norm model".into(),
                    ))
                }
            };
            sgd_step(&mut bn.gamma, dg, &mut self.v_gamma, cfg)?;
            sgd_step(&mut bn.beta, db, &mut self.v_beta, cfg)?;
        }
        sgd_step_matrix(&mut self.dense.w, &grads.dense.w, &mut self.v_dense_w, cfg)?;
        sgd_step(&mut self.dense.b, &grads.dense.b, &mut self.v_dense_b, cfg)?;
        Ok(())
    }

    /// Predicted labels and class probabilities, in inference mode. Binary
    /// models label 1 iff the probability is at least 0.5; multiclass models
    /// take the argmax with ties broken toward the lowest index.
    pub fn predict(&self, features: &Matrix) -> Result<(Vec<usize>, Matrix)> {
        let probs = self.infer(features)?;
        let labels = labels_from_probs(&probs, self.head);
        Ok((labels, probs))
    }

    // -- flat parameter views (pinned order: per layer w_in, w_rec, b; then
    //    batch-norm gamma, beta; then dense w, b) --------------------------

    fn param_vector(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for layer in &self.recurrent {
            v.extend_from_slice(layer.p.w_in.data());
            v.extend_from_slice(layer.p.w_rec.data());
            v.extend_from_slice(&layer.p.b);
        }
        if let Some(bn) = &self.batchnorm {
            v.extend_from_slice(&bn.gamma);
            v.extend_from_slice(&bn.beta);
        }
        v.extend_from_slice(self.dense.w.data());
        v.extend_from_slice(&self.dense.b);
        v
    }

    fn set_param_vector(&mut self, values: &[f64]) {
        let mut at = 0usize;
        let mut take = |len: usize| {
            let s = &values[at..at + len];
            at += len;
            s
        };
        for layer in &mut self.recurrent {
            let n = layer.p.w_in.data().len();
            layer.p.w_in.data_mut().copy_from_slice(take(n));
            let n = layer.p.w_rec.data().len();
            layer.p.w_rec.data_mut().copy_from_slice(take(n));
            let n = layer.p.b.len();
            layer.p.b.copy_from_slice(take(n));
        }
        if let Some(bn) = &mut self.batchnorm {
            let n = bn.gamma.len();
            bn.gamma.copy_from_slice(take(n));
            let n = bn.beta.len();
            bn.beta.copy_from_slice(take(n));
        }
        let n = self.dense.w.data().len();
        self.dense.w.data_mut().copy_from_slice(take(n));
        let n = self.dense.b.len();
        self.dense.b.copy_from_slice(take(n));
        assert_eq!(at, values.len(), "parameter vector arity mismatch");
    }

    fn grad_vector(&self, grads: &ModelGrads) -> Vec<f64> {
        let mut v = Vec::new();
        for g in &grads.recurrent {
            v.extend_from_slice(g.w_in.data());
            v.extend_from_slice(g.w_rec.data());
            v.extend_from_slice(&g.b);
        }
        if self.batchnorm.is_some() {
            v.extend_from_slice(grads.bn_gamma.as_deref().unwrap_or(&[]));
            v.extend_from_slice(grads.bn_beta.as_deref().unwrap_or(&[]));
        }
        v.extend_from_slice(grads.dense.w.data());
        v.extend_from_slice(&grads.dense.b);
        v
    }
}

/// Trainable scalar count of a topology without building it; used for
/// fewer-parameters tie-breaking during model selection.
pub fn count_parameters(
    topology: &TopologyConfig,
    input_dim: usize,
    num_classes: usize,
) -> Result<usize> {
    topology.validate()?;
    let h = topology.hidden_units;
    let step_dim = topology.sequence_mode.step_dim(input_dim);
    let out_width = match topology.head {
        HeadChoice::Sigmoid => 1,
        HeadChoice::Softmax => num_classes,
        HeadChoice::Auto => {
            if num_classes == 2 {
                1
            } else {
                num_classes
            }
        }
    };
    let mut total = 0usize;
    for layer in 0..topology.num_recurrent_layers {
        let d = if layer == 0 { step_dim } else { h };
        total += h * d + h * h + h;
    }
    if topology.use_batchnorm {
        total += 2 * h;
    }
    total += out_width * h + out_width;
    Ok(total)
}

/// Labels from head probabilities: threshold-at-0.5 (inclusive) for the
/// sigmoid head, lowest-index argmax for softmax.
pub fn labels_from_probs(probs: &Matrix, head: Head) -> Vec<usize> {
    match head {
        Head::Sigmoid => probs.data().iter().map(|&p| usize::from(p >= 0.5)).collect(),
        Head::Softmax => (0..probs.rows())
            .map(|i| {
                let row = probs.row(i);
                let mut best = 0usize;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect(),
    }
}

/// Mini-batch training: per epoch, a seeded shuffle, consecutive batches
/// (the final partial batch is kept only when it has at least 2 rows),
/// a train-mode forward pass, the fused head-loss gradient, full
/// backpropagation through time, and an SGD step per parameter.
pub fn train(model: &mut Model, train_set: &Dataset, cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if train_set.schema.n_features != model.input_dim {
        return Err(Error::Shape(format!(
            "dataset has {} features, model expects {}",
            train_set.schema.n_features, model.input_dim
        )));
    }
    if let Some(&bad) = train_set.y.iter().find(|&&l| l >= model.num_classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {} classes",
            model.num_classes
        )));
    }
    if model.use_batchnorm && cfg.batch_size < 2 {
        return Err(Error::Config("batch norm requires batch_size >= 2".into()));
    }

    let n = train_set.len();
    let sgd = SgdConfig { learning_rate: cfg.learning_rate, momentum: 0.0 };
    let mut shuffle_rng = Rng::new(cfg.seed);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        if cfg.shuffle {
            shuffle_rng.shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut used = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 && cfg.batch_size >= 2 {
                continue; // drop a trailing singleton
            }
            let mut data = Vec::with_capacity(chunk.len() * model.input_dim);
            let mut labels = Vec::with_capacity(chunk.len());
            for &i in chunk {
                data.extend_from_slice(train_set.x.row(i));
                labels.push(train_set.y[i]);
            }
            let batch = Matrix::from_vec(chunk.len(), model.input_dim, data)?;
            let (probs, cache) = model.forward_train(&batch)?;
            let (loss, grad_logits) = head_loss_grad(&cache.logits, &labels, model.head)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            let grads = model.backward(&cache, &grad_logits)?;
            model.apply_step(&grads, &sgd)?;

            loss_sum += loss * chunk.len() as f64;
            let predicted = labels_from_probs(&probs, model.head);
            correct += predicted.iter().zip(&labels).filter(|(p, l)| p == l).count();
            used += chunk.len();
        }
        if used == 0 {
            return Err(Error::InvalidArgument(format!(
                "no usable batch: {n} sample(s) with batch size {}",
                cfg.batch_size
            )));
        }
        history.epochs.push(EpochStats {
            mean_loss: loss_sum / used as f64,
            accuracy: correct as f64 / used as f64,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(history)
}

/// When a model has more scalars than this, the gradient check samples a
/// fixed-size coordinate subset instead of sweeping every parameter.
const GRADIENT_CHECK_FULL_LIMIT: usize = 2000;
const GRADIENT_CHECK_SAMPLES: usize = 200;

/// Compare analytic gradients of the composed loss against central finite
/// differences (h = 1e-5) on one small batch, returning the max relative
/// error with denominator `max(|analytic|, |numeric|, 1e-8)`. Dropout is
/// disabled for the check (stochastic masks make differences meaningless);
/// batch norm runs in train mode against the fixed batch.
pub fn gradient_check(model: &Model, batch: &Matrix, labels: &[usize]) -> Result<f64> {
    if batch.rows() > 8 {
        return Err(Error::InvalidArgument(format!(
            "gradient check batches are capped at 8 rows, got {}",
            batch.rows()
        )));
    }
    let mut work = model.clone();
    work.dropout.rate = 0.0;

    let (_, cache) = work.forward_train(batch)?;
    let (_, grad_logits) = head_loss_grad(&cache.logits, labels, work.head)?;
    let grads = work.backward(&cache, &grad_logits)?;
    let analytic = work.grad_vector(&grads);

    let theta = work.param_vector();
    let coords: Vec<usize> = if theta.len() <= GRADIENT_CHECK_FULL_LIMIT {
        (0..theta.len()).collect()
    } else {
        // sampled coordinate subset, pinned by the parameter count
        let mut idx: Vec<usize> = (0..theta.len()).collect();
        let mut rng = Rng::new(0xC0FFEE ^ theta.len() as u64);
        for i in 0..GRADIENT_CHECK_SAMPLES {
            let j = i + rng.next_index(idx.len() - i);
            idx.swap(i, j);
        }
        idx.truncate(GRADIENT_CHECK_SAMPLES);
        idx
    };

    let h = 1e-5;
    let mut buf = theta.clone();
    let mut max_err: f64 = 0.0;
    for &c in &coords {
        let orig = buf[c];
        buf[c] = orig + h;
        work.set_param_vector(&buf);
        let up = loss_at(&mut work, batch, labels)?;
        buf[c] = orig - h;
        work.set_param_vector(&buf);
        let down = loss_at(&mut work, batch, labels)?;
        buf[c] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[c].abs().max(numeric.abs()).max(1e-8);
        max_err = max_err.max((analytic[c] - numeric).abs() / denom);
    }
    Ok(max_err)
}

fn loss_at(model: &mut Model, batch: &Matrix, labels: &[usize]) -> Result<f64> {
    let (_, cache) = model.forward_train(batch)?;
    Ok(head_loss_grad(&cache.logits, labels, model.head)?.0)
}

// ---------------------------------------------------------------------------
// Persistence: self-describing flat file, header then parameter arrays in
// declaration order as little-endian f64. Round-trips are bit-exact.
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &[u8; 4] = b"RNM1";
const MODEL_VERSION: u32 = 1;

struct ByteWriter(Vec<u8>);

impl ByteWriter {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64_slice(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> ByteReader<'a> {
        ByteReader { bytes, at: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::Parse(format!(
                "model file truncated at byte {} of {}",
                self.at,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(Error::Parse(format!(
                "{} trailing bytes after model payload",
                self.bytes.len() - self.at
            )));
        }
        Ok(())
    }
}

impl Model {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter(Vec::new());
        w.0.extend_from_slice(MODEL_MAGIC);
        w.u32(MODEL_VERSION);
        w.u8(match self.head {
            Head::Sigmoid => 0,
            Head::Softmax => 1,
        });
        w.u8(match self.sequence_mode {
            SequenceMode::PerFeature => 0,
            SequenceMode::SingleStep => 1,
        });
        w.u8(u8::from(self.use_batchnorm));
        w.u8(0); // reserved
        w.u32(self.recurrent.len() as u32);
        w.u32(self.hidden_units() as u32);
        w.f64(self.dropout.rate);
        w.u32(self.input_dim as u32);
        w.u32(self.num_classes as u32);
        for layer in &self.recurrent {
            w.f64_slice(layer.p.w_in.data());
            w.f64_slice(layer.p.w_rec.data());
            w.f64_slice(&layer.p.b);
        }
        if let Some(bn) = &self.batchnorm {
            w.f64_slice(&bn.gamma);
            w.f64_slice(&bn.beta);
            w.f64_slice(&bn.running_mean);
            w.f64_slice(&bn.running_var);
        }
        w.f64_slice(self.dense.w.data());
        w.f64_slice(&self.dense.b);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::Parse("not a model file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Parse(format!("unsupported model format version {version}")));
        }
        let head = match r.u8()? {
            0 => Head::Sigmoid,
            1 => Head::Softmax,
            other => return Err(Error::Parse(format!("unknown head tag {other}"))),
        };
        let sequence_mode = match r.u8()? {
            0 => SequenceMode::PerFeature,
            1 => SequenceMode::SingleStep,
            other => return Err(Error::Parse(format!("unknown sequence-mode tag {other}"))),
        };
        let use_batchnorm = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Parse(format!("unknown batch-norm tag {other}"))),
        };
        let _reserved = r.u8()?;
        let depth = r.u32()? as usize;
        let h = r.u32()? as usize;
        let dropout_rate = r.f64()?;
        let input_dim = r.u32()? as usize;
        let num_classes = r.u32()? as usize;
        if depth == 0 || h == 0 || input_dim == 0 || num_classes < 2 {
            return Err(Error::Parse("degenerate model header".into()));
        }

        let step_dim = sequence_mode.step_dim(input_dim);
        let mut recurrent = Vec::with_capacity(depth);
        for layer in 0..depth {
            let d = if layer == 0 { step_dim } else { h };
            let w_in = Matrix::from_vec(h, d, r.f64_vec(h * d)?)?;
            let w_rec = Matrix::from_vec(h, h, r.f64_vec(h * h)?)?;
            let b = r.f64_vec(h)?;
            recurrent.push(RecurrentLayer::new(RecurrentParams { w_in, w_rec, b }));
        }
        let batchnorm = if use_batchnorm {
            let mut bn = BatchNormParams::new(h);
            bn.gamma = r.f64_vec(h)?;
            bn.beta = r.f64_vec(h)?;
            bn.running_mean = r.f64_vec(h)?;
            bn.running_var = r.f64_vec(h)?;
            Some(bn)
        } else {
            None
        };
        let out_width = match head {
            Head::Sigmoid => 1,
            Head::Softmax => num_classes,
        };
        let w = Matrix::from_vec(out_width, h, r.f64_vec(out_width * h)?)?;
        let b = r.f64_vec(out_width)?;
        r.finish()?;

        Ok(Model {
            input_dim,
            num_classes,
            head,
            sequence_mode,
            use_batchnorm,
            recurrent,
            batchnorm,
            v_gamma: vec![0.0; if use_batchnorm { h } else { 0 }],
            v_beta: vec![0.0; if use_batchnorm { h } else { 0 }],
            dropout: DropoutSpec::new(dropout_rate, Rng::new(0))?,
            dense: DenseParams { w, b },
            v_dense_w: Matrix::zeros(out_width, h),
            v_dense_b: vec![0.0; out_width],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Model> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Model::from_bytes(&bytes)
    }
}
