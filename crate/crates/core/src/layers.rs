//! Network layers: recurrent cells with self-connections, dense layers,
//! batch normalization, inverted dropout, and the output activations.
//!
//! Every layer comes as a `*_forward` that returns a cache and a `*_backward`
//! that turns upstream gradients into parameter/input gradients. Backward
//! passes are exact reverse-mode derivatives of their forward; the tests pin
//! them against central finite differences.

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Forward-pass mode. Train mode uses batch statistics and active dropout;
/// infer mode is a pure function of the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

// ---------------------------------------------------------------------------
// Recurrent layer
// ---------------------------------------------------------------------------

/// Parameters of one recurrent layer: input weights, self-connection weights,
/// bias. Hidden update is `h_t = tanh(w_in·x_t + w_rec·h_{t-1} + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentParams {
    /// `H x D` input weights.
    pub w_in: Matrix,
    /// `H x H` self-connection weights.
    pub w_rec: Matrix,
    /// Bias, length `H`.
    pub b: Vec<f64>,
}

impl RecurrentParams {
    pub fn hidden_units(&self) -> usize {
        self.w_rec.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_in.cols()
    }

    fn validate(&self) -> Result<()> {
        let h = self.w_in.rows();
        if self.w_rec.shape() != (h, h) || self.b.len() != h {
            return Err(Error::Shape(format!(
                "recurrent params disagree: w_in {}x{}, w_rec {}x{}, bias {}",
                self.w_in.rows(),
                self.w_in.cols(),
                self.w_rec.rows(),
                self.w_rec.cols(),
                self.b.len()
            )));
        }
        Ok(())
    }
}

/// Gradients matching [`RecurrentParams`] field for field.
#[derive(Debug, Clone)]
pub struct RecurrentGrads {
    pub w_in: Matrix,
    pub w_rec: Matrix,
    pub b: Vec<f64>,
}

/// Everything the recurrent backward pass needs from its forward pass.
#[derive(Debug, Clone)]
pub struct RnnCache {
    /// Input step matrices, each `B x D`, length `T`.
    inputs: Vec<Matrix>,
    /// Hidden states `h_0..h_T`, each `B x H`, length `T + 1`.
    hidden: Vec<Matrix>,
}

impl RnnCache {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }
}

/// Single-sample recurrent cell: `h_t = tanh(w_in·x_t + w_rec·h_prev + b)`.
pub fn rnn_cell_forward(x_t: &[f64], h_prev: &[f64], p: &RecurrentParams) -> Result<Vec<f64>> {
    p.validate()?;
    let (h, d) = (p.hidden_units(), p.input_dim());
    if x_t.len() != d || h_prev.len() != h {
        return Err(Error::Shape(format!(
            "rnn cell expects input {d} and state {h}, got input {} and state {}",
            x_t.len(),
            h_prev.len()
        )));
    }
    let mut out = Vec::with_capacity(h);
    for i in 0..h {
        let mut a = p.b[i];
        for (w, x) in p.w_in.row(i).iter().zip(x_t) {
            a += w * x;
        }
        for (w, hp) in p.w_rec.row(i).iter().zip(h_prev) {
            a += w * hp;
        }
        out.push(a.tanh());
    }
    Ok(out)
}

/// Run the recurrent layer over a batched step sequence (`T` matrices of
/// shape `B x D`), folding from `h0` (`B x H`). Returns the full hidden
/// sequence so layers can stack; the input sequence moves into the cache.
pub fn rnn_layer_forward(
    seq: Vec<Matrix>,
    p: &RecurrentParams,
    h0: &Matrix,
) -> Result<(Vec<Matrix>, RnnCache)> {
    p.validate()?;
    if seq.is_empty() {
        return Err(Error::InvalidArgument("recurrent layer needs at least one step".into()));
    }
    let (h, d) = (p.hidden_units(), p.input_dim());
    let batch = seq[0].rows();
    if h0.shape() != (batch, h) {
        return Err(Error::Shape(format!(
            "initial state {}x{} against batch {batch} and {h} units",
            h0.rows(),
            h0.cols()
        )));
    }
    // weights transposed once per call; the per-step products then run over
    // contiguous rows with independent accumulation lanes
    let w_in_t = p.w_in.transpose();
    let w_rec_t = p.w_rec.transpose();
    let mut hidden = Vec::with_capacity(seq.len() + 1);
    hidden.push(h0.clone());
    for (t, x_t) in seq.iter().enumerate() {
        if x_t.shape() != (batch, d) {
            return Err(Error::Shape(format!(
                "step {t} is {}x{}, expected {batch}x{d}",
                x_t.rows(),
                x_t.cols()
            )));
        }
        let mut a = x_t.matmul(&w_in_t)?;
        hidden[t].matmul_acc(&w_rec_t, &mut a)?;
        for row in 0..batch {
            for (v, &bias) in a.row_mut(row).iter_mut().zip(&p.b) {
                *v = (*v + bias).tanh();
            }
        }
        hidden.push(a);
    }
    let outputs = hidden[1..].to_vec();
    let cache = RnnCache { inputs: seq, hidden };
    Ok((outputs, cache))
}

/// Backpropagation through time. `grad_out[t]` is the loss gradient with
/// respect to `h_{t+1}`; gradients accumulate through the self-connection
/// across every step. Returns parameter gradients, per-step input gradients,
/// and the gradient with respect to `h0`.
pub fn rnn_layer_backward(
    cache: &RnnCache,
    p: &RecurrentParams,
    grad_out: &[Matrix],
) -> Result<(RecurrentGrads, Vec<Matrix>, Matrix)> {
    let t_steps = cache.steps();
    if grad_out.len() != t_steps {
        return Err(Error::Shape(format!(
            "{} upstream gradients against {} cached steps",
            grad_out.len(),
            t_steps
        )));
    }
    let (h, d) = (p.hidden_units(), p.input_dim());
    let batch = cache.hidden[0].rows();

    let mut g_w_in = Matrix::zeros(h, d);
    let mut g_w_rec = Matrix::zeros(h, h);
    let mut g_b = vec![0.0; h];
    let mut grad_inputs = vec![Matrix::zeros(1, 1); t_steps];
    let mut dh_next = Matrix::zeros(batch, h);

    for t in (0..t_steps).rev() {
        if grad_out[t].shape() != (batch, h) {
            return Err(Error::Shape(format!(
                "gradient for step {t} is {}x{}, expected {batch}x{h}",
                grad_out[t].rows(),
                grad_out[t].cols()
            )));
        }
        let h_t = &cache.hidden[t + 1];
        // da = (upstream + carried) * tanh' where tanh' = 1 - h^2,
        // written over the carried buffer
        let mut da = dh_next;
        for ((g, &up), &ht) in
            da.data_mut().iter_mut().zip(grad_out[t].data()).zip(h_t.data())
        {
            *g = (*g + up) * (1.0 - ht * ht);
        }
        da.matmul_tn_acc(&cache.inputs[t], &mut g_w_in)?;
        da.matmul_tn_acc(&cache.hidden[t], &mut g_w_rec)?;
        for (g, s) in g_b.iter_mut().zip(da.column_sums()) {
            *g += s;
        }
        grad_inputs[t] = da.matmul(&p.w_in)?;
        dh_next = da.matmul(&p.w_rec)?;
    }

    Ok((RecurrentGrads { w_in: g_w_in, w_rec: g_w_rec, b: g_b }, grad_inputs, dh_next))
}

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

/// Fully connected layer parameters; forward is `x·wᵀ + b` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `O x I` weights.
    pub w: Matrix,
    /// Bias, length `O`.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Matrix,
}

pub fn dense_forward(x: &Matrix, p: &DenseParams) -> Result<(Matrix, DenseCache)> {
    if x.cols() != p.w.cols() || p.b.len() != p.w.rows() {
        return Err(Error::Shape(format!(
            "dense layer {}x{} with bias {} against input {}x{}",
            p.w.rows(),
            p.w.cols(),
            p.b.len(),
            x.rows(),
            x.cols()
        )));
    }
    let out = x.matmul(&p.w.transpose())?.add_row_vector(&p.b)?;
    Ok((out, DenseCache { input: x.clone() }))
}

pub fn dense_backward(
    cache: &DenseCache,
    p: &DenseParams,
    grad: &Matrix,
) -> Result<(DenseGrads, Matrix)> {
    if grad.shape() != (cache.input.rows(), p.w.rows()) {
        return Err(Error::Shape(format!(
            "dense gradient {}x{} against batch {} and {} outputs",
            grad.rows(),
            grad.cols(),
            cache.input.rows(),
            p.w.rows()
        )));
    }
    let g_w = grad.matmul_tn(&cache.input)?;
    let g_b = grad.column_sums();
    let g_x = grad.matmul(&p.w)?;
    Ok((DenseGrads { w: g_w, b: g_b }, g_x))
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

/// Batch-normalization state for `F` features. Train mode normalizes each
/// column by the biased (divide-by-B) batch statistics and updates the
/// running estimates as `running <- momentum*running + (1-momentum)*batch`;
/// infer mode uses the running estimates only.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl BatchNormParams {
    pub fn new(features: usize) -> BatchNormParams {
        BatchNormParams {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            momentum: 0.9,
            epsilon: 1e-5,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    train: bool,
    x_hat: Matrix,
    inv_std: Vec<f64>,
    gamma: Vec<f64>,
}

pub fn batchnorm_forward(
    x: &Matrix,
    p: &mut BatchNormParams,
    mode: Mode,
) -> Result<(Matrix, BatchNormCache)> {
    let f = p.features();
    if x.cols() != f {
        return Err(Error::Shape(format!(
            "batch norm over {f} features against input {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    let b = x.rows();
    match mode {
        Mode::Train => {
            if b < 2 {
                return Err(Error::InvalidArgument(format!(
                    "train-mode batch norm needs a batch of at least 2 rows, got {b}"
                )));
            }
            let mut mean = x.column_sums();
            for m in &mut mean {
                *m /= b as f64;
            }
            let mut var = vec![0.0; f];
            for i in 0..b {
                for (j, &v) in x.row(i).iter().enumerate() {
                    let d = v - mean[j];
                    var[j] += d * d;
                }
            }
            for v in &mut var {
                *v /= b as f64;
            }
            let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + p.epsilon).sqrt()).collect();

            let mut x_hat = x.clone();
            for i in 0..b {
                for (j, v) in x_hat.row_mut(i).iter_mut().enumerate() {
                    *v = (*v - mean[j]) * inv_std[j];
                }
            }
            let mut out = x_hat.clone();
            for i in 0..b {
                for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                    *v = p.gamma[j] * *v + p.beta[j];
                }
            }
            for (r, m) in p.running_mean.iter_mut().zip(&mean) {
                *r = p.momentum * *r + (1.0 - p.momentum) * m;
            }
            for (r, v) in p.running_var.iter_mut().zip(&var) {
                *r = p.momentum * *r + (1.0 - p.momentum) * v;
            }
            let cache =
                BatchNormCache { train: true, x_hat, inv_std, gamma: p.gamma.clone() };
            Ok((out, cache))
        }
        Mode::Infer => {
            let inv_std: Vec<f64> =
                p.running_var.iter().map(|&v| 1.0 / (v + p.epsilon).sqrt()).collect();
            let mut out = x.clone();
            for i in 0..b {
                for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                    *v = p.gamma[j] * (*v - p.running_mean[j]) * inv_std[j] + p.beta[j];
                }
            }
            let cache = BatchNormCache {
                train: false,
                x_hat: Matrix::zeros(1, 1),
                inv_std: Vec::new(),
                gamma: Vec::new(),
            };
            Ok((out, cache))
        }
    }
}

/// Exact gradients of the train-mode normalization, including the paths
/// through the batch mean and variance.
pub fn batchnorm_backward(
    cache: &BatchNormCache,
    grad: &Matrix,
) -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
    if !cache.train {
        return Err(Error::InvalidArgument(
            "batch-norm backward needs a train-mode cache".into(),
        ));
    }
    if grad.shape() != cache.x_hat.shape() {
        return Err(Error::Shape(format!(
            "batch-norm gradient {}x{} against cached {}x{}",
            grad.rows(),
            grad.cols(),
            cache.x_hat.rows(),
            cache.x_hat.cols()
        )));
    }
    let (b, f) = grad.shape();
    let g_beta = grad.column_sums();
    let g_gamma = grad.hadamard(&cache.x_hat)?.column_sums();

    // dx = inv_std/B * gamma * (B*g - sum(g) - x_hat * sum(g*x_hat))
    let mut dx = Matrix::zeros(b, f);
    for i in 0..b {
        let g_row = grad.row(i);
        let xh_row = cache.x_hat.row(i);
        let out_row = dx.row_mut(i);
        for j in 0..f {
            out_row[j] = cache.gamma[j] * cache.inv_std[j] / b as f64
                * (b as f64 * g_row[j] - g_beta[j] - xh_row[j] * g_gamma[j]);
        }
    }
    Ok((dx, g_gamma, g_beta))
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout: train mode zeroes entries with probability `rate` and
/// scales survivors by `1/(1-rate)` so inference stays an identity map.
#[derive(Debug, Clone)]
pub struct DropoutSpec {
    pub rate: f64,
    pub rng: Rng,
}

impl DropoutSpec {
    pub fn new(rate: f64, rng: Rng) -> Result<DropoutSpec> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate must be in [0,1), got {rate}")));
        }
        Ok(DropoutSpec { rate, rng })
    }
}

pub fn dropout_forward(x: &Matrix, spec: &mut DropoutSpec, mode: Mode) -> (Matrix, Matrix) {
    let ones = || Matrix::zeros(x.rows(), x.cols()).map(|_| 1.0);
    if mode == Mode::Infer || spec.rate == 0.0 {
        return (x.clone(), ones());
    }
    let keep_scale = 1.0 / (1.0 - spec.rate);
    let mut mask = ones();
    for m in mask.data_mut() {
        if spec.rng.next_f64() < spec.rate {
            *m = 0.0;
        }
    }
    let mut out = x.hadamard(&mask).expect("mask shape matches input");
    for v in out.data_mut() {
        *v *= keep_scale;
    }
    (out, mask)
}

/// Backward through the same mask and scale the forward pass applied.
pub fn dropout_backward(mask: &Matrix, rate: f64, grad: &Matrix) -> Result<Matrix> {
    let mut out = grad.hadamard(mask)?;
    let keep_scale = 1.0 / (1.0 - rate);
    for v in out.data_mut() {
        *v *= keep_scale;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Output activations
// ---------------------------------------------------------------------------

/// Elementwise logistic sigmoid, evaluated in the overflow-free branch form.
pub fn sigmoid(z: &Matrix) -> Matrix {
    z.map(sigmoid_scalar)
}

pub fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction; each output row sums to 1.
pub fn softmax(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::fd_max_rel_err;

    fn tiny_recurrent(h: usize, d: usize, seed: u64) -> RecurrentParams {
        let mut rng = Rng::new(seed);
        RecurrentParams {
            w_in: rng.uniform_matrix(h, d, -0.7, 0.7).unwrap(),
            w_rec: rng.uniform_matrix(h, h, -0.7, 0.7).unwrap(),
            b: rng.uniform(h, -0.3, 0.3).unwrap(),
        }
    }

    #[test]
    fn cell_zero_params_give_zero_state() {
        let p = RecurrentParams {
            w_in: Matrix::zeros(3, 2),
            w_rec: Matrix::zeros(3, 3),
            b: vec![0.0; 3],
        };
        let h = rnn_cell_forward(&[0.4, -1.2], &[0.5, 0.5, 0.5], &p).unwrap();
        assert_eq!(h, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn cell_matches_direct_formula() {
        // bias-only: tanh(0.5)
        let p = RecurrentParams {
            w_in: Matrix::zeros(1, 1),
            w_rec: Matrix::zeros(1, 1),
            b: vec![0.5],
        };
        let h = rnn_cell_forward(&[0.9], &[0.1], &p).unwrap();
        assert!((h[0] - 0.46211715726000974).abs() < 1e-15);

        // w_in=1, w_rec=1, b=0, x=0.3, h_prev=0.2 -> tanh(0.5)
        let p = RecurrentParams {
            w_in: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            w_rec: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            b: vec![0.0],
        };
        let h = rnn_cell_forward(&[0.3], &[0.2], &p).unwrap();
        assert!((h[0] - 0.46211715726000974).abs() < 1e-15);
    }

    #[test]
    fn cell_rejects_mismatched_dims() {
        let p = tiny_recurrent(3, 2, 1);
        assert!(rnn_cell_forward(&[1.0], &[0.0; 3], &p).is_err());
        assert!(rnn_cell_forward(&[1.0, 2.0], &[0.0; 2], &p).is_err());
    }

    #[test]
    fn layer_single_step_equals_cell() {
        let p = tiny_recurrent(3, 2, 5);
        let x = vec![0.3, -0.8];
        let h0 = vec![0.2, -0.1, 0.4];
        let expect = rnn_cell_forward(&x, &h0, &p).unwrap();

        let seq = [Matrix::from_rows(&[x]).unwrap()];
        let h0m = Matrix::from_rows(&[h0]).unwrap();
        let (outs, _) = rnn_layer_forward(seq.to_vec(), &p, &h0m).unwrap();
        assert_eq!(outs.len(), 1);
        for (a, b) in outs[0].data().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn layer_zero_recurrence_decouples_steps() {
        let mut p = tiny_recurrent(3, 2, 6);
        p.w_rec = Matrix::zeros(3, 3);
        let mut rng = Rng::new(8);
        let seq: Vec<Matrix> = (0..4).map(|_| rng.uniform_matrix(2, 2, -1.0, 1.0).unwrap()).collect();
        let h0 = Matrix::zeros(2, 3);
        let (outs, _) = rnn_layer_forward(seq.clone(), &p, &h0).unwrap();
        // each step must equal the isolated single-step output
        for (t, x_t) in seq.iter().enumerate() {
            let (solo, _) = rnn_layer_forward(seq[t..t + 1].to_vec(), &p, &h0).unwrap();
            assert_eq!(outs[t], solo[0], "step {t} and input {x_t:?}");
        }
    }

    #[test]
    fn layer_two_step_golden_trace() {
        // Hand-unrolled fold with H=1, D=1.
        let p = RecurrentParams {
            w_in: Matrix::from_vec(1, 1, vec![0.5]).unwrap(),
            w_rec: Matrix::from_vec(1, 1, vec![-0.25]).unwrap(),
            b: vec![0.1],
        };
        let seq = [
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            Matrix::from_vec(1, 1, vec![-2.0]).unwrap(),
        ];
        let h0 = Matrix::zeros(1, 1);
        let (outs, _) = rnn_layer_forward(seq.to_vec(), &p, &h0).unwrap();
        let h1 = (0.5_f64 * 1.0 + 0.1).tanh();
        let h2 = (0.5_f64 * -2.0 - 0.25 * h1 + 0.1).tanh();
        assert!((outs[0].get(0, 0) - h1).abs() < 1e-15);
        assert!((outs[1].get(0, 0) - h2).abs() < 1e-15);
    }

    #[test]
    fn layer_rejects_empty_sequence() {
        let p = tiny_recurrent(2, 2, 3);
        let h0 = Matrix::zeros(1, 2);
        assert!(rnn_layer_forward(Vec::new(), &p, &h0).is_err());
    }

    #[test]
    fn rnn_backward_zero_upstream_gives_zero_grads() {
        let p = tiny_recurrent(3, 2, 7);
        let mut rng = Rng::new(2);
        let seq: Vec<Matrix> = (0..3).map(|_| rng.uniform_matrix(2, 2, -1.0, 1.0).unwrap()).collect();
        let (_, cache) = rnn_layer_forward(seq.clone(), &p, &Matrix::zeros(2, 3)).unwrap();
        let zeros: Vec<Matrix> = (0..3).map(|_| Matrix::zeros(2, 3)).collect();
        let (grads, grad_in, grad_h0) = rnn_layer_backward(&cache, &p, &zeros).unwrap();
        assert!(grads.w_in.data().iter().all(|&v| v == 0.0));
        assert!(grads.w_rec.data().iter().all(|&v| v == 0.0));
        assert!(grads.b.iter().all(|&v| v == 0.0));
        assert!(grad_in.iter().all(|m| m.data().iter().all(|&v| v == 0.0)));
        assert!(grad_h0.data().iter().all(|&v| v == 0.0));
    }

    // Loss used by the finite-difference layer checks: sum of all outputs
    // weighted by fixed pseudo-random coefficients, so every coordinate of
    // the gradient is exercised.
    fn weighted_sum(outs: &[Matrix], coefs: &[Matrix]) -> f64 {
        outs.iter()
            .zip(coefs)
            .map(|(o, c)| o.data().iter().zip(c.data()).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    #[test]
    fn rnn_backward_matches_finite_differences() {
        for seed in 0..5u64 {
            let p = tiny_recurrent(3, 2, 100 + seed);
            let mut rng = Rng::new(200 + seed);
            let seq: Vec<Matrix> =
                (0..4).map(|_| rng.uniform_matrix(2, 2, -1.0, 1.0).unwrap()).collect();
            let h0 = rng.uniform_matrix(2, 3, -0.5, 0.5).unwrap();
            let coefs: Vec<Matrix> =
                (0..4).map(|_| rng.uniform_matrix(2, 3, -1.0, 1.0).unwrap()).collect();

            let (_, cache) = rnn_layer_forward(seq.clone(), &p, &h0).unwrap();
            let (grads, grad_in, grad_h0) = rnn_layer_backward(&cache, &p, &coefs).unwrap();

            // parameter gradients
            let flat = |p: &RecurrentParams| {
                let mut v = p.w_in.data().to_vec();
                v.extend_from_slice(p.w_rec.data());
                v.extend_from_slice(&p.b);
                v
            };
            let rebuild = |v: &[f64]| RecurrentParams {
                w_in: Matrix::from_vec(3, 2, v[..6].to_vec()).unwrap(),
                w_rec: Matrix::from_vec(3, 3, v[6..15].to_vec()).unwrap(),
                b: v[15..].to_vec(),
            };
            let mut analytic = grads.w_in.data().to_vec();
            analytic.extend_from_slice(grads.w_rec.data());
            analytic.extend_from_slice(&grads.b);
            let err = fd_max_rel_err(&flat(&p), &analytic, |v| {
                let (outs, _) = rnn_layer_forward(seq.clone(), &rebuild(v), &h0).unwrap();
                weighted_sum(&outs, &coefs)
            });
            assert!(err <= 1e-4, "seed {seed}: param grad err {err}");

            // input and h0 gradients
            let mut flat_in: Vec<f64> = seq.iter().flat_map(|m| m.data().to_vec()).collect();
            flat_in.extend_from_slice(h0.data());
            let analytic_in: Vec<f64> = grad_in
                .iter()
                .flat_map(|m| m.data().to_vec())
                .chain(grad_h0.data().iter().cloned())
                .collect();
            let err = fd_max_rel_err(&flat_in, &analytic_in, |v| {
                let seq2: Vec<Matrix> = (0..4)
                    .map(|t| Matrix::from_vec(2, 2, v[t * 4..(t + 1) * 4].to_vec()).unwrap())
                    .collect();
                let h02 = Matrix::from_vec(2, 3, v[16..].to_vec()).unwrap();
                let (outs, _) = rnn_layer_forward(seq2, &p, &h02).unwrap();
                weighted_sum(&outs, &coefs)
            });
            assert!(err <= 1e-4, "seed {seed}: input grad err {err}");
        }
    }

    #[test]
    fn single_step_backward_reduces_to_dense_through_tanh() {
        // With T=1 and h0=0 the recurrent layer is a dense layer through
        // tanh; its gradients must match finite differences the same way.
        let p = tiny_recurrent(2, 3, 31);
        let mut rng = Rng::new(32);
        let seq = [rng.uniform_matrix(2, 3, -1.0, 1.0).unwrap()];
        let coefs = [rng.uniform_matrix(2, 2, -1.0, 1.0).unwrap()];
        let h0 = Matrix::zeros(2, 2);
        let (_, cache) = rnn_layer_forward(seq.to_vec(), &p, &h0).unwrap();
        let (grads, _, _) = rnn_layer_backward(&cache, &p, &coefs).unwrap();
        let err = fd_max_rel_err(p.w_in.data(), grads.w_in.data(), |v| {
            let p2 = RecurrentParams {
                w_in: Matrix::from_vec(2, 3, v.to_vec()).unwrap(),
                w_rec: p.w_rec.clone(),
                b: p.b.clone(),
            };
            let (outs, _) = rnn_layer_forward(seq.to_vec(), &p2, &h0).unwrap();
            weighted_sum(&outs, &coefs)
        });
        assert!(err <= 1e-4, "err {err}");
    }

    #[test]
    fn dense_identity_and_bias_cases() {
        let p = DenseParams { w: Matrix::identity(3), b: vec![0.0; 3] };
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.0, 0.1, 9.0]]).unwrap();
        let (out, _) = dense_forward(&x, &p).unwrap();
        assert_eq!(out, x);

        let p = DenseParams { w: Matrix::zeros(2, 3), b: vec![0.7, -0.3] };
        let zero = Matrix::zeros(4, 3);
        let (out, _) = dense_forward(&zero, &p).unwrap();
        for i in 0..4 {
            assert_eq!(out.row(i), &[0.7, -0.3]);
        }
    }

    #[test]
    fn dense_backward_matches_finite_differences() {
        let mut rng = Rng::new(77);
        let p = DenseParams {
            w: rng.uniform_matrix(3, 4, -1.0, 1.0).unwrap(),
            b: rng.uniform(3, -0.5, 0.5).unwrap(),
        };
        let x = rng.uniform_matrix(5, 4, -1.0, 1.0).unwrap();
        let coef = rng.uniform_matrix(5, 3, -1.0, 1.0).unwrap();
        let (_, cache) = dense_forward(&x, &p).unwrap();
        let (grads, g_x) = dense_backward(&cache, &p, &coef).unwrap();

        let mut flat = p.w.data().to_vec();
        flat.extend_from_slice(&p.b);
        let mut analytic = grads.w.data().to_vec();
        analytic.extend_from_slice(&grads.b);
        let err = fd_max_rel_err(&flat, &analytic, |v| {
            let p2 = DenseParams {
                w: Matrix::from_vec(3, 4, v[..12].to_vec()).unwrap(),
                b: v[12..].to_vec(),
            };
            let (out, _) = dense_forward(&x, &p2).unwrap();
            out.data().iter().zip(coef.data()).map(|(a, b)| a * b).sum()
        });
        assert!(err <= 1e-4, "param err {err}");

        let err = fd_max_rel_err(x.data(), g_x.data(), |v| {
            let x2 = Matrix::from_vec(5, 4, v.to_vec()).unwrap();
            let (out, _) = dense_forward(&x2, &p).unwrap();
            out.data().iter().zip(coef.data()).map(|(a, b)| a * b).sum()
        });
        assert!(err <= 1e-4, "input err {err}");
    }

    #[test]
    fn batchnorm_constant_column_maps_to_beta() {
        let mut p = BatchNormParams::new(2);
        p.beta = vec![0.4, -0.9];
        let x = Matrix::from_rows(&[vec![3.0, 1.0], vec![3.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let (out, _) = batchnorm_forward(&x, &mut p, Mode::Train).unwrap();
        for i in 0..3 {
            assert!((out.get(i, 0) - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn batchnorm_train_normalizes_columns() {
        let mut rng = Rng::new(5);
        let x = rng.uniform_matrix(16, 3, -4.0, 4.0).unwrap();
        let mut p = BatchNormParams::new(3);
        let (out, _) = batchnorm_forward(&x, &mut p, Mode::Train).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = (0..16).map(|i| out.get(i, j)).collect();
            let mean = col.iter().sum::<f64>() / 16.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 16.0;
            // biased batch variance of the input column
            let xcol: Vec<f64> = (0..16).map(|i| x.get(i, j)).collect();
            let xm = xcol.iter().sum::<f64>() / 16.0;
            let xv = xcol.iter().map(|v| (v - xm) * (v - xm)).sum::<f64>() / 16.0;
            let expect_var = xv / (xv + p.epsilon);
            assert!(mean.abs() <= 1e-9, "col {j} mean {mean}");
            assert!((var - expect_var).abs() <= 1e-6, "col {j} var {var} vs {expect_var}");
        }
    }

    #[test]
    fn batchnorm_infer_with_unit_stats_is_near_identity() {
        let mut p = BatchNormParams::new(2);
        let x = Matrix::from_rows(&[vec![0.3, -1.4]]).unwrap();
        let (out, _) = batchnorm_forward(&x, &mut p, Mode::Infer).unwrap();
        let factor = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert!((out.get(0, 0) - 0.3 * factor).abs() < 1e-15);
        assert!((out.get(0, 1) - -1.4 * factor).abs() < 1e-15);
    }

    #[test]
    fn batchnorm_train_rejects_single_row() {
        let mut p = BatchNormParams::new(2);
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(batchnorm_forward(&x, &mut p, Mode::Train).is_err());
        assert!(batchnorm_forward(&x, &mut p, Mode::Infer).is_ok());
    }

    #[test]
    fn batchnorm_backward_rejects_infer_cache() {
        let mut p = BatchNormParams::new(2);
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let (_, cache) = batchnorm_forward(&x, &mut p, Mode::Infer).unwrap();
        assert!(batchnorm_backward(&cache, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn batchnorm_backward_matches_finite_differences() {
        let mut rng = Rng::new(40);
        let x = rng.uniform_matrix(4, 3, -2.0, 2.0).unwrap();
        let coef = rng.uniform_matrix(4, 3, -1.0, 1.0).unwrap();
        let mut p = BatchNormParams::new(3);
        p.gamma = rng.uniform(3, 0.5, 1.5).unwrap();
        p.beta = rng.uniform(3, -0.5, 0.5).unwrap();

        let (_, cache) = batchnorm_forward(&x, &mut p.clone(), Mode::Train).unwrap();
        let (g_x, g_gamma, g_beta) = batchnorm_backward(&cache, &coef).unwrap();

        // grad_beta is the column sum of the upstream gradient
        for (gb, cs) in g_beta.iter().zip(coef.column_sums()) {
            assert!((gb - cs).abs() < 1e-12);
        }

        let loss = |x2: &Matrix, p2: &BatchNormParams| {
            let (out, _) = batchnorm_forward(x2, &mut p2.clone(), Mode::Train).unwrap();
            out.data().iter().zip(coef.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let err = fd_max_rel_err(x.data(), g_x.data(), |v| {
            loss(&Matrix::from_vec(4, 3, v.to_vec()).unwrap(), &p)
        });
        assert!(err <= 1e-4, "input err {err}");

        let mut flat = p.gamma.clone();
        flat.extend_from_slice(&p.beta);
        let mut analytic = g_gamma.clone();
        analytic.extend_from_slice(&g_beta);
        let err = fd_max_rel_err(&flat, &analytic, |v| {
            let mut p2 = p.clone();
            p2.gamma = v[..3].to_vec();
            p2.beta = v[3..].to_vec();
            loss(&x, &p2)
        });
        assert!(err <= 1e-4, "gamma/beta err {err}");
    }

    #[test]
    fn batchnorm_backward_zero_grad_gives_zero() {
        let mut p = BatchNormParams::new(2);
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.0], vec![2.0, 5.0]]).unwrap();
        let (_, cache) = batchnorm_forward(&x, &mut p, Mode::Train).unwrap();
        let (g_x, g_gamma, g_beta) = batchnorm_backward(&cache, &Matrix::zeros(3, 2)).unwrap();
        assert!(g_x.data().iter().all(|&v| v == 0.0));
        assert!(g_gamma.iter().all(|&v| v == 0.0));
        assert!(g_beta.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dropout_identity_cases() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let mut spec = DropoutSpec::new(0.0, Rng::new(1)).unwrap();
        let (out, _) = dropout_forward(&x, &mut spec, Mode::Train);
        assert_eq!(out, x);
        let mut spec = DropoutSpec::new(0.9, Rng::new(1)).unwrap();
        let (out, _) = dropout_forward(&x, &mut spec, Mode::Infer);
        assert_eq!(out, x);
    }

    #[test]
    fn dropout_keep_fraction_and_mean_are_preserved() {
        let n = 100_000;
        let x = Matrix::from_vec(n / 100, 100, vec![2.0; n]).unwrap();
        let mut spec = DropoutSpec::new(0.5, Rng::new(99)).unwrap();
        let (out, mask) = dropout_forward(&x, &mut spec, Mode::Train);
        let kept = mask.data().iter().filter(|&&m| m == 1.0).count() as f64 / n as f64;
        assert!((kept - 0.5).abs() < 0.01, "kept {kept}");
        let mean = out.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() / 2.0 < 0.02, "mean {mean}");
    }

    #[test]
    fn dropout_rejects_rate_one() {
        assert!(DropoutSpec::new(1.0, Rng::new(0)).is_err());
    }

    #[test]
    fn sigmoid_and_softmax_basics() {
        let z = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(sigmoid(&z).get(0, 0), 0.5);

        let z = Matrix::from_rows(&[vec![3.0, 3.0, 3.0, 3.0]]).unwrap();
        let s = softmax(&z);
        for j in 0..4 {
            assert!((s.get(0, j) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_survives_extreme_logits() {
        let z = Matrix::from_rows(&[vec![1000.0, 0.0]]).unwrap();
        let s = softmax(&z);
        assert!(s.is_finite());
        assert!((s.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(s.get(0, 1) >= 0.0 && s.get(0, 1) < 1e-15);
        assert!((s.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn activation_ranges() {
        // strict interior holds wherever f64 can represent it
        let mut rng = Rng::new(13);
        let z = rng.uniform_matrix(8, 5, -15.0, 15.0).unwrap();
        let s = sigmoid(&z);
        assert!(s.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let t = z.map(f64::tanh);
        assert!(t.data().iter().all(|&v| v > -1.0 && v < 1.0));

        // saturating inputs still land inside the closed interval, finite
        let z = Matrix::from_rows(&[vec![-700.0, 700.0]]).unwrap();
        let s = sigmoid(&z);
        assert!(s.is_finite());
        assert!(s.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let t = z.map(f64::tanh);
        assert!(t.data().iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }
}
