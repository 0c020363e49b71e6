//! Training objectives: binary and categorical cross-entropy, the fused
//! head-plus-loss gradient, and the SGD update rule.

use crate::error::{Error, Result};
use crate::layers::{sigmoid, softmax};
use crate::tensor::Matrix;

/// Probabilities are clamped away from 0 and 1 by this margin before any
/// logarithm, bounding the loss without visibly biasing it.
pub const PROB_EPSILON: f64 = 1e-12;

/// Output head of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Single-unit logistic output for two-class problems.
    Sigmoid,
    /// Per-class distribution for multiclass problems.
    Softmax,
}

/// SGD hyperparameters. Plain SGD is the `momentum = 0` case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for SgdConfig {
    fn default() -> SgdConfig {
        SgdConfig { learning_rate: 0.01, momentum: 0.0 }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.momentum < 0.0 {
            return Err(Error::Config(format!("momentum must be >= 0, got {}", self.momentum)));
        }
        Ok(())
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

/// Mean binary cross-entropy:
/// `-(1/N) * sum(ed*ln(pd) + (1-ed)*ln(1-pd))`.
/// `expected` entries must be exactly 0 or 1.
pub fn bce_loss(predicted: &[f64], expected: &[f64]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("binary cross-entropy of an empty batch".into()));
    }
    if predicted.len() != expected.len() {
        return Err(Error::Shape(format!(
            "{} predictions against {} labels",
            predicted.len(),
            expected.len()
        )));
    }
    let mut total = 0.0;
    for (i, (&p, &e)) in predicted.iter().zip(expected).enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Data(format!("prediction {p} at index {i} outside [0,1]")));
        }
        if e != 0.0 && e != 1.0 {
            return Err(Error::Data(format!("binary label {e} at index {i} is not 0 or 1")));
        }
        let p = clamp_prob(p);
        total += e * p.ln() + (1.0 - e) * (1.0 - p).ln();
    }
    Ok(-total / predicted.len() as f64)
}

/// Mean categorical cross-entropy of the predicted distribution under the
/// true one-hot distribution: `(1/N) * sum_i -sum_k true_ik * ln(pred_ik)`.
pub fn cce_loss(predicted: &Matrix, expected: &Matrix) -> Result<f64> {
    if predicted.shape() != expected.shape() {
        return Err(Error::Shape(format!(
            "predicted {}x{} against expected {}x{}",
            predicted.rows(),
            predicted.cols(),
            expected.rows(),
            expected.cols()
        )));
    }
    let (n, k) = predicted.shape();
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("categorical cross-entropy of an empty batch".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let p_row = predicted.row(i);
        let e_row = expected.row(i);
        let p_sum: f64 = p_row.iter().sum();
        if (p_sum - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!("predicted row {i} sums to {p_sum}, not 1")));
        }
        let ones = e_row.iter().filter(|&&v| v == 1.0).count();
        if ones != 1 || e_row.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Data(format!("expected row {i} is not one-hot")));
        }
        for (&p, &e) in p_row.iter().zip(e_row) {
            if e == 1.0 {
                total -= p.max(PROB_EPSILON).ln();
            }
        }
    }
    Ok(total / n as f64)
}

/// Apply the head to `logits`, compute the matching loss against integer
/// class labels, and return the loss together with the gradient with respect
/// to the pre-head values. Both sigmoid+BCE and softmax+CCE reduce to
/// `(probability - label) / N`.
pub fn head_loss_grad(logits: &Matrix, labels: &[usize], head: Head) -> Result<(f64, Matrix)> {
    let n = logits.rows();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels against {} logit rows", labels.len(), n)));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    match head {
        Head::Sigmoid => {
            if logits.cols() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "sigmoid head expects a single output column, got {}",
                    logits.cols()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
                return Err(Error::InvalidArgument(format!(
                    "label {bad} incompatible with a sigmoid head"
                )));
            }
            let probs = sigmoid(logits);
            let expected: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
            let loss = bce_loss(probs.data(), &expected)?;
            let mut grad = probs;
            for (g, &e) in grad.data_mut().iter_mut().zip(&expected) {
                *g = (*g - e) / n as f64;
            }
            Ok((loss, grad))
        }
        Head::Softmax => {
            let k = logits.cols();
            if k < 2 {
                return Err(Error::InvalidArgument(
                    "softmax head needs at least two output columns".into(),
                ));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
                return Err(Error::InvalidArgument(format!(
                    "label {bad} out of range for a {k}-class softmax head"
                )));
            }
            let probs = softmax(logits);
            let mut one_hot = Matrix::zeros(n, k);
            for (i, &l) in labels.iter().enumerate() {
                one_hot.set(i, l, 1.0);
            }
            let loss = cce_loss(&probs, &one_hot)?;
            let mut grad = probs;
            for (g, &e) in grad.data_mut().iter_mut().zip(one_hot.data()) {
                *g = (*g - e) / n as f64;
            }
            Ok((loss, grad))
        }
    }
}

/// One SGD step on a flat parameter slice:
/// `velocity <- momentum*velocity + grad; param <- param - lr*velocity`.
pub fn sgd_step(
    param: &mut [f64],
    grad: &[f64],
    velocity: &mut [f64],
    cfg: &SgdConfig,
) -> Result<()> {
    if param.len() != grad.len() || param.len() != velocity.len() {
        return Err(Error::Shape(format!(
            "sgd over {} parameters with {} gradients and {} velocity entries",
            param.len(),
            grad.len(),
            velocity.len()
        )));
    }
    for ((p, &g), v) in param.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = cfg.momentum * *v + g;
        *p -= cfg.learning_rate * *v;
    }
    Ok(())
}

/// Matrix wrapper over [`sgd_step`]; shapes must match exactly.
pub fn sgd_step_matrix(
    param: &mut Matrix,
    grad: &Matrix,
    velocity: &mut Matrix,
    cfg: &SgdConfig,
) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != velocity.shape() {
        return Err(Error::Shape(format!(
            "sgd over {}x{} parameters with {}x{} gradients and {}x{} velocity",
            param.rows(),
            param.cols(),
            grad.rows(),
            grad.cols(),
            velocity.rows(),
            velocity.cols()
        )));
    }
    sgd_step(param.data_mut(), grad.data(), velocity.data_mut(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;
    use crate::test_util::fd_max_rel_err;

    use std::f64::consts::LN_2;
    const LN_3: f64 = 1.0986122886681098;

    #[test]
    fn bce_perfect_prediction_is_zero() {
        let loss = bce_loss(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!((0.0..=1e-11).contains(&loss), "loss {loss}");
    }

    #[test]
    fn bce_uninformed_prediction_is_ln2() {
        let loss = bce_loss(&[0.5; 7], &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((loss - LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_matches_high_precision_oracle() {
        // (-ln 0.9 - ln 0.8)/2, evaluated with extended precision externally.
        let loss = bce_loss(&[0.9, 0.2], &[1.0, 0.0]).unwrap();
        assert!((loss - 0.164252033486018).abs() < 1e-9);
    }

    #[test]
    fn bce_rejects_empty_and_invalid() {
        assert!(bce_loss(&[], &[]).is_err());
        assert!(bce_loss(&[0.5], &[0.3]).is_err());
        assert!(bce_loss(&[1.5], &[1.0]).is_err());
    }

    #[test]
    fn bce_label_flip_symmetry() {
        let mut rng = Rng::new(17);
        let pd = rng.uniform(20, 0.0, 1.0).unwrap();
        let ed: Vec<f64> = (0..20).map(|_| (rng.next_u64() % 2) as f64).collect();
        let flipped_pd: Vec<f64> = pd.iter().map(|p| 1.0 - p).collect();
        let flipped_ed: Vec<f64> = ed.iter().map(|e| 1.0 - e).collect();
        let a = bce_loss(&pd, &ed).unwrap();
        let b = bce_loss(&flipped_pd, &flipped_ed).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn cce_perfect_and_uniform() {
        let pred = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let truth = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let loss = cce_loss(&pred, &truth).unwrap();
        assert!((0.0..=1e-11).contains(&loss));

        let third = 1.0 / 3.0;
        let pred = Matrix::from_rows(&[vec![third; 3], vec![third; 3]]).unwrap();
        let truth = Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let loss = cce_loss(&pred, &truth).unwrap();
        assert!((loss - LN_3).abs() < 1e-12);
    }

    #[test]
    fn cce_matches_direct_formula() {
        let pred = Matrix::from_rows(&[vec![0.7, 0.2, 0.1]]).unwrap();
        let truth = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let loss = cce_loss(&pred, &truth).unwrap();
        assert!((loss - 0.35667494393873245).abs() < 1e-12);
    }

    #[test]
    fn cce_two_class_equals_bce() {
        let mut rng = Rng::new(23);
        let pd = rng.uniform(16, 0.01, 0.99).unwrap();
        let ed: Vec<f64> = (0..16).map(|_| (rng.next_u64() % 2) as f64).collect();
        let pred =
            Matrix::from_rows(&pd.iter().map(|&p| vec![1.0 - p, p]).collect::<Vec<_>>()).unwrap();
        let truth =
            Matrix::from_rows(&ed.iter().map(|&e| vec![1.0 - e, e]).collect::<Vec<_>>()).unwrap();
        let a = cce_loss(&pred, &truth).unwrap();
        let b = bce_loss(&pd, &ed).unwrap();
        assert!((a - b).abs() < 1e-12, "cce {a} vs bce {b}");
    }

    #[test]
    fn cce_rejects_malformed_rows() {
        let pred = Matrix::from_rows(&[vec![0.9, 0.2]]).unwrap(); // sums to 1.1
        let truth = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(cce_loss(&pred, &truth).is_err());

        let pred = Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let truth = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(); // not one-hot
        assert!(cce_loss(&pred, &truth).is_err());
    }

    #[test]
    fn head_grad_is_zero_at_perfect_prediction() {
        // extreme logits drive the sigmoid to the label
        let logits = Matrix::from_rows(&[vec![60.0], vec![-60.0]]).unwrap();
        let (_, grad) = head_loss_grad(&logits, &[1, 0], Head::Sigmoid).unwrap();
        assert!(grad.data().iter().all(|&g| g.abs() < 1e-12));
    }

    #[test]
    fn sigmoid_head_single_sample_closed_form() {
        // prob 0.8, label 1 -> grad = -0.2
        let z = (0.8f64 / 0.2).ln();
        let logits = Matrix::from_rows(&[vec![z]]).unwrap();
        let (_, grad) = head_loss_grad(&logits, &[1], Head::Sigmoid).unwrap();
        assert!((grad.get(0, 0) - -0.2).abs() < 1e-12);
    }

    #[test]
    fn head_grad_matches_finite_differences() {
        let mut rng = Rng::new(31);
        // sigmoid head
        let logits = rng.uniform_matrix(4, 1, -5.0, 5.0).unwrap();
        let labels = [1usize, 0, 0, 1];
        let (_, grad) = head_loss_grad(&logits, &labels, Head::Sigmoid).unwrap();
        let err = fd_max_rel_err(logits.data(), grad.data(), |v| {
            let l = Matrix::from_vec(4, 1, v.to_vec()).unwrap();
            head_loss_grad(&l, &labels, Head::Sigmoid).unwrap().0
        });
        assert!(err <= 1e-6, "sigmoid err {err}");

        // softmax head on a 2x3 batch, absolute tolerance
        let logits = rng.uniform_matrix(2, 3, -5.0, 5.0).unwrap();
        let labels = [2usize, 0];
        let (_, grad) = head_loss_grad(&logits, &labels, Head::Softmax).unwrap();
        let h = 1e-5;
        let mut buf = logits.data().to_vec();
        for i in 0..buf.len() {
            let orig = buf[i];
            buf[i] = orig + h;
            let up = head_loss_grad(&Matrix::from_vec(2, 3, buf.clone()).unwrap(), &labels, Head::Softmax)
                .unwrap()
                .0;
            buf[i] = orig - h;
            let down = head_loss_grad(&Matrix::from_vec(2, 3, buf.clone()).unwrap(), &labels, Head::Softmax)
                .unwrap()
                .0;
            buf[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            assert!((grad.data()[i] - numeric).abs() <= 1e-6, "coord {i}");
        }
    }

    #[test]
    fn head_label_mismatch_is_an_error() {
        let logits = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert!(head_loss_grad(&logits, &[2], Head::Sigmoid).is_err());
        let logits = Matrix::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap();
        assert!(head_loss_grad(&logits, &[3], Head::Softmax).is_err());
    }

    #[test]
    fn sgd_zero_grad_leaves_params_unchanged() {
        let mut p = vec![1.0, -2.0, 0.5];
        let mut v = vec![0.0; 3];
        let cfg = SgdConfig { learning_rate: 123.0, momentum: 0.0 };
        sgd_step(&mut p, &[0.0; 3], &mut v, &cfg).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn sgd_plain_step_is_exact() {
        let mut p = vec![1.0];
        let mut v = vec![0.0];
        let cfg = SgdConfig { learning_rate: 0.1, momentum: 0.0 };
        sgd_step(&mut p, &[2.0], &mut v, &cfg).unwrap();
        assert_eq!(p, vec![1.0 - 0.1 * 2.0]);
    }

    #[test]
    fn sgd_momentum_two_step_golden_trace() {
        let cfg = SgdConfig { learning_rate: 0.1, momentum: 0.9 };
        let mut p = vec![1.0];
        let mut v = vec![0.0];
        sgd_step(&mut p, &[2.0], &mut v, &cfg).unwrap();
        assert_eq!(v, vec![2.0]);
        assert!((p[0] - 0.8).abs() < 1e-15);
        sgd_step(&mut p, &[1.0], &mut v, &cfg).unwrap();
        assert!((v[0] - 2.8).abs() < 1e-15);
        assert!((p[0] - 0.52).abs() < 1e-15);
    }

    #[test]
    fn sgd_rejects_shape_mismatch() {
        let mut p = vec![1.0, 2.0];
        let mut v = vec![0.0, 0.0];
        assert!(sgd_step(&mut p, &[1.0], &mut v, &SgdConfig::default()).is_err());
        let mut pm = Matrix::zeros(2, 2);
        let mut vm = Matrix::zeros(2, 2);
        let g = Matrix::zeros(2, 3);
        assert!(sgd_step_matrix(&mut pm, &g, &mut vm, &SgdConfig::default()).is_err());
    }

    #[test]
    fn losses_are_finite_and_nonnegative_on_clamped_extremes() {
        let loss = bce_loss(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
    }
}
