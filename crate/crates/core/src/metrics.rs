//! Confusion-matrix metrics and the stratified 10-fold cross-validation
//! machinery used for model selection.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{build_model, train, TopologyConfig, TrainConfig};
use crate::par::parallel_map;
use crate::tensor::Rng;

/// `k x k` grid of counts indexed `[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn count(&self, actual: usize, predicted: usize) -> usize {
        self.counts[actual * self.k + predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    fn actual_count(&self, class: usize) -> usize {
        (0..self.k).map(|p| self.count(class, p)).sum()
    }

    fn predicted_count(&self, class: usize) -> usize {
        (0..self.k).map(|a| self.count(a, class)).sum()
    }
}

/// Tally predictions against ground truth.
pub fn confusion(predicted: &[usize], actual: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::Shape(format!(
            "{} predictions against {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("class count must be positive".into()));
    }
    let mut counts = vec![0usize; k * k];
    for (i, (&p, &a)) in predicted.iter().zip(actual).enumerate() {
        if p >= k || a >= k {
            return Err(Error::Data(format!(
                "sample {i}: label pair ({a}, {p}) out of range for {k} classes"
            )));
        }
        counts[a * k + p] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

/// How multi-number metrics were reduced to single numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Binary: metrics of the positive class (label 1).
    PositiveClass,
    /// Multiclass: support-weighted average of per-class metrics.
    Weighted,
}

/// Accuracy, precision, recall, and F-score of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub averaging: Averaging,
}

fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics from a confusion matrix. Binary problems report the positive
/// class; larger problems report support-weighted averages. Per-class
/// metrics with zero denominators count as 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("metrics of an empty confusion matrix".into()));
    }
    let trace: usize = (0..cm.k).map(|c| cm.count(c, c)).sum();
    let accuracy = trace as f64 / total as f64;

    if cm.k == 2 {
        let precision = ratio(cm.count(1, 1), cm.predicted_count(1));
        let recall = ratio(cm.count(1, 1), cm.actual_count(1));
        Ok(MetricsReport {
            accuracy,
            precision,
            recall,
            f_score: f_score(precision, recall),
            averaging: Averaging::PositiveClass,
        })
    } else {
        let mut precision = 0.0;
        let mut recall = 0.0;
        let mut f = 0.0;
        for c in 0..cm.k {
            let support = cm.actual_count(c) as f64 / total as f64;
            let p_c = ratio(cm.count(c, c), cm.predicted_count(c));
            let r_c = ratio(cm.count(c, c), cm.actual_count(c));
            precision += support * p_c;
            recall += support * r_c;
            f += support * f_score(p_c, r_c);
        }
        Ok(MetricsReport {
            accuracy,
            precision,
            recall,
            f_score: f,
            averaging: Averaging::Weighted,
        })
    }
}

impl MetricsReport {
    /// One CSV row in the benchmark-table column order:
    /// algorithm, task, accuracy, precision, recall, f_score.
    pub fn csv_row(&self, algorithm: &str, task: &str) -> String {
        format!(
            "{algorithm},{task},{},{},{},{}",
            self.accuracy, self.precision, self.recall, self.f_score
        )
    }
}

/// Assignment of every sample to one of `k` folds, stratified by class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Sample indices held out by fold `f`, in dataset order.
    pub fn fold_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == f).collect()
    }

    /// Sample indices outside fold `f`, in dataset order.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != f).collect()
    }
}

/// Stratified fold plan: within each class, indices are seeded-shuffled and
/// dealt round-robin, so per-fold class counts stay within one of perfect
/// stratification. Classes with fewer than `k` samples simply spread across
/// the first folds.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("fold count must be at least 2, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("cannot fold an empty label vector".into()));
    }
    let n_classes = labels.iter().max().expect("nonempty") + 1;
    let mut rng = Rng::new(seed);
    let mut assignments = vec![0usize; labels.len()];
    for class in 0..n_classes {
        let mut members: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rng.shuffle(&mut members);
        for (pos, &sample) in members.iter().enumerate() {
            assignments[sample] = pos % k;
        }
    }
    Ok(FoldPlan { k, assignments })
}

/// Seed for one cross-validation fold: one split step of the pinned
/// generator over `cfg_seed XOR fold`.
pub fn fold_seed(cfg_seed: u64, fold: usize) -> u64 {
    Rng::new(cfg_seed ^ fold as u64).next_u64()
}

/// K-fold cross-validation of a topology: for each fold, a fresh model is
/// built and trained on the other folds, then evaluated on the held-out
/// fold. Returns the unweighted mean of fold accuracies plus the per-fold
/// reports. Fold trainings are independent and run on up to `jobs` threads;
/// results are ordered by fold index either way.
pub fn cross_validate(
    topology: &TopologyConfig,
    dataset: &Dataset,
    cfg: &TrainConfig,
    k: usize,
    jobs: usize,
) -> Result<(f64, Vec<MetricsReport>)> {
    let plan = stratified_kfold(&dataset.y, k, cfg.seed)?;
    let folds: Vec<usize> = (0..k).collect();
    let outcomes = parallel_map(jobs, folds, |_, fold| -> Result<MetricsReport> {
        let seed = fold_seed(cfg.seed, fold);
        let train_idx = plan.train_indices(fold);
        let test_idx = plan.fold_indices(fold);
        if train_idx.is_empty() || test_idx.is_empty() {
            return Err(Error::Data(format!("fold {fold} is degenerate")));
        }
        let train_set = dataset.subset(&train_idx)?;
        let test_set = dataset.subset(&test_idx)?;
        let mut model =
            build_model(topology, dataset.schema.n_features, dataset.schema.n_classes, seed)?;
        let fold_cfg = TrainConfig { seed, ..*cfg };
        train(&mut model, &train_set, &fold_cfg)
            .map_err(|e| e.in_stage(&format!("fold {fold}")))?;
        let (predicted, _) = model.predict(&test_set.x)?;
        let cm = confusion(&predicted, &test_set.y, dataset.schema.n_classes)?;
        metrics(&cm)
    });

    let mut reports = Vec::with_capacity(k);
    for outcome in outcomes {
        reports.push(outcome?);
    }
    let mean = reports.iter().map(|r| r.accuracy).sum::<f64>() / reports.len() as f64;
    Ok((mean, reports))
}
