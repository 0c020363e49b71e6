//! Linear SVM baseline trained by stochastic subgradient descent on the
//! hinge loss with the `1/(lambda*t)` step schedule, one-vs-rest for
//! multiclass. Features are standardized inside training and the transform
//! travels with the model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::ByteReader;
use crate::par::parallel_map;
use crate::tensor::{Matrix, Rng};

/// SVM training knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// L2 regularization coefficient.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> SvmConfig {
        SvmConfig { lambda: 1e-4, epochs: 50, seed: 42 }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// One linear scorer `w·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMachine {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearMachine {
    fn zeros(features: usize) -> LinearMachine {
        LinearMachine { w: vec![0.0; features], b: 0.0 }
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }
}

/// A trained SVM: one machine for binary problems, one per class otherwise,
/// plus the feature standardization fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    machines: Vec<LinearMachine>,
    feature_means: Vec<f64>,
    feature_stds: Vec<f64>,
    n_classes: usize,
}

fn standardization(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    let mut means = x.column_sums();
    for m in &mut means {
        *m /= n;
    }
    let mut vars = vec![0.0; x.cols()];
    for i in 0..x.rows() {
        for (v, (&val, &m)) in vars.iter_mut().zip(x.row(i).iter().zip(&means)) {
            let d = val - m;
            *v += d * d;
        }
    }
    let stds = vars
        .iter()
        .map(|&v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (means, stds)
}

fn standardize_row(row: &[f64], means: &[f64], stds: &[f64], out: &mut [f64]) {
    for ((o, &v), (&m, &s)) in out.iter_mut().zip(row).zip(means.iter().zip(stds)) {
        *o = (v - m) / s;
    }
}

/// Pegasos-style training of one binary machine over standardized rows with
/// targets in {-1, +1}.
fn train_machine(
    rows: &Matrix,
    targets: &[f64],
    cfg: &SvmConfig,
    seed: u64,
) -> LinearMachine {
    let mut machine = LinearMachine::zeros(rows.cols());
    let mut rng = Rng::new(seed);
    let mut order: Vec<usize> = (0..rows.rows()).collect();
    let mut t = 0u64;
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (cfg.lambda * t as f64);
            let x = rows.row(i);
            let y = targets[i];
            let margin = y * machine.score(x);
            let shrink = 1.0 - eta * cfg.lambda;
            if margin < 1.0 {
                for (w, &v) in machine.w.iter_mut().zip(x) {
                    *w = shrink * *w + eta * y * v;
                }
                machine.b += eta * y; // bias is not regularized
            } else {
                for w in machine.w.iter_mut() {
                    *w *= shrink;
                }
            }
        }
    }
    machine
}

/// Train the baseline. Binary labels map to -1/+1; multiclass trains one
/// independent one-vs-rest machine per class on up to `jobs` threads, each
/// with its own pre-derived seed, so results are schedule-independent.
pub fn svm_train(ds: &Dataset, cfg: &SvmConfig, jobs: usize) -> Result<SvmModel> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let counts = ds.class_counts();
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::Data(format!(
            "need at least 2 classes present, got {present}"
        )));
    }
    let k = ds.schema.n_classes;

    let (means, stds) = standardization(&ds.x);
    let mut std_data = vec![0.0; ds.len() * ds.x.cols()];
    for i in 0..ds.len() {
        standardize_row(
            ds.x.row(i),
            &means,
            &stds,
            &mut std_data[i * ds.x.cols()..(i + 1) * ds.x.cols()],
        );
    }
    let rows = Matrix::from_vec(ds.len(), ds.x.cols(), std_data)?;

    let n_machines = if k == 2 { 1 } else { k };
    let mut seed_rng = Rng::new(cfg.seed);
    let seeds: Vec<u64> = (0..n_machines).map(|_| seed_rng.next_u64()).collect();

    let machines = parallel_map(jobs, seeds, |c, seed| {
        let targets: Vec<f64> = if k == 2 {
            ds.y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
        } else {
            ds.y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect()
        };
        train_machine(&rows, &targets, cfg, seed)
    });

    Ok(SvmModel { machines, feature_means: means, feature_stds: stds, n_classes: k })
}

impl SvmModel {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.feature_means.len()
    }

    pub fn machines(&self) -> &[LinearMachine] {
        &self.machines
    }

    /// Raw per-machine scores for one already-standardized row.
    fn scores(&self, std_row: &[f64]) -> Vec<f64> {
        self.machines.iter().map(|m| m.score(std_row)).collect()
    }

    /// Predicted labels: binary is 1 iff the score is non-negative;
    /// multiclass takes the best per-class score, ties toward lower index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.n_features() {
            return Err(Error::Shape(format!(
                "input of {}x{} against {} features",
                x.rows(),
                x.cols(),
                self.n_features()
            )));
        }
        let mut std_row = vec![0.0; x.cols()];
        let mut labels = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            standardize_row(x.row(i), &self.feature_means, &self.feature_stds, &mut std_row);
            let scores = self.scores(&std_row);
            let label = if self.n_classes == 2 {
                usize::from(scores[0] >= 0.0)
            } else {
                let mut best = 0usize;
                for (j, &s) in scores.iter().enumerate() {
                    if s > scores[best] {
                        best = j;
                    }
                }
                best
            };
            labels.push(label);
        }
        Ok(labels)
    }

    /// Regularized primal objective on a dataset (used to watch training).
    pub fn objective(&self, ds: &Dataset, lambda: f64) -> Result<f64> {
        if ds.x.cols() != self.n_features() {
            return Err(Error::Shape("feature arity mismatch".into()));
        }
        let mut std_row = vec![0.0; ds.x.cols()];
        let mut total = 0.0;
        for (c, machine) in self.machines.iter().enumerate() {
            let norm2: f64 = machine.w.iter().map(|w| w * w).sum();
            let mut hinge = 0.0;
            for i in 0..ds.len() {
                standardize_row(ds.x.row(i), &self.feature_means, &self.feature_stds, &mut std_row);
                let y = if self.n_classes == 2 {
                    if ds.y[i] == 1 {
                        1.0
                    } else {
                        -1.0
                    }
                } else if ds.y[i] == c {
                    1.0
                } else {
                    -1.0
                };
                hinge += (1.0 - y * machine.score(&std_row)).max(0.0);
            }
            total += lambda / 2.0 * norm2 + hinge / ds.len() as f64;
        }
        Ok(total)
    }
}

// ---------------------------------------------------------------------------
// Persistence: same envelope as the network model, distinct format tag.
// ---------------------------------------------------------------------------

const SVM_MAGIC: &[u8; 4] = b"SVM1";
const SVM_VERSION: u32 = 1;

impl SvmModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SVM_MAGIC);
        out.extend_from_slice(&SVM_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_classes as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_features() as u32).to_le_bytes());
        let mut push = |vs: &[f64]| {
            vs.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        };
        push(&self.feature_means);
        push(&self.feature_stds);
        for m in &self.machines {
            push(&m.w);
            push(&[m.b]);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SvmModel> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != SVM_MAGIC {
            return Err(Error::Parse("not an svm model file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != SVM_VERSION {
            return Err(Error::Parse(format!("unsupported svm format version {version}")));
        }
        let n_classes = r.u32()? as usize;
        let n_features = r.u32()? as usize;
        if n_classes < 2 || n_features == 0 {
            return Err(Error::Parse("degenerate svm header".into()));
        }
        let feature_means = r.f64_vec(n_features)?;
        let feature_stds = r.f64_vec(n_features)?;
        let n_machines = if n_classes == 2 { 1 } else { n_classes };
        let mut machines = Vec::with_capacity(n_machines);
        for _ in 0..n_machines {
            let w = r.f64_vec(n_features)?;
            let b = r.f64()?;
            machines.push(LinearMachine { w, b });
        }
        r.finish()?;
        Ok(SvmModel { machines, feature_means, feature_stds, n_classes })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SvmModel> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        SvmModel::from_bytes(&bytes)
    }
}
