//! Python bindings: the main pipeline types and operations exposed as a
//! `recnet_py` extension module.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use recnet::data::{
    fraud_spec, hcrud_generate, incident_spec, load_csv, save_csv, split, synth_apk_features,
    ApkSpec, Dataset as CoreDataset, DatasetSchema, HcrudSpec,
};
use recnet::metrics::{confusion, cross_validate, metrics, stratified_kfold};
use recnet::model::{
    build_model, gradient_check, train, HeadChoice, Model as CoreModel, TopologyConfig,
    TrainConfig,
};
use recnet::pipeline::{cmd_benchmark, cmd_generate, RunConfig};
use recnet::svm::{svm_train, SvmConfig, SvmModel as CoreSvm};
use recnet::tensor::{Matrix, Rng as CoreRng};

fn err_to_py(e: recnet::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows_to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err_to_py)
}

/// The pinned deterministic generator (SplitMix64).
#[pyclass]
struct Rng {
    inner: CoreRng,
}

#[pymethods]
impl Rng {
    #[new]
    fn new(seed: u64) -> Rng {
        Rng { inner: CoreRng::new(seed) }
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn next_f64(&mut self) -> f64 {
        self.inner.next_f64()
    }

    fn uniform(&mut self, n: usize, lo: f64, hi: f64) -> PyResult<Vec<f64>> {
        self.inner.uniform(n, lo, hi).map_err(err_to_py)
    }
}

/// A feature matrix with integer labels and its task schema.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: CoreDataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> PyResult<Dataset> {
        let x = rows_to_matrix(rows)?;
        let schema = DatasetSchema::custom(x.cols(), n_classes);
        Ok(Dataset { inner: CoreDataset::new(x, labels, schema).map_err(err_to_py)? })
    }

    /// Parse an HCRUD generator spec (JSON) and generate the dataset.
    #[staticmethod]
    fn hcrud(spec_json: &str) -> PyResult<Dataset> {
        let spec = HcrudSpec::from_json(spec_json).map_err(err_to_py)?;
        Ok(Dataset { inner: hcrud_generate(&spec).map_err(err_to_py)? })
    }

    /// The shipped synthetic fraud task (12 features, 3 classes).
    #[staticmethod]
    fn fraud(n_samples: usize, seed: u64) -> PyResult<Dataset> {
        Ok(Dataset { inner: hcrud_generate(&fraud_spec(n_samples, seed)).map_err(err_to_py)? })
    }

    /// The shipped synthetic incident task (9 features, 2 classes).
    #[staticmethod]
    fn incident(n_samples: usize, seed: u64) -> PyResult<Dataset> {
        Ok(Dataset {
            inner: hcrud_generate(&incident_spec(n_samples, seed)).map_err(err_to_py)?,
        })
    }

    /// Sparse binary API-style features with a hidden linear labeling rule.
    #[staticmethod]
    #[pyo3(signature = (n_samples, seed, n_features = 4896, density = 0.02))]
    fn apk(n_samples: usize, seed: u64, n_features: usize, density: f64) -> PyResult<Dataset> {
        let spec = ApkSpec { n_samples, n_features, density, seed };
        Ok(Dataset { inner: synth_apk_features(&spec).map_err(err_to_py)? })
    }

    #[staticmethod]
    fn load_csv(path: PathBuf, n_features: usize, n_classes: usize) -> PyResult<Dataset> {
        let schema = DatasetSchema::custom(n_features, n_classes);
        Ok(Dataset { inner: load_csv(&path, &schema).map_err(err_to_py)? })
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        save_csv(&self.inner, &path).map_err(err_to_py)
    }

    #[pyo3(signature = (train_fraction = 0.7, seed = 42, stratified = true))]
    fn split(
        &self,
        train_fraction: f64,
        seed: u64,
        stratified: bool,
    ) -> PyResult<(Dataset, Dataset)> {
        let (a, b) = split(&self.inner, train_fraction, seed, stratified).map_err(err_to_py)?;
        Ok((Dataset { inner: a }, Dataset { inner: b }))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.schema.n_features
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.inner.schema.n_classes
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.y.clone()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.x.row(i).to_vec())
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.x.row(i).to_vec()).collect()
    }

    fn class_counts(&self) -> Vec<usize> {
        self.inner.class_counts()
    }
}

/// The recurrent classifier.
#[pyclass]
struct Model {
    inner: CoreModel,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (
        input_dim,
        num_classes,
        seed = 42,
        depth = 1,
        hidden_units = 64,
        dropout_rate = 0.001,
        use_batchnorm = true,
        per_feature = true,
        head = "auto",
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        input_dim: usize,
        num_classes: usize,
        seed: u64,
        depth: usize,
        hidden_units: usize,
        dropout_rate: f64,
        use_batchnorm: bool,
        per_feature: bool,
        head: &str,
    ) -> PyResult<Model> {
        let head = match head {
            "auto" => HeadChoice::Auto,
            "sigmoid" => HeadChoice::Sigmoid,
            "softmax" => HeadChoice::Softmax,
            other => {
                return Err(PyValueError::new_err(format!(
                    "head must be auto|sigmoid|softmax, got {other}"
                )))
            }
        };
        let topology = TopologyConfig {
            num_recurrent_layers: depth,
            hidden_units,
            dropout_rate,
            use_batchnorm,
            sequence_mode: if per_feature {
                recnet::data::SequenceMode::PerFeature
            } else {
                recnet::data::SequenceMode::SingleStep
            },
            head,
        };
        Ok(Model { inner: build_model(&topology, input_dim, num_classes, seed).map_err(err_to_py)? })
    }

    /// Train in place; returns per-epoch (mean_loss, accuracy) pairs.
    #[pyo3(signature = (dataset, epochs = 100, learning_rate = 0.01, batch_size = 128, seed = 42, shuffle = true))]
    fn train(
        &mut self,
        dataset: &Dataset,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
        seed: u64,
        shuffle: bool,
    ) -> PyResult<Vec<(f64, f64)>> {
        let cfg = TrainConfig { learning_rate, epochs, batch_size, seed, shuffle };
        let history = train(&mut self.inner, &dataset.inner, &cfg).map_err(err_to_py)?;
        Ok(history.epochs.iter().map(|e| (e.mean_loss, e.accuracy)).collect())
    }

    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        let x = rows_to_matrix(rows)?;
        Ok(self.inner.predict(&x).map_err(err_to_py)?.0)
    }

    fn predict_proba(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = rows_to_matrix(rows)?;
        let (_, probs) = self.inner.predict(&x).map_err(err_to_py)?;
        Ok((0..probs.rows()).map(|i| probs.row(i).to_vec()).collect())
    }

    /// Max relative error of analytic gradients against central finite
    /// differences on one small batch.
    fn gradient_check(&self, rows: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
        let x = rows_to_matrix(rows)?;
        gradient_check(&self.inner, &x, &labels).map_err(err_to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err_to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Model> {
        Ok(Model { inner: CoreModel::load(&path).map_err(err_to_py)? })
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn hidden_units(&self) -> usize {
        self.inner.hidden_units()
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.inner.num_parameters()
    }
}

/// The linear one-vs-rest SVM baseline.
#[pyclass]
struct Svm {
    inner: CoreSvm,
}

#[pymethods]
impl Svm {
    #[staticmethod]
    #[pyo3(signature = (dataset, lambda_ = 1e-4, epochs = 50, seed = 42, jobs = 1))]
    fn train(
        dataset: &Dataset,
        lambda_: f64,
        epochs: usize,
        seed: u64,
        jobs: usize,
    ) -> PyResult<Svm> {
        let cfg = SvmConfig { lambda: lambda_, epochs, seed };
        Ok(Svm { inner: svm_train(&dataset.inner, &cfg, jobs).map_err(err_to_py)? })
    }

    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        let x = rows_to_matrix(rows)?;
        self.inner.predict(&x).map_err(err_to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err_to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Svm> {
        Ok(Svm { inner: CoreSvm::load(&path).map_err(err_to_py)? })
    }
}

/// Confusion-matrix metrics of a prediction: returns a dict with accuracy,
/// precision, recall, and f_score.
#[pyfunction]
fn evaluate(
    py: Python<'_>,
    predicted: Vec<usize>,
    actual: Vec<usize>,
    n_classes: usize,
) -> PyResult<Py<PyAny>> {
    let cm = confusion(&predicted, &actual, n_classes).map_err(err_to_py)?;
    let m = metrics(&cm).map_err(err_to_py)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("accuracy", m.accuracy)?;
    dict.set_item("precision", m.precision)?;
    dict.set_item("recall", m.recall)?;
    dict.set_item("f_score", m.f_score)?;
    Ok(dict.into())
}

/// Stratified fold assignment for every sample.
#[pyfunction]
#[pyo3(signature = (labels, k = 10, seed = 42))]
fn kfold_assignments(labels: Vec<usize>, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    Ok(stratified_kfold(&labels, k, seed).map_err(err_to_py)?.assignments().to_vec())
}

/// K-fold cross-validation accuracy of a topology on a dataset.
#[pyfunction]
#[pyo3(signature = (dataset, depth = 1, hidden_units = 16, epochs = 10, learning_rate = 0.01, k = 10, seed = 42, jobs = 1))]
#[allow(clippy::too_many_arguments)]
fn cv_accuracy(
    dataset: &Dataset,
    depth: usize,
    hidden_units: usize,
    epochs: usize,
    learning_rate: f64,
    k: usize,
    seed: u64,
    jobs: usize,
) -> PyResult<f64> {
    let topology =
        TopologyConfig { num_recurrent_layers: depth, hidden_units, ..TopologyConfig::default() };
    let cfg = TrainConfig { learning_rate, epochs, seed, ..TrainConfig::default() };
    let (mean, _) = cross_validate(&topology, &dataset.inner, &cfg, k, jobs).map_err(err_to_py)?;
    Ok(mean)
}

/// Run the `generate` command from a JSON run config; returns the manifest
/// as a JSON string.
#[pyfunction]
fn generate_from_config(config_json: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(config_json).map_err(err_to_py)?;
    let out = cmd_generate(&cfg).map_err(err_to_py)?;
    Ok(out.manifest.to_json())
}

/// Run the `benchmark` command from a JSON run config; returns the report
/// CSV (header plus one row per algorithm).
#[pyfunction]
fn benchmark_from_config(config_json: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(config_json).map_err(err_to_py)?;
    let out = cmd_benchmark(&cfg).map_err(err_to_py)?;
    Ok(out.report.to_csv())
}

#[pymodule]
fn recnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Rng>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Svm>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(kfold_assignments, m)?)?;
    m.add_function(wrap_pyfunction!(cv_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(generate_from_config, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark_from_config, m)?)?;
    Ok(())
}
