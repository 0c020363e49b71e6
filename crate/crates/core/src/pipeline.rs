//! The operator surface behind the CLI: run configs bind a task, a dataset
//! source, and the training/search knobs; commands generate data, train,
//! evaluate, cross-validate, search, and emit benchmark reports. Every
//! command is deterministic given (config, seed): reruns produce
//! byte-identical output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    fraud_spec, hcrud_generate, incident_spec, load_csv, split, synth_apk_features, ApkSpec,
    Dataset, DatasetSchema, HcrudSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{confusion, cross_validate, metrics, MetricsReport};
use crate::model::{build_model, train, Model, TopologyConfig, TrainConfig, TrainHistory};
use crate::search::{search_depth, search_lr, search_units, SearchResult, SearchSpace, SearchStage};
use crate::svm::{svm_train, SvmConfig, SvmModel};

/// Which task profile a run instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskSelector {
    Task1,
    Task2,
    Task3,
    Custom { n_features: usize, n_classes: usize },
}

impl TaskSelector {
    pub fn schema(&self) -> DatasetSchema {
        match *self {
            TaskSelector::Task1 => DatasetSchema::task1(),
            TaskSelector::Task2 => DatasetSchema::task2(),
            TaskSelector::Task3 => DatasetSchema::task3(),
            TaskSelector::Custom { n_features, n_classes } => {
                DatasetSchema::custom(n_features, n_classes)
            }
        }
    }

    /// Default recurrent depth per task profile.
    pub fn default_depth(&self) -> usize {
        match self {
            TaskSelector::Task1 => 6,
            _ => 3,
        }
    }
}

/// Where the data comes from: a generator spec or a pair of CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Generate(GenerateSpec),
    Csv { train: PathBuf, test: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerateSpec {
    Hcrud(HcrudSpec),
    Apk(ApkSpec),
}

impl GenerateSpec {
    pub fn seed(&self) -> u64 {
        match self {
            GenerateSpec::Hcrud(s) => s.seed,
            GenerateSpec::Apk(s) => s.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            GenerateSpec::Hcrud(s) => s.seed = seed,
            GenerateSpec::Apk(s) => s.seed = seed,
        }
    }

    fn scaled(&self, scale: f64) -> GenerateSpec {
        let mut out = self.clone();
        match &mut out {
            GenerateSpec::Hcrud(s) => s.n_samples = scaled_samples(s.n_samples, scale),
            GenerateSpec::Apk(s) => s.n_samples = scaled_samples(s.n_samples, scale),
        }
        out
    }

    fn generate(&self) -> Result<Dataset> {
        match self {
            GenerateSpec::Hcrud(s) => hcrud_generate(s),
            GenerateSpec::Apk(s) => synth_apk_features(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Text,
    Both,
}

impl ReportFormat {
    fn csv(&self) -> bool {
        matches!(self, ReportFormat::Csv | ReportFormat::Both)
    }

    fn text(&self) -> bool {
        matches!(self, ReportFormat::Text | ReportFormat::Both)
    }
}

/// Everything a command needs. Flag overrides beat file values, which beat
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskSelector,
    /// Dataset source; omitted means the task profile's default generator.
    pub dataset: Option<DataSource>,
    /// Topology; omitted means the task profile depth with default knobs.
    pub topology: Option<TopologyConfig>,
    pub training: TrainConfig,
    pub search: SearchSpace,
    pub svm: SvmConfig,
    /// Master seed: seeds default generators and the train/test split.
    pub seed: u64,
    /// Uniformly shrinks sample counts and epoch budgets; 1.0 is the
    /// full protocol scale.
    pub scale: f64,
    pub jobs: usize,
    pub cv_folds: usize,
    pub train_fraction: f64,
    pub out_dir: PathBuf,
    pub format: ReportFormat,
    /// Model file for `evaluate`.
    pub model: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            task: TaskSelector::Task2,
            dataset: None,
            topology: None,
            training: TrainConfig::default(),
            search: SearchSpace::default(),
            svm: SvmConfig::default(),
            seed: 42,
            scale: 1.0,
            jobs: 1,
            cv_folds: 10,
            train_fraction: 0.7,
            out_dir: PathBuf::from("out"),
            format: ReportFormat::Both,
            model: None,
        }
    }
}

/// Flag-level overrides (flag > file > default).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scale: Option<f64>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<ReportFormat>,
    pub model: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
            .map_err(|e| e.in_stage(&format!("config {}", path.display())))
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale.is_nan() || self.scale <= 0.0 {
            return Err(Error::Config(format!("scale must be positive, got {}", self.scale)));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must be in (0,1), got {}",
                self.train_fraction
            )));
        }
        self.training.validate()?;
        self.search.validate()?;
        self.svm.validate()?;
        if let Some(t) = &self.topology {
            t.validate()?;
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, ov: &Overrides) {
        if let Some(seed) = ov.seed {
            self.seed = seed;
            self.training.seed = seed;
            self.svm.seed = seed;
            if let Some(DataSource::Generate(g)) = &mut self.dataset {
                g.set_seed(seed);
            }
        }
        if let Some(scale) = ov.scale {
            self.scale = scale;
        }
        if let Some(jobs) = ov.jobs {
            self.jobs = jobs;
        }
        if let Some(dir) = &ov.out_dir {
            self.out_dir = dir.clone();
        }
        if let Some(format) = ov.format {
            self.format = format;
        }
        if let Some(model) = &ov.model {
            self.model = Some(model.clone());
        }
    }

    /// Topology for this run: explicit config wins, otherwise the task
    /// profile depth over default knobs.
    pub fn resolved_topology(&self) -> TopologyConfig {
        self.topology.unwrap_or(TopologyConfig {
            num_recurrent_layers: self.task.default_depth(),
            ..TopologyConfig::default()
        })
    }

    /// Generator spec for this run (before scaling): explicit config wins,
    /// otherwise the task profile default seeded by the master seed.
    pub fn generator_spec(&self) -> Result<GenerateSpec> {
        match &self.dataset {
            Some(DataSource::Generate(g)) => Ok(g.clone()),
            Some(DataSource::Csv { .. }) => Err(Error::Config(
                "this run reads CSV files; there is nothing to generate".into(),
            )),
            None => match self.task {
                TaskSelector::Task1 => Ok(GenerateSpec::Apk(ApkSpec {
                    n_samples: 61_730,
                    n_features: 4896,
                    density: 0.02,
                    seed: self.seed,
                })),
                TaskSelector::Task2 => {
                    Ok(GenerateSpec::Hcrud(incident_spec(100_000, self.seed)))
                }
                TaskSelector::Task3 => Ok(GenerateSpec::Hcrud(fraud_spec(100_000, self.seed))),
                TaskSelector::Custom { .. } => Err(Error::Config(
                    "custom tasks need an explicit dataset source".into(),
                )),
            },
        }
    }

    fn scaled_training(&self) -> TrainConfig {
        TrainConfig { epochs: scaled_epochs(self.training.epochs, self.scale), ..self.training }
    }

    fn scaled_search(&self) -> SearchSpace {
        let mut s = self.search.clone();
        s.units_epochs = scaled_epochs(s.units_epochs, self.scale);
        s.lr_epochs = scaled_epochs(s.lr_epochs, self.scale);
        s.depth_epochs = scaled_epochs(s.depth_epochs, self.scale);
        s
    }

    fn scaled_svm(&self) -> SvmConfig {
        SvmConfig { epochs: scaled_epochs(self.svm.epochs, self.scale), ..self.svm }
    }

    /// Produce the train/test pair this run operates on.
    pub fn materialize(&self) -> Result<(Dataset, Dataset)> {
        match &self.dataset {
            Some(DataSource::Csv { train, test }) => {
                let schema = self.task.schema().without_declared_sizes();
                Ok((load_csv(train, &schema)?, load_csv(test, &schema)?))
            }
            _ => {
                let spec = self.generator_spec()?.scaled(self.scale);
                let full = spec.generate()?;
                split(&full, self.train_fraction, self.seed, true)
            }
        }
    }
}

fn scaled_samples(n: usize, scale: f64) -> usize {
    (((n as f64) * scale + 0.5).floor() as usize).max(10)
}

fn scaled_epochs(e: usize, scale: f64) -> usize {
    if e == 0 {
        return 0;
    }
    ((((e as f64) * scale) + 0.5).floor() as usize).max(1)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create output dir {}: {e}", dir.display())))
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

/// What `generate` wrote, with content digests for reproducibility checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: GenerateSpec,
    pub seed: u64,
    pub scale: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_sha256: String,
    pub test_sha256: String,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Manifest> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOutput {
    pub train_path: PathBuf,
    pub test_path: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

/// Generate the configured dataset, split it, and write `train.csv`,
/// `test.csv`, and `manifest.json` under the output directory.
pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateOutput> {
    let run = || -> Result<GenerateOutput> {
        cfg.validate()?;
        ensure_out_dir(&cfg.out_dir)?;
        let spec = cfg.generator_spec()?.scaled(cfg.scale);
        let full = spec.generate()?;
        let (train, test) = split(&full, cfg.train_fraction, cfg.seed, true)?;

        let train_csv = crate::data::dataset_to_csv(&train);
        let test_csv = crate::data::dataset_to_csv(&test);
        let manifest = Manifest {
            spec,
            seed: cfg.seed,
            scale: cfg.scale,
            train_rows: train.len(),
            test_rows: test.len(),
            train_sha256: sha256_hex(train_csv.as_bytes()),
            test_sha256: sha256_hex(test_csv.as_bytes()),
        };
        let train_path = cfg.out_dir.join("train.csv");
        let test_path = cfg.out_dir.join("test.csv");
        let manifest_path = cfg.out_dir.join("manifest.json");
        std::fs::write(&train_path, train_csv)?;
        std::fs::write(&test_path, test_csv)?;
        std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).expect("manifest"))?;
        Ok(GenerateOutput { train_path, test_path, manifest_path, manifest })
    };
    run().map_err(|e| e.in_stage("generate"))
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model_path: PathBuf,
    pub history_path: PathBuf,
    pub history: TrainHistory,
    pub algorithm: String,
}

/// Per-epoch history CSV. Wall-clock timings stay in memory only, so the
/// file is identical across reruns.
pub fn history_to_csv(history: &TrainHistory) -> String {
    let mut out = String::from("epoch,mean_loss,accuracy\n");
    for (i, e) in history.epochs.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{}", e.mean_loss, e.accuracy);
    }
    out
}

/// Train the configured network on the train split and write `model.bin`
/// plus `history.csv`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutput> {
    let run = || -> Result<TrainOutput> {
        cfg.validate()?;
        ensure_out_dir(&cfg.out_dir)?;
        let (train_set, _) = cfg.materialize()?;
        let topology = cfg.resolved_topology();
        let mut model = build_model(
            &topology,
            train_set.schema.n_features,
            train_set.schema.n_classes,
            cfg.training.seed,
        )?;
        let history = train(&mut model, &train_set, &cfg.scaled_training())?;
        let model_path = cfg.out_dir.join("model.bin");
        let history_path = cfg.out_dir.join("history.csv");
        model.save(&model_path)?;
        std::fs::write(&history_path, history_to_csv(&history))?;
        Ok(TrainOutput {
            model_path,
            history_path,
            history,
            algorithm: format!("RNN {} layer", topology.num_recurrent_layers),
        })
    };
    run().map_err(|e| e.in_stage("train"))
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// A persisted classifier of either kind, told apart by the format tag.
pub enum AnyModel {
    Network(Box<Model>),
    Svm(SvmModel),
}

impl AnyModel {
    pub fn load(path: &Path) -> Result<AnyModel> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        match bytes.get(..4) {
            Some(b"RNM1") => Ok(AnyModel::Network(Box::new(Model::from_bytes(&bytes)?))),
            Some(b"SVM1") => Ok(AnyModel::Svm(SvmModel::from_bytes(&bytes)?)),
            _ => Err(Error::Parse(format!("{}: unrecognized model format", path.display()))),
        }
    }

    pub fn predict(&self, x: &crate::tensor::Matrix) -> Result<Vec<usize>> {
        match self {
            AnyModel::Network(m) => Ok(m.predict(x)?.0),
            AnyModel::Svm(m) => m.predict(x),
        }
    }

    pub fn algorithm_label(&self) -> String {
        match self {
            AnyModel::Network(m) => format!("RNN {} layer", m.depth()),
            AnyModel::Svm(_) => "SVM".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvaluateOutput {
    pub report: MetricsReport,
    pub algorithm: String,
    pub csv_path: Option<PathBuf>,
    pub text_path: Option<PathBuf>,
}

/// Evaluate a saved model on the test split and write a one-row report.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluateOutput> {
    let run = || -> Result<EvaluateOutput> {
        cfg.validate()?;
        ensure_out_dir(&cfg.out_dir)?;
        let model_path = cfg
            .model
            .as_ref()
            .ok_or_else(|| Error::Config("evaluate needs a model path".into()))?;
        let model = AnyModel::load(model_path)?;
        let (_, test_set) = cfg.materialize()?;
        let predicted = model.predict(&test_set.x)?;
        let cm = confusion(&predicted, &test_set.y, test_set.schema.n_classes)?;
        let report = metrics(&cm)?;
        let algorithm = model.algorithm_label();
        let task_name = test_set.schema.task.display_name();

        let mut csv_path = None;
        let mut text_path = None;
        if cfg.format.csv() {
            let path = cfg.out_dir.join("evaluation.csv");
            let mut csv = String::from(BENCHMARK_HEADER);
            csv.push('\n');
            csv.push_str(&report.csv_row(&algorithm, task_name));
            csv.push('\n');
            std::fs::write(&path, csv)?;
            csv_path = Some(path);
        }
        if cfg.format.text() {
            let path = cfg.out_dir.join("evaluation.txt");
            let row = BenchmarkRow::from_report(&algorithm, task_name, &report);
            std::fs::write(&path, render_benchmark_text(std::slice::from_ref(&row)))?;
            text_path = Some(path);
        }
        Ok(EvaluateOutput { report, algorithm, csv_path, text_path })
    };
    run().map_err(|e| e.in_stage("evaluate"))
}

// ---------------------------------------------------------------------------
// crossval
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CrossvalOutput {
    pub mean_accuracy: f64,
    pub reports: Vec<MetricsReport>,
    pub csv_path: PathBuf,
}

/// K-fold cross-validation on the training split; writes per-fold rows and
/// a mean summary row.
pub fn cmd_crossval(cfg: &RunConfig) -> Result<CrossvalOutput> {
    let run = || -> Result<CrossvalOutput> {
        cfg.validate()?;
        ensure_out_dir(&cfg.out_dir)?;
        let (train_set, _) = cfg.materialize()?;
        let topology = cfg.resolved_topology();
        let (mean_accuracy, reports) = cross_validate(
            &topology,
            &train_set,
            &cfg.scaled_training(),
            cfg.cv_folds,
            cfg.jobs,
        )?;
        let mut csv = String::from("fold,accuracy,precision,recall,f_score\n");
        for (i, r) in reports.iter().enumerate() {
            let _ = writeln!(csv, "{i},{},{},{},{}", r.accuracy, r.precision, r.recall, r.f_score);
        }
        let _ = writeln!(csv, "mean,{mean_accuracy},,,");
        let csv_path = cfg.out_dir.join("crossval.csv");
        std::fs::write(&csv_path, csv)?;
        Ok(CrossvalOutput { mean_accuracy, reports, csv_path })
    };
    run().map_err(|e| e.in_stage("crossval"))
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SearchOutput {
    pub result: SearchResult,
    pub csv_path: Option<PathBuf>,
    pub text_path: Option<PathBuf>,
}

/// Run one hyper-search stage on the training split and write its summary.
pub fn cmd_search(cfg: &RunConfig, stage: SearchStage) -> Result<SearchOutput> {
    let run = || -> Result<SearchOutput> {
        cfg.validate()?;
        ensure_out_dir(&cfg.out_dir)?;
        let (train_set, _) = cfg.materialize()?;
        let topology = cfg.resolved_topology();
        let space = cfg.scaled_search();
        let result = match stage {
            SearchStage::Units => {
                search_units(&space, &train_set, &topology, &cfg.training, cfg.jobs)?
            }
            SearchStage::Lr => search_lr(&space, &train_set, &topology, &cfg.training, cfg.jobs)?,
            SearchStage::Depth => {
                search_depth(&space, &train_set, &topology, &cfg.training, cfg.jobs)?
            }
        };
        let mut csv_path = None;
        let mut text_path = None;
        if cfg.format.csv() {
            let path = cfg.out_dir.join(format!("search_{}.csv", stage.name()));
            std::fs::write(&path, result.to_csv())?;
            csv_path = Some(path);
        }
        if cfg.format.text() {
            let path = cfg.out_dir.join(format!("search_{}.txt", stage.name()));
            std::fs::write(&path, result.to_table())?;
            text_path = Some(path);
        }
        Ok(SearchOutput { result, csv_path, text_path })
    };
    run().map_err(|e| e.in_stage("search"))
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

pub const BENCHMARK_HEADER: &str = "Algorithm,Task Name,Accuracy,Precision,Recall,F-score";

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub algorithm: String,
    pub task_name: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl BenchmarkRow {
    pub fn from_report(algorithm: &str, task_name: &str, r: &MetricsReport) -> BenchmarkRow {
        BenchmarkRow {
            algorithm: algorithm.to_string(),
            task_name: task_name.to_string(),
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f_score: r.f_score,
        }
    }
}

/// Algorithm-by-task benchmark results.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(BENCHMARK_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.algorithm, r.task_name, r.accuracy, r.precision, r.recall, r.f_score
            );
        }
        out
    }

    /// Lossless inverse of [`BenchmarkReport::to_csv`].
    pub fn from_csv(text: &str) -> Result<BenchmarkReport> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == BENCHMARK_HEADER => {}
            other => {
                return Err(Error::Parse(format!(
                    "benchmark header mismatch: {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Parse(format!(
                    "benchmark row {} has {} fields",
                    i + 1,
                    fields.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse(format!("bad number {s:?} in row {}", i + 1)))
            };
            rows.push(BenchmarkRow {
                algorithm: fields[0].to_string(),
                task_name: fields[1].to_string(),
                accuracy: num(fields[2])?,
                precision: num(fields[3])?,
                recall: num(fields[4])?,
                f_score: num(fields[5])?,
            });
        }
        Ok(BenchmarkReport { rows })
    }

    pub fn to_text(&self) -> String {
        render_benchmark_text(&self.rows)
    }
}

fn render_benchmark_text(rows: &[BenchmarkRow]) -> String {
    let headers = ["Algorithm", "Task Name", "Accuracy", "Precision", "Recall", "F-score"];
    let mut cells: Vec<[String; 6]> = Vec::with_capacity(rows.len());
    for r in rows {
        cells.push([
            r.algorithm.clone(),
            r.task_name.clone(),
            format!("{:.3}", r.accuracy),
            format!("{:.3}", r.precision),
            format!("{:.3}", r.recall),
            format!("{:.3}", r.f_score),
        ]);
    }
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let render = |out: &mut String, fields: &[String]| {
        let mut line = String::new();
        for (i, (f, w)) in fields.iter().zip(&widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(f);
            for _ in f.len()..*w {
                line.push(' ');
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    };
    render(&mut out, &headers.map(String::from));
    for row in &cells {
        render(&mut out, row);
    }
    out
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub report: BenchmarkReport,
    pub csv_path: Option<PathBuf>,
    pub text_path: Option<PathBuf>,
}

/// Train both models on the train split, evaluate on the test split, and
/// emit the benchmark table (SVM row first, then the network).
pub fn cmd_benchmark(cfg: &RunConfig) -> Result<BenchmarkOutput> {
    let run = || -> Result<BenchmarkOutput> {
        cfg.validate()?;
        ensure_out_dir(&cfg.out_dir)?;
        let (train_set, test_set) = cfg.materialize().map_err(|e| e.in_stage("load-data"))?;
        let task_name = test_set.schema.task.display_name();

        let svm_model = svm_train(&train_set, &cfg.scaled_svm(), cfg.jobs)
            .map_err(|e| e.in_stage("train-svm"))?;
        let svm_pred = svm_model.predict(&test_set.x).map_err(|e| e.in_stage("eval-svm"))?;
        let svm_metrics =
            metrics(&confusion(&svm_pred, &test_set.y, test_set.schema.n_classes)?)
                .map_err(|e| e.in_stage("eval-svm"))?;

        let topology = cfg.resolved_topology();
        let mut model = build_model(
            &topology,
            train_set.schema.n_features,
            train_set.schema.n_classes,
            cfg.training.seed,
        )
        .map_err(|e| e.in_stage("train-rnn"))?;
        train(&mut model, &train_set, &cfg.scaled_training())
            .map_err(|e| e.in_stage("train-rnn"))?;
        let (rnn_pred, _) = model.predict(&test_set.x).map_err(|e| e.in_stage("eval-rnn"))?;
        let rnn_metrics =
            metrics(&confusion(&rnn_pred, &test_set.y, test_set.schema.n_classes)?)
                .map_err(|e| e.in_stage("eval-rnn"))?;

        let report = BenchmarkReport {
            rows: vec![
                BenchmarkRow::from_report("SVM", task_name, &svm_metrics),
                BenchmarkRow::from_report(
                    &format!("RNN {} layer", topology.num_recurrent_layers),
                    task_name,
                    &rnn_metrics,
                ),
            ],
        };
        let mut csv_path = None;
        let mut text_path = None;
        if cfg.format.csv() {
            let path = cfg.out_dir.join("benchmark.csv");
            std::fs::write(&path, report.to_csv())?;
            csv_path = Some(path);
        }
        if cfg.format.text() {
            let path = cfg.out_dir.join("benchmark.txt");
            std::fs::write(&path, report.to_text())?;
            text_path = Some(path);
        }
        Ok(BenchmarkOutput { report, csv_path, text_path })
    };
    run().map_err(|e| e.in_stage("benchmark"))
}
