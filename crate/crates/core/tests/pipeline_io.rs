//! End-to-end command tests: file outputs, digests, round trips, and
//! determinism of the operator surface.

use std::path::{Path, PathBuf};

use recnet::data::{load_csv, DatasetSchema, HcrudSpec, Predicate, Rule};
use recnet::model::{TopologyConfig, TrainConfig};
use recnet::pipeline::{
    cmd_benchmark, cmd_crossval, cmd_evaluate, cmd_generate, cmd_search, cmd_train, sha256_hex,
    BenchmarkReport, DataSource, GenerateSpec, Manifest, Overrides, ReportFormat, RunConfig,
    TaskSelector,
};
use recnet::search::{SearchSpace, SearchStage};
use recnet::svm::SvmConfig;

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("recnet-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}

fn desk_config(tag: &str) -> RunConfig {
    RunConfig {
        task: TaskSelector::Task2,
        seed: 11,
        scale: 0.02, // 2,000 samples; 400-epoch budget becomes 8
        training: TrainConfig { epochs: 400, seed: 11, ..TrainConfig::default() },
        topology: Some(TopologyConfig {
            num_recurrent_layers: 2,
            hidden_units: 8,
            ..TopologyConfig::default()
        }),
        svm: SvmConfig { epochs: 10, seed: 11, ..SvmConfig::default() },
        cv_folds: 3,
        out_dir: temp_dir(tag),
        ..RunConfig::default()
    }
}

fn digest_of(path: &Path) -> String {
    sha256_hex(&std::fs::read(path).expect("file exists"))
}

#[test]
fn generate_writes_split_files_and_manifest() {
    let cfg = desk_config("generate");
    let out = cmd_generate(&cfg).unwrap();
    assert_eq!(out.manifest.train_rows, 1400);
    assert_eq!(out.manifest.test_rows, 600);
    assert_eq!(out.manifest.train_sha256, digest_of(&out.train_path));
    assert_eq!(out.manifest.test_sha256, digest_of(&out.test_path));

    let parsed = Manifest::from_json(&std::fs::read_to_string(&out.manifest_path).unwrap()).unwrap();
    assert_eq!(parsed, out.manifest);

    // the written CSVs load back against the task schema
    let schema = DatasetSchema::task2().without_declared_sizes();
    let train = load_csv(&out.train_path, &schema).unwrap();
    assert_eq!(train.len(), 1400);
    let test = load_csv(&out.test_path, &schema).unwrap();
    assert_eq!(test.len(), 600);
}

#[test]
fn generate_is_deterministic_across_reruns() {
    let cfg = desk_config("generate-rerun");
    let first = cmd_generate(&cfg).unwrap();
    let d1 = (digest_of(&first.train_path), digest_of(&first.test_path));
    let second = cmd_generate(&cfg).unwrap();
    let d2 = (digest_of(&second.train_path), digest_of(&second.test_path));
    assert_eq!(d1, d2);
}

#[test]
fn scale_produces_proportional_row_counts() {
    let mut cfg = desk_config("generate-scale");
    cfg.scale = 0.1;
    let out = cmd_generate(&cfg).unwrap();
    assert_eq!(out.manifest.train_rows, 7_000);
    assert_eq!(out.manifest.test_rows, 3_000);
}

#[test]
fn train_writes_model_and_history() {
    let cfg = desk_config("train");
    let out = cmd_train(&cfg).unwrap();
    assert_eq!(out.history.epochs.len(), 8, "400-epoch budget at scale 0.02");
    let history = std::fs::read_to_string(&out.history_path).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "epoch,mean_loss,accuracy");
    assert_eq!(lines.len(), 1 + out.history.epochs.len());

    // model round-trips with bit-identical predictions
    let model = recnet::model::Model::load(&out.model_path).unwrap();
    let bytes_again = model.to_bytes();
    assert_eq!(bytes_again, std::fs::read(&out.model_path).unwrap());
}

#[test]
fn train_single_epoch_writes_one_row() {
    let mut cfg = desk_config("train-1");
    cfg.training.epochs = 1;
    cfg.scale = 0.01; // epoch floor keeps a single epoch
    let out = cmd_train(&cfg).unwrap();
    assert_eq!(out.history.epochs.len(), 1);
    let history = std::fs::read_to_string(&out.history_path).unwrap();
    assert_eq!(history.lines().count(), 2);
}

#[test]
fn train_reruns_produce_identical_model_digests() {
    let cfg = desk_config("train-rerun");
    let a = cmd_train(&cfg).map(|o| digest_of(&o.model_path)).unwrap();
    let b = cmd_train(&cfg).map(|o| digest_of(&o.model_path)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn evaluate_reads_back_a_trained_model() {
    let mut cfg = desk_config("evaluate");
    let trained = cmd_train(&cfg).unwrap();
    cfg.apply_overrides(&Overrides {
        model: Some(trained.model_path.clone()),
        ..Overrides::default()
    });
    let out = cmd_evaluate(&cfg).unwrap();
    assert!(out.algorithm.starts_with("RNN 2 layer"), "{}", out.algorithm);
    assert!((0.0..=1.0).contains(&out.report.accuracy));
    let csv = std::fs::read_to_string(out.csv_path.unwrap()).unwrap();
    assert!(csv.starts_with("Algorithm,Task Name,Accuracy,Precision,Recall,F-score\n"));
    assert!(csv.contains("Incident Detection"));
}

#[test]
fn evaluate_accepts_svm_model_files() {
    let mut cfg = desk_config("evaluate-svm");
    let (train, _) = cfg.materialize().unwrap();
    let svm = recnet::svm::svm_train(&train, &cfg.svm, 1).unwrap();
    let path = cfg.out_dir.join("svm.bin");
    svm.save(&path).unwrap();
    cfg.model = Some(path);
    let out = cmd_evaluate(&cfg).unwrap();
    assert_eq!(out.algorithm, "SVM");
    assert!((0.0..=1.0).contains(&out.report.accuracy));
}

#[test]
fn evaluate_without_model_is_a_config_error() {
    let cfg = desk_config("evaluate-nomodel");
    let err = cmd_evaluate(&cfg).unwrap_err().to_string();
    assert!(err.contains("evaluate"), "{err}");
}

#[test]
fn crossval_writes_fold_rows_and_mean() {
    let cfg = desk_config("crossval");
    let out = cmd_crossval(&cfg).unwrap();
    assert_eq!(out.reports.len(), 3);
    let csv = std::fs::read_to_string(&out.csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 3 + 1, "header, folds, mean");
    let mean_line = lines.last().unwrap();
    assert!(mean_line.starts_with("mean,"));
    let mean: f64 = mean_line.split(',').nth(1).unwrap().parse().unwrap();
    let arithmetic =
        out.reports.iter().map(|r| r.accuracy).sum::<f64>() / out.reports.len() as f64;
    assert_eq!(mean.to_bits(), arithmetic.to_bits());
    assert!((0.0..=1.0).contains(&mean));
}

#[test]
fn search_depth_emits_topology_rows_and_is_deterministic() {
    let mut cfg = desk_config("search");
    cfg.search = SearchSpace {
        units: vec![8],
        learning_rates: vec![0.05],
        depths: vec![1, 2],
        trials: 2,
        units_epochs: 2,
        lr_epochs: 2,
        depth_epochs: 2,
        cv_folds: 2,
    };
    cfg.scale = 0.01;
    let out = cmd_search(&cfg, SearchStage::Depth).unwrap();
    let text = std::fs::read_to_string(out.text_path.as_ref().unwrap()).unwrap();
    for depth in [1, 2] {
        assert!(
            text.lines().any(|l| l.starts_with(&format!("RNN {depth} layer | Task 2 | 0."))),
            "missing depth-{depth} row in:\n{text}"
        );
    }
    let csv_digest = digest_of(out.csv_path.as_ref().unwrap());

    // rerun with more jobs: byte-identical artifacts
    cfg.jobs = 4;
    let out2 = cmd_search(&cfg, SearchStage::Depth).unwrap();
    assert_eq!(digest_of(out2.csv_path.as_ref().unwrap()), csv_digest);
    assert_eq!(std::fs::read_to_string(out2.text_path.as_ref().unwrap()).unwrap(), text);
}

#[test]
fn search_single_candidate_selects_it() {
    let mut cfg = desk_config("search-single");
    cfg.search = SearchSpace {
        units: vec![8],
        learning_rates: vec![0.05],
        depths: vec![2],
        trials: 1,
        units_epochs: 1,
        lr_epochs: 1,
        depth_epochs: 1,
        cv_folds: 2,
    };
    cfg.scale = 0.01;
    let out = cmd_search(&cfg, SearchStage::Units).unwrap();
    assert_eq!(out.result.selected().value, 8.0);
}

#[test]
fn benchmark_emits_table_shape_and_is_deterministic_across_jobs() {
    let cfg = desk_config("benchmark");
    let out = cmd_benchmark(&cfg).unwrap();
    assert_eq!(out.report.rows.len(), 2);
    assert_eq!(out.report.rows[0].algorithm, "SVM");
    assert_eq!(out.report.rows[1].algorithm, "RNN 2 layer");
    assert!(out.report.rows.iter().all(|r| r.task_name == "Incident Detection"));

    let csv = std::fs::read_to_string(out.csv_path.as_ref().unwrap()).unwrap();
    assert!(csv.starts_with("Algorithm,Task Name,Accuracy,Precision,Recall,F-score\n"));
    let parsed = BenchmarkReport::from_csv(&csv).unwrap();
    assert_eq!(parsed, out.report, "csv round-trips losslessly");

    let digest = digest_of(out.csv_path.as_ref().unwrap());
    let mut cfg4 = cfg.clone();
    cfg4.jobs = 4;
    let out4 = cmd_benchmark(&cfg4).unwrap();
    assert_eq!(digest_of(out4.csv_path.as_ref().unwrap()), digest);
}

#[test]
fn benchmark_perfect_separation_scores_ones() {
    // a 1-feature dataset both models fit perfectly
    let dir = temp_dir("benchmark-perfect");
    let mut rows = String::new();
    for i in 0..200 {
        let (v, label) = if i % 2 == 0 { (0.1 + (i as f64) * 1e-4, 0) } else { (0.9 - (i as f64) * 1e-4, 1) };
        rows.push_str(&format!("{v},{label}\n"));
    }
    let train_path = dir.join("train.csv");
    let test_path = dir.join("test.csv");
    std::fs::write(&train_path, &rows).unwrap();
    std::fs::write(&test_path, &rows).unwrap();

    let cfg = RunConfig {
        task: TaskSelector::Custom { n_features: 1, n_classes: 2 },
        dataset: Some(DataSource::Csv { train: train_path, test: test_path }),
        topology: Some(TopologyConfig {
            num_recurrent_layers: 1,
            hidden_units: 8,
            ..TopologyConfig::default()
        }),
        training: TrainConfig {
            learning_rate: 0.5,
            epochs: 60,
            batch_size: 32,
            seed: 5,
            shuffle: true,
        },
        svm: SvmConfig { epochs: 20, seed: 5, ..SvmConfig::default() },
        out_dir: dir,
        ..RunConfig::default()
    };
    let out = cmd_benchmark(&cfg).unwrap();
    for row in &out.report.rows {
        assert_eq!(row.accuracy, 1.0, "{} should be perfect", row.algorithm);
        assert_eq!(row.f_score, 1.0);
    }
}

#[test]
fn explicit_generator_specs_flow_through_generate() {
    let dir = temp_dir("custom-spec");
    let spec = HcrudSpec {
        n_samples: 500,
        n_features: 4,
        n_classes: 2,
        correlation_strength: 0.2,
        rules: vec![
            Rule { when: vec![Predicate::Gt(3, 0.5)], class: 1 },
            Rule { when: vec![], class: 0 },
        ],
        label_noise: 0.0,
        seed: 9,
        correlated_group: None,
    };
    let cfg = RunConfig {
        task: TaskSelector::Custom { n_features: 4, n_classes: 2 },
        dataset: Some(DataSource::Generate(GenerateSpec::Hcrud(spec))),
        out_dir: dir,
        ..RunConfig::default()
    };
    let out = cmd_generate(&cfg).unwrap();
    assert_eq!(out.manifest.train_rows + out.manifest.test_rows, 500);
}

#[test]
fn errors_name_the_failing_stage() {
    // missing csv file
    let cfg = RunConfig {
        task: TaskSelector::Task2,
        dataset: Some(DataSource::Csv {
            train: PathBuf::from("/nonexistent/train.csv"),
            test: PathBuf::from("/nonexistent/test.csv"),
        }),
        out_dir: temp_dir("stage-errors"),
        ..RunConfig::default()
    };
    let err = cmd_train(&cfg).unwrap_err().to_string();
    assert!(err.contains("train") && err.contains("nonexistent"), "{err}");

    let err = cmd_benchmark(&cfg).unwrap_err().to_string();
    assert!(err.contains("benchmark") && err.contains("load-data"), "{err}");
}

#[test]
fn format_flag_controls_outputs() {
    let mut cfg = desk_config("format-csv");
    cfg.scale = 0.01;
    cfg.training.epochs = 1;
    cfg.format = ReportFormat::Csv;
    let out = cmd_benchmark(&cfg).unwrap();
    assert!(out.csv_path.is_some());
    assert!(out.text_path.is_none());
}
