use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use recnet::pipeline::{
    cmd_benchmark, cmd_crossval, cmd_evaluate, cmd_generate, cmd_search, cmd_train, Overrides,
    ReportFormat, RunConfig,
};
use recnet::search::SearchStage;

/// Train and benchmark recurrent-network classifiers on tabular tasks.
#[derive(Parser)]
#[command(name = "recnet", version, about)]
struct Cli {
    /// JSON run config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (seeds generators, splits, and training).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Shrink sample counts and epoch budgets by this factor.
    #[arg(long, global = true)]
    scale: Option<f64>,

    /// Worker threads for folds, search cells, and one-vs-rest machines.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Report formats to write.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Text,
    Both,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> ReportFormat {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Text => ReportFormat::Text,
            FormatArg::Both => ReportFormat::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Units,
    Lr,
    Depth,
}

impl From<StageArg> for SearchStage {
    fn from(s: StageArg) -> SearchStage {
        match s {
            StageArg::Units => SearchStage::Units,
            StageArg::Lr => SearchStage::Lr,
            StageArg::Depth => SearchStage::Depth,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset and write train/test CSVs plus a
    /// digest manifest.
    Generate,
    /// Train the configured network; writes the model file and an epoch
    /// history CSV.
    Train,
    /// Evaluate a saved model on the test split.
    Evaluate {
        /// Model file written by `train` (or an SVM model file).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// K-fold cross-validation of the configured topology.
    Crossval,
    /// Run one hyperparameter-search stage.
    Search {
        #[arg(long, value_enum)]
        stage: StageArg,
    },
    /// Train the network and the SVM baseline, evaluate both, and emit the
    /// comparison table.
    Benchmark,
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).context("loading run config")?,
        None => RunConfig::default(),
    };
    let model = match &cli.command {
        Command::Evaluate { model } => model.clone(),
        _ => None,
    };
    cfg.apply_overrides(&Overrides {
        seed: cli.seed,
        scale: cli.scale,
        jobs: cli.jobs,
        out_dir: cli.out.clone(),
        format: cli.format.map(ReportFormat::from),
        model,
    });
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Generate => {
            let out = cmd_generate(&cfg)?;
            println!(
                "wrote {} ({} rows, sha256 {})",
                out.train_path.display(),
                out.manifest.train_rows,
                out.manifest.train_sha256
            );
            println!(
                "wrote {} ({} rows, sha256 {})",
                out.test_path.display(),
                out.manifest.test_rows,
                out.manifest.test_sha256
            );
            println!("wrote {}", out.manifest_path.display());
        }
        Command::Train => {
            let out = cmd_train(&cfg)?;
            if let Some(last) = out.history.epochs.last() {
                println!(
                    "{}: {} epochs, final loss {:.6}, train accuracy {:.4} ({:.1}s total)",
                    out.algorithm,
                    out.history.epochs.len(),
                    last.mean_loss,
                    last.accuracy,
                    out.history.epochs.iter().map(|e| e.seconds).sum::<f64>()
                );
            }
            println!("wrote {}", out.model_path.display());
            println!("wrote {}", out.history_path.display());
        }
        Command::Evaluate { .. } => {
            let out = cmd_evaluate(&cfg)?;
            println!(
                "{}: accuracy {:.4} precision {:.4} recall {:.4} f-score {:.4}",
                out.algorithm,
                out.report.accuracy,
                out.report.precision,
                out.report.recall,
                out.report.f_score
            );
            for path in [out.csv_path, out.text_path].into_iter().flatten() {
                println!("wrote {}", path.display());
            }
        }
        Command::Crossval => {
            let out = cmd_crossval(&cfg)?;
            for (i, r) in out.reports.iter().enumerate() {
                println!("fold {i}: accuracy {:.4}", r.accuracy);
            }
            println!("mean accuracy: {:.4}", out.mean_accuracy);
            println!("wrote {}", out.csv_path.display());
        }
        Command::Search { stage } => {
            let out = cmd_search(&cfg, SearchStage::from(*stage))?;
            print!("{}", out.result.to_table());
            for path in [out.csv_path, out.text_path].into_iter().flatten() {
                println!("wrote {}", path.display());
            }
        }
        Command::Benchmark => {
            let out = cmd_benchmark(&cfg)?;
            print!("{}", out.report.to_text());
            for path in [out.csv_path, out.text_path].into_iter().flatten() {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
