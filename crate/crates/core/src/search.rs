//! The staged hyperparameter-search protocol: unit search, learning-rate
//! search, and depth search, each over repeated trials scored by k-fold
//! cross-validation accuracy, with deterministic per-cell seeds and
//! tabular summaries.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TaskId};
use crate::error::{Error, Result};
use crate::metrics::cross_validate;
use crate::model::{count_parameters, TopologyConfig, TrainConfig};
use crate::par::parallel_map;
use crate::tensor::Rng;

/// Which knob a search stage varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStage {
    Units,
    Lr,
    Depth,
}

impl SearchStage {
    pub fn name(&self) -> &'static str {
        match self {
            SearchStage::Units => "units",
            SearchStage::Lr => "lr",
            SearchStage::Depth => "depth",
        }
    }

    fn id(&self) -> u64 {
        match self {
            SearchStage::Units => 1,
            SearchStage::Lr => 2,
            SearchStage::Depth => 3,
        }
    }
}

/// The grid and budgets of the three-stage protocol. The unit stage runs a
/// single hidden layer at a 400-epoch budget; the learning-rate and depth
/// stages run 700 epochs. Budgets scale down for desk-size runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub units: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub depths: Vec<usize>,
    pub trials: usize,
    pub units_epochs: usize,
    pub lr_epochs: usize,
    pub depth_epochs: usize,
    pub cv_folds: usize,
}

impl Default for SearchSpace {
    fn default() -> SearchSpace {
        SearchSpace {
            units: vec![64, 128, 256, 512, 768],
            learning_rates: vec![0.01, 0.035, 0.045, 0.05, 0.1, 0.25, 0.5],
            depths: vec![1, 2, 3, 4, 5, 6],
            trials: 3,
            units_epochs: 400,
            lr_epochs: 700,
            depth_epochs: 700,
            cv_folds: 10,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trial count must be at least 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cross-validation needs at least 2 folds".into()));
        }
        if let Some(&bad) =
            self.learning_rates.iter().find(|lr| !(0.01..=0.5).contains(*lr))
        {
            return Err(Error::Config(format!(
                "learning rate {bad} outside the protocol range [0.01, 0.5]"
            )));
        }
        if let Some(&bad) = self.depths.iter().find(|&&d| d == 0 || d > 6) {
            return Err(Error::Config(format!("depth {bad} outside 1..6")));
        }
        Ok(())
    }
}

/// One search candidate: its numeric value, display label, and parameter
/// count (used for fewer-parameters tie-breaking).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub value: f64,
    pub label: String,
    pub param_count: usize,
}

/// One (candidate, trial) measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    pub candidate_index: usize,
    pub trial: usize,
    pub cv_accuracy: f64,
}

/// All measurements of one stage plus the selected candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub stage: SearchStage,
    pub task: TaskId,
    pub candidates: Vec<Candidate>,
    pub rows: Vec<SearchRow>,
    pub selected_index: usize,
}

impl SearchResult {
    /// Mean cross-validation accuracy over the trials of one candidate.
    pub fn mean_accuracy(&self, candidate_index: usize) -> f64 {
        let (sum, n) = self
            .rows
            .iter()
            .filter(|r| r.candidate_index == candidate_index)
            .fold((0.0, 0usize), |(s, n), r| (s + r.cv_accuracy, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn selected(&self) -> &Candidate {
        &self.candidates[self.selected_index]
    }

    /// CSV rows in (candidate, trial) order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,candidate,trial,cv_accuracy\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.stage.name(),
                self.candidates[row.candidate_index].label,
                row.trial,
                row.cv_accuracy
            ));
        }
        out
    }

    /// Three-column text table (topology/candidate, task, accuracy), one row
    /// per candidate with its mean-over-trials accuracy, plus the selection.
    pub fn to_table(&self) -> String {
        let mut out = String::from("RNN network topology | Task Name | Accuracy\n");
        for (i, cand) in self.candidates.iter().enumerate() {
            out.push_str(&format!(
                "{} | {} | {:.3}\n",
                cand.label,
                self.task.short_name(),
                self.mean_accuracy(i)
            ));
        }
        out.push_str(&format!("Selected: {}\n", self.selected().label));
        out
    }
}

/// Deterministic seed for one (stage, candidate, trial) cell.
pub fn trial_seed(base: u64, stage: SearchStage, candidate_index: usize, trial: usize) -> u64 {
    let mix = base ^ (stage.id() << 48) ^ ((candidate_index as u64) << 24) ^ trial as u64;
    Rng::new(mix).next_u64()
}

/// Argmax of mean cross-validation accuracy; ties break toward fewer
/// parameters, then toward the earlier list position. Permutation of the
/// rows does not change the outcome.
pub fn select_best(
    candidates: &[Candidate],
    rows: &[SearchRow],
) -> Result<usize> {
    if rows.is_empty() || candidates.is_empty() {
        return Err(Error::InvalidArgument("empty search result".into()));
    }
    let mean = |i: usize| {
        let (sum, n) = rows
            .iter()
            .filter(|r| r.candidate_index == i)
            .fold((0.0, 0usize), |(s, n), r| (s + r.cv_accuracy, n + 1));
        if n == 0 {
            f64::NEG_INFINITY
        } else {
            sum / n as f64
        }
    };
    let mut best = 0usize;
    let mut best_mean = mean(0);
    for i in 1..candidates.len() {
        let m = mean(i);
        let better = m > best_mean
            || (m == best_mean && candidates[i].param_count < candidates[best].param_count);
        if better {
            best = i;
            best_mean = m;
        }
    }
    Ok(best)
}

/// How a stage treats a training abort in one cell.
#[derive(Clone, Copy, PartialEq)]
enum AbortPolicy {
    /// Fail the whole sweep, tagged with the cell.
    Propagate,
    /// Record the cell as accuracy 0 and keep sweeping.
    ScoreZero,
}

fn run_stage(
    stage: SearchStage,
    task: TaskId,
    candidates: Vec<Candidate>,
    trials: usize,
    jobs: usize,
    policy: AbortPolicy,
    cell: impl Fn(usize, usize) -> Result<f64> + Sync,
) -> Result<SearchResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidates to search".into()));
    }
    let cells: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();
    let outcomes = parallel_map(jobs, cells, |_, (c, t)| {
        match cell(c, t) {
            Ok(acc) => Ok(SearchRow { candidate_index: c, trial: t, cv_accuracy: acc }),
            Err(Error::Training(_)) if policy == AbortPolicy::ScoreZero => {
                Ok(SearchRow { candidate_index: c, trial: t, cv_accuracy: 0.0 })
            }
            Err(e) => Err(e.in_stage(&format!(
                "{} stage, candidate {}, trial {t}",
                stage.name(),
                candidates[c].label
            ))),
        }
    });
    let mut rows = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        rows.push(o?);
    }
    let selected_index = select_best(&candidates, &rows)?;
    Ok(SearchResult { stage, task, candidates, rows, selected_index })
}

fn cv_accuracy_cell(
    topology: &TopologyConfig,
    dataset: &Dataset,
    base_cfg: &TrainConfig,
    epochs: usize,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let cfg = TrainConfig { epochs, seed, ..*base_cfg };
    let (mean, _) = cross_validate(topology, dataset, &cfg, folds, 1)?;
    Ok(mean)
}

/// Unit search: single-hidden-layer topologies over the unit grid at the
/// 400-epoch budget. Training aborts fail the sweep, tagged with the cell.
pub fn search_units(
    space: &SearchSpace,
    dataset: &Dataset,
    base_topology: &TopologyConfig,
    base_cfg: &TrainConfig,
    jobs: usize,
) -> Result<SearchResult> {
    space.validate()?;
    if space.units.is_empty() {
        return Err(Error::InvalidArgument("unit list is empty".into()));
    }
    let candidates: Vec<Candidate> = space
        .units
        .iter()
        .map(|&u| {
            let topo =
                TopologyConfig { num_recurrent_layers: 1, hidden_units: u, ..*base_topology };
            Ok(Candidate {
                value: u as f64,
                label: format!("{u} units"),
                param_count: count_parameters(
                    &topo,
                    dataset.schema.n_features,
                    dataset.schema.n_classes,
                )?,
            })
        })
        .collect::<Result<_>>()?;
    let base_seed = base_cfg.seed;
    run_stage(
        SearchStage::Units,
        dataset.schema.task,
        candidates,
        space.trials,
        jobs,
        AbortPolicy::Propagate,
        |c, t| {
            let seed = trial_seed(base_seed, SearchStage::Units, c, t);
            let topo = TopologyConfig {
                num_recurrent_layers: 1,
                hidden_units: space.units[c],
                ..*base_topology
            };
            cv_accuracy_cell(&topo, dataset, base_cfg, space.units_epochs, space.cv_folds, seed)
        },
    )
}

/// Learning-rate search at the 700-epoch budget over a fixed topology.
/// Cells that diverge score 0 instead of aborting the sweep.
pub fn search_lr(
    space: &SearchSpace,
    dataset: &Dataset,
    topology: &TopologyConfig,
    base_cfg: &TrainConfig,
    jobs: usize,
) -> Result<SearchResult> {
    space.validate()?;
    if space.learning_rates.is_empty() {
        return Err(Error::InvalidArgument("learning-rate list is empty".into()));
    }
    let params =
        count_parameters(topology, dataset.schema.n_features, dataset.schema.n_classes)?;
    let candidates: Vec<Candidate> = space
        .learning_rates
        .iter()
        .map(|&lr| Candidate { value: lr, label: format!("lr {lr}"), param_count: params })
        .collect();
    let base_seed = base_cfg.seed;
    run_stage(
        SearchStage::Lr,
        dataset.schema.task,
        candidates,
        space.trials,
        jobs,
        AbortPolicy::ScoreZero,
        |c, t| {
            let seed = trial_seed(base_seed, SearchStage::Lr, c, t);
            let cfg = TrainConfig { learning_rate: space.learning_rates[c], ..*base_cfg };
            cv_accuracy_cell(topology, dataset, &cfg, space.lr_epochs, space.cv_folds, seed)
        },
    )
}

/// Depth search over 1..6 recurrent layers at the 700-epoch budget, emitting
/// topology-summary rows. Diverging cells score 0, as in the rate search.
pub fn search_depth(
    space: &SearchSpace,
    dataset: &Dataset,
    base_topology: &TopologyConfig,
    base_cfg: &TrainConfig,
    jobs: usize,
) -> Result<SearchResult> {
    space.validate()?;
    if space.depths.is_empty() {
        return Err(Error::InvalidArgument("depth list is empty".into()));
    }
    let candidates: Vec<Candidate> = space
        .depths
        .iter()
        .map(|&d| {
            let topo = TopologyConfig { num_recurrent_layers: d, ..*base_topology };
            Ok(Candidate {
                value: d as f64,
                label: format!("RNN {d} layer"),
                param_count: count_parameters(
                    &topo,
                    dataset.schema.n_features,
                    dataset.schema.n_classes,
                )?,
            })
        })
        .collect::<Result<_>>()?;
    let base_seed = base_cfg.seed;
    run_stage(
        SearchStage::Depth,
        dataset.schema.task,
        candidates,
        space.trials,
        jobs,
        AbortPolicy::ScoreZero,
        |c, t| {
            let seed = trial_seed(base_seed, SearchStage::Depth, c, t);
            let topo =
                TopologyConfig { num_recurrent_layers: space.depths[c], ..*base_topology };
            cv_accuracy_cell(&topo, dataset, base_cfg, space.depth_epochs, space.cv_folds, seed)
        },
    )
}
