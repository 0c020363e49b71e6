//! Dataset schemas for the three tasks, CSV ingestion, stratified 70/30
//! splitting, feature-to-sequence encoding, and the synthetic generators
//! that stand in for the unavailable source corpora.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Which benchmark task a dataset instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskId {
    Task1,
    Task2,
    Task3,
    Custom,
}

impl TaskId {
    /// Short label used in search summaries ("Task 1").
    pub fn short_name(&self) -> &'static str {
        match self {
            TaskId::Task1 => "Task 1",
            TaskId::Task2 => "Task 2",
            TaskId::Task3 => "Task 3",
            TaskId::Custom => "Custom",
        }
    }

    /// Full benchmark-report label.
    pub fn display_name(&self) -> &'static str {
        match self {
            TaskId::Task1 => "Android Malware Classification",
            TaskId::Task2 => "Incident Detection",
            TaskId::Task3 => "Fraud Detection",
            TaskId::Custom => "Custom Task",
        }
    }
}

/// Feature/class arity of a task plus its full corpus sizes, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub task: TaskId,
    pub n_features: usize,
    pub n_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_total: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_train: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_test: Option<usize>,
}

impl DatasetSchema {
    /// Android malware classification: 4896 binary API features, 2 classes.
    pub fn task1() -> DatasetSchema {
        DatasetSchema {
            task: TaskId::Task1,
            n_features: 4896,
            n_classes: 2,
            declared_total: Some(61_730),
            declared_train: Some(30_897),
            declared_test: Some(30_833),
        }
    }

    /// Incident detection: 9 features, 2 classes.
    pub fn task2() -> DatasetSchema {
        DatasetSchema {
            task: TaskId::Task2,
            n_features: 9,
            n_classes: 2,
            declared_total: Some(100_000),
            declared_train: Some(70_000),
            declared_test: Some(30_000),
        }
    }

    /// Fraud detection: 12 features, 3 classes.
    pub fn task3() -> DatasetSchema {
        DatasetSchema {
            task: TaskId::Task3,
            n_features: 12,
            n_classes: 3,
            declared_total: Some(100_000),
            declared_train: Some(70_000),
            declared_test: Some(30_000),
        }
    }

    pub fn custom(n_features: usize, n_classes: usize) -> DatasetSchema {
        DatasetSchema {
            task: TaskId::Custom,
            n_features,
            n_classes,
            declared_total: None,
            declared_train: None,
            declared_test: None,
        }
    }

    /// Same schema with the declared corpus sizes removed.
    pub fn without_declared_sizes(mut self) -> DatasetSchema {
        self.declared_total = None;
        self.declared_train = None;
        self.declared_test = None;
        self
    }
}

/// A feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub schema: DatasetSchema,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<usize>, schema: DatasetSchema) -> Result<Dataset> {
        if x.rows() != y.len() {
            return Err(Error::Shape(format!(
                "{} feature rows against {} labels",
                x.rows(),
                y.len()
            )));
        }
        if x.cols() != schema.n_features {
            return Err(Error::Shape(format!(
                "{} feature columns against schema arity {}",
                x.cols(),
                schema.n_features
            )));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= schema.n_classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {} classes",
                schema.n_classes
            )));
        }
        Ok(Dataset { x, y, schema })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Samples per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.schema.n_classes];
        for &l in &self.y {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset holding the given rows, in the given order. Declared
    /// corpus sizes no longer apply and are dropped.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty subset".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.x.cols());
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidArgument(format!(
                    "row {i} out of range for {} samples",
                    self.len()
                )));
            }
            data.extend_from_slice(self.x.row(i));
            y.push(self.y[i]);
        }
        let x = Matrix::from_vec(indices.len(), self.x.cols(), data)?;
        Dataset::new(x, y, self.schema.without_declared_sizes())
    }
}

// ---------------------------------------------------------------------------
// Sequence encoding
// ---------------------------------------------------------------------------

/// How a flat feature vector becomes a timestep sequence for the recurrent
/// stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceMode {
    /// `T = F` steps of one feature each, in column order.
    PerFeature,
    /// A single step carrying the whole feature vector.
    SingleStep,
}

impl SequenceMode {
    pub fn step_dim(&self, n_features: usize) -> usize {
        match self {
            SequenceMode::PerFeature => 1,
            SequenceMode::SingleStep => n_features,
        }
    }

    pub fn steps(&self, n_features: usize) -> usize {
        match self {
            SequenceMode::PerFeature => n_features,
            SequenceMode::SingleStep => 1,
        }
    }
}

/// Encode one feature row as a list of step vectors.
pub fn encode_sequence(x_row: &[f64], mode: SequenceMode) -> Vec<Vec<f64>> {
    match mode {
        SequenceMode::PerFeature => x_row.iter().map(|&v| vec![v]).collect(),
        SequenceMode::SingleStep => vec![x_row.to_vec()],
    }
}

/// Batched form of [`encode_sequence`]: a `B x F` matrix becomes `T` step
/// matrices of shape `B x step_dim`.
pub fn encode_batch(x: &Matrix, mode: SequenceMode) -> Vec<Matrix> {
    match mode {
        SequenceMode::PerFeature => (0..x.cols())
            .map(|j| {
                let col: Vec<f64> = (0..x.rows()).map(|i| x.get(i, j)).collect();
                Matrix::from_vec(x.rows(), 1, col).expect("column is finite")
            })
            .collect(),
        SequenceMode::SingleStep => vec![x.clone()],
    }
}

// ---------------------------------------------------------------------------
// HCRUD generator
// ---------------------------------------------------------------------------

/// One feature-threshold predicate of a labeling rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    /// Feature strictly greater than the threshold.
    Gt(usize, f64),
    /// Feature less than or equal to the threshold.
    Le(usize, f64),
}

impl Predicate {
    fn feature(&self) -> usize {
        match self {
            Predicate::Gt(f, _) | Predicate::Le(f, _) => *f,
        }
    }

    fn matches(&self, row: &[f64]) -> bool {
        match *self {
            Predicate::Gt(f, t) => row[f] > t,
            Predicate::Le(f, t) => row[f] <= t,
        }
    }
}

/// A labeling rule: a conjunction of predicates mapping to a class. A rule
/// with no predicates matches everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    #[serde(default)]
    pub when: Vec<Predicate>,
    pub class: usize,
}

impl Rule {
    fn matches(&self, row: &[f64]) -> bool {
        self.when.iter().all(|p| p.matches(row))
    }
}

/// Spec for the highly-correlated rule-based uniformly-distributed tabular
/// generator: uniform feature marginals, mixing-induced correlation inside a
/// designated group, labels from the first matching rule, optional label
/// noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcrudSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Mixing weight rho in [0,1): `x = (1-rho)*u + rho*mean(group u)`.
    pub correlation_strength: f64,
    pub rules: Vec<Rule>,
    /// Probability that a label is replaced by a uniformly random other class.
    #[serde(default)]
    pub label_noise: f64,
    pub seed: u64,
    /// Feature indices participating in the correlated group; `None` means
    /// every feature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlated_group: Option<Vec<usize>>,
}

impl HcrudSpec {
    /// Parse a spec from its JSON document form.
    pub fn from_json(text: &str) -> Result<HcrudSpec> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("hcrud spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_features == 0 {
            return Err(Error::Config("generator needs samples and features".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Config("generator needs at least two classes".into()));
        }
        if !(0.0..1.0).contains(&self.correlation_strength) {
            return Err(Error::Config(format!(
                "correlation strength must be in [0,1), got {}",
                self.correlation_strength
            )));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::Config(format!(
                "label noise must be in [0,0.5), got {}",
                self.label_noise
            )));
        }
        match self.rules.last() {
            None => return Err(Error::Config("rule list must not be empty".into())),
            Some(last) if !last.when.is_empty() => {
                return Err(Error::Config(
                    "final rule must be a catch-all (no predicates) so labels cover the space"
                        .into(),
                ))
            }
            _ => {}
        }
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.class >= self.n_classes {
                return Err(Error::Config(format!(
                    "rule {i} maps to class {} but there are {} classes",
                    rule.class, self.n_classes
                )));
            }
            for p in &rule.when {
                if p.feature() >= self.n_features {
                    return Err(Error::Config(format!(
                        "rule {i} tests feature {} but there are {} features",
                        p.feature(),
                        self.n_features
                    )));
                }
            }
        }
        if let Some(group) = &self.correlated_group {
            if group.is_empty() {
                return Err(Error::Config("correlated group must not be empty".into()));
            }
            if let Some(&bad) = group.iter().find(|&&f| f >= self.n_features) {
                return Err(Error::Config(format!(
                    "correlated group names feature {bad} of {}",
                    self.n_features
                )));
            }
        }
        Ok(())
    }
}

/// Class assigned by the first matching rule.
pub fn rule_label(rules: &[Rule], row: &[f64]) -> Option<usize> {
    rules.iter().find(|r| r.matches(row)).map(|r| r.class)
}

/// Generate an HCRUD dataset; a pure function of the spec (including seed).
pub fn hcrud_generate(spec: &HcrudSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let f = spec.n_features;
    let rho = spec.correlation_strength;
    let group: Vec<usize> =
        spec.correlated_group.clone().unwrap_or_else(|| (0..f).collect());
    let in_group = {
        let mut flags = vec![false; f];
        for &g in &group {
            flags[g] = true;
        }
        flags
    };

    let mut data = Vec::with_capacity(spec.n_samples * f);
    let mut labels = Vec::with_capacity(spec.n_samples);
    let mut row = vec![0.0; f];
    for _ in 0..spec.n_samples {
        for v in row.iter_mut() {
            *v = rng.next_f64();
        }
        if rho > 0.0 {
            let m = group.iter().map(|&g| row[g]).sum::<f64>() / group.len() as f64;
            for (j, v) in row.iter_mut().enumerate() {
                if in_group[j] {
                    *v = (1.0 - rho) * *v + rho * m;
                }
            }
        }
        let mut label = rule_label(&spec.rules, &row).expect("catch-all rule always matches");
        if spec.label_noise > 0.0 && rng.next_f64() < spec.label_noise {
            label = (label + 1 + rng.next_index(spec.n_classes - 1)) % spec.n_classes;
        }
        data.extend_from_slice(&row);
        labels.push(label);
    }

    let schema = DatasetSchema {
        task: match (f, spec.n_classes) {
            (9, 2) => TaskId::Task2,
            (12, 3) => TaskId::Task3,
            _ => TaskId::Custom,
        },
        n_features: f,
        n_classes: spec.n_classes,
        declared_total: Some(spec.n_samples),
        declared_train: None,
        declared_test: None,
    };
    Dataset::new(Matrix::from_vec(spec.n_samples, f, data)?, labels, schema)
}

/// Shipped fraud-detection rule set over the 12-feature schema. Features 9-11
/// play account-age, amount, and velocity roles; the late positions put the
/// decisive evidence near the end of the per-feature sequence.
pub fn default_fraud_rules() -> Vec<Rule> {
    vec![
        Rule { when: vec![Predicate::Gt(11, 0.60), Predicate::Gt(10, 0.50)], class: 2 },
        Rule { when: vec![Predicate::Gt(11, 0.55)], class: 1 },
        Rule { when: vec![Predicate::Le(9, 0.42)], class: 1 },
        Rule { when: vec![], class: 0 },
    ]
}

/// Shipped incident-detection rule set over the 9-feature schema.
pub fn default_incident_rules() -> Vec<Rule> {
    vec![
        Rule { when: vec![Predicate::Gt(8, 0.52), Predicate::Gt(7, 0.40)], class: 1 },
        Rule { when: vec![Predicate::Le(7, 0.30), Predicate::Le(8, 0.45)], class: 1 },
        Rule { when: vec![], class: 0 },
    ]
}

/// Default synthetic fraud task (12 features, 3 classes).
pub fn fraud_spec(n_samples: usize, seed: u64) -> HcrudSpec {
    HcrudSpec {
        n_samples,
        n_features: 12,
        n_classes: 3,
        correlation_strength: 0.6,
        rules: default_fraud_rules(),
        label_noise: 0.05,
        seed,
        correlated_group: None,
    }
}

/// Default synthetic incident-detection task (9 features, 2 classes).
pub fn incident_spec(n_samples: usize, seed: u64) -> HcrudSpec {
    HcrudSpec {
        n_samples,
        n_features: 9,
        n_classes: 2,
        correlation_strength: 0.3,
        rules: default_incident_rules(),
        label_noise: 0.01,
        seed,
        correlated_group: None,
    }
}

// ---------------------------------------------------------------------------
// Sparse binary API-feature generator
// ---------------------------------------------------------------------------

/// Spec for the sparse binary feature generator standing in for the API-call
/// corpus: Bernoulli(density) indicators with labels from a hidden sparse
/// linear rule thresholded at the empirical median score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApkSpec {
    pub n_samples: usize,
    #[serde(default = "ApkSpec::default_features")]
    pub n_features: usize,
    #[serde(default = "ApkSpec::default_density")]
    pub density: f64,
    pub seed: u64,
}

impl ApkSpec {
    fn default_features() -> usize {
        4896
    }

    fn default_density() -> f64 {
        0.02
    }
}

const APK_RULE_FEATURES: usize = 50;

/// Generate the sparse binary dataset. Labels come from a hidden linear rule
/// over a random 50-feature subset; ties at the median score are broken by an
/// infinitesimal per-sample jitter so the two classes stay balanced.
pub fn synth_apk_features(spec: &ApkSpec) -> Result<Dataset> {
    if spec.n_samples == 0 || spec.n_features == 0 {
        return Err(Error::Config("generator needs samples and features".into()));
    }
    if !(spec.density > 0.0 && spec.density < 1.0) {
        return Err(Error::Config(format!("density must be in (0,1), got {}", spec.density)));
    }
    let mut rng = Rng::new(spec.seed);
    let f = spec.n_features;
    let n = spec.n_samples;

    // hidden rule: subset then weights, pinned before any feature draw
    let n_rule = APK_RULE_FEATURES.min(f);
    let mut all: Vec<usize> = (0..f).collect();
    for i in 0..n_rule {
        let j = i + rng.next_index(f - i);
        all.swap(i, j);
    }
    let subset = all[..n_rule].to_vec();
    let weights = rng.uniform(n_rule, -1.0, 1.0)?;

    let mut data = vec![0.0; n * f];
    for v in data.iter_mut() {
        if rng.next_f64() < spec.density {
            *v = 1.0;
        }
    }

    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let row = &data[i * f..(i + 1) * f];
        let mut s = 0.0;
        for (&idx, &w) in subset.iter().zip(&weights) {
            s += w * row[idx];
        }
        s += rng.next_f64() * 1e-9;
        scores.push(s);
    }
    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    let median = (sorted[(n - 1) / 2] + sorted[n / 2]) / 2.0;
    let labels: Vec<usize> = scores.iter().map(|&s| usize::from(s > median)).collect();

    let schema = DatasetSchema {
        task: TaskId::Task1,
        n_features: f,
        n_classes: 2,
        declared_total: Some(n),
        declared_train: None,
        declared_test: None,
    };
    Dataset::new(Matrix::from_vec(n, f, data)?, labels, schema)
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Seeded train/test split. Stratified mode keeps every class's train
/// fraction within one sample of the target while the global train size is
/// exactly `round(fraction * N)`.
pub fn split(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0,1), got {train_fraction}"
        )));
    }
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty dataset".into()));
    }
    let n = ds.len();
    let target_train = (train_fraction * n as f64 + 0.5).floor() as usize;
    if target_train == 0 || target_train == n {
        return Err(Error::InvalidArgument(format!(
            "fraction {train_fraction} leaves an empty side of a {n}-sample split"
        )));
    }
    let mut rng = Rng::new(seed);

    let mut train_idx: Vec<usize>;
    let mut test_idx: Vec<usize>;
    if stratified {
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.schema.n_classes];
        for (i, &l) in ds.y.iter().enumerate() {
            per_class[l].push(i);
        }
        for (c, members) in per_class.iter().enumerate() {
            if !members.is_empty() && members.len() < 2 {
                return Err(Error::Data(format!(
                    "class {c} has only {} sample(s); stratified split needs at least 2",
                    members.len()
                )));
            }
        }
        // per-class quotas: floors, then distribute the remainder by largest
        // fractional part (ties toward the lower class index)
        let mut quotas: Vec<usize> = Vec::with_capacity(per_class.len());
        let mut fracs: Vec<(usize, f64)> = Vec::new();
        let mut assigned = 0usize;
        for (c, members) in per_class.iter().enumerate() {
            let exact = train_fraction * members.len() as f64;
            let q = exact.floor() as usize;
            quotas.push(q);
            assigned += q;
            fracs.push((c, exact - q as f64));
        }
        let mut remainder = target_train.saturating_sub(assigned);
        fracs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (c, _) in fracs {
            if remainder == 0 {
                break;
            }
            if quotas[c] < per_class[c].len() {
                quotas[c] += 1;
                remainder -= 1;
            }
        }

        train_idx = Vec::with_capacity(target_train);
        test_idx = Vec::with_capacity(n - target_train);
        for (members, q) in per_class.iter_mut().zip(&quotas) {
            rng.shuffle(members);
            train_idx.extend_from_slice(&members[..*q]);
            test_idx.extend_from_slice(&members[*q..]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut all);
        train_idx = all[..target_train].to_vec();
        test_idx = all[target_train..].to_vec();
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Data("split left one side empty".into()));
    }
    Ok((ds.subset(&train_idx)?, ds.subset(&test_idx)?))
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Render a dataset as CSV: one row per sample, features then the integer
/// label, shortest round-trip float rendering, LF line endings, no quoting.
pub fn dataset_to_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..ds.len() {
        for v in ds.x.row(i) {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", ds.y[i]);
    }
    out
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_csv(ds))?;
    Ok(())
}

/// Parse CSV rows of `n_features` floats plus a trailing integer label.
/// An optional header row is detected by a non-numeric first cell. When the
/// schema declares corpus sizes, the row count must match one of them.
pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text, schema).map_err(|e| e.in_stage(&path.display().to_string()))
}

pub fn parse_csv(text: &str, schema: &DatasetSchema) -> Result<Dataset> {
    let mut data: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let expected_cols = schema.n_features + 1;
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        // header detection: a non-numeric first cell on the first line
        if lineno == 0 && fields[0].trim().parse::<f64>().is_err() {
            continue;
        }
        if fields.len() != expected_cols {
            return Err(Error::Data(format!(
                "row {} has {} columns, expected {expected_cols}",
                lineno + 1,
                fields.len()
            )));
        }
        for (col, field) in fields[..schema.n_features].iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Data(format!("row {}, column {}: non-numeric cell {field:?}", lineno + 1, col + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {}, column {}: non-finite value",
                    lineno + 1,
                    col + 1
                )));
            }
            data.push(v);
        }
        let label_field = fields[expected_cols - 1].trim();
        let label: i64 = label_field.parse().map_err(|_| {
            Error::Data(format!("row {}: non-integer label {label_field:?}", lineno + 1))
        })?;
        if label < 0 || label as usize >= schema.n_classes {
            return Err(Error::Data(format!(
                "row {}: label {label} out of range for {} classes",
                lineno + 1,
                schema.n_classes
            )));
        }
        labels.push(label as usize);
    }
    if labels.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let declared = [schema.declared_total, schema.declared_train, schema.declared_test];
    if declared.iter().any(Option::is_some)
        && !declared.contains(&Some(labels.len()))
    {
        return Err(Error::Data(format!(
            "{} rows, but the schema declares total/train/test sizes {:?}/{:?}/{:?}",
            labels.len(),
            schema.declared_total,
            schema.declared_train,
            schema.declared_test
        )));
    }
    let x = Matrix::from_vec(labels.len(), schema.n_features, data)?;
    Dataset::new(x, labels, *schema)
}
