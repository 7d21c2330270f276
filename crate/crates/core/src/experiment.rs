//! Config-driven experiment matrices over seeds × sparsity levels.
//!
//! Each cell runs generate-or-load → inject sparsity → classify missingness →
//! select or apply an imputer → prequential runs with every configured
//! detector and the ensemble → metrics and risk. Cells are independent and
//! run in parallel; their outputs are written afterwards in cell order, so
//! the bytes on disk never depend on scheduling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detectors::{DetectorConfig, DetectorKind};
use crate::ensemble::{risk_report, RiskReport};
use crate::ensemble::{self, Ensemble, EnsembleConfig, Preset};
use crate::evaluation::{
    drift_region_labels, prequential_run, GaussianNb, Loss, MetricsReport, Monitor, RetrainPolicy, RunTrace,
    DEFAULT_ADI_FLOOR,
};
use crate::imputation::{
    default_method_for, identify_distribution, impute_with, select_best_imputer, ImputationMethod, SelectionOptions,
    SelectionReport,
};
use crate::io::{self, LabelColumn};
use crate::missingness::{classify_missingness, imputation_bias_report, ImputationBiasReport, MissingnessVerdict};
use crate::par::{self, Execution};
use crate::rng::derive_seed;
use crate::streamgen::{
    inject_sparsity, make_classification_stream, make_drift_stream, shuffle_instances, ClassificationSpec, DriftKind,
    DriftSpec, LabeledStream, Mechanism, SparsityPlan,
};
use crate::{stats, Error, Result};

pub const ENV_OUTPUT_DIR: &str = "SPARSE_DRIFT_OUT";
pub const ENV_JOBS: &str = "SPARSE_DRIFT_JOBS";

const STREAM_BASE: u64 = 1;
const STREAM_DRIFT: u64 = 2;
const STREAM_SPARSITY: u64 = 3;
const STREAM_SELECTION: u64 = 4;
const STREAM_ENSEMBLE: u64 = 5;
const STREAM_SHUFFLE: u64 = 6;
const STREAM_DETECTORS: u64 = 100;

/// Generated classification stream with optional label-flip drifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedDataset {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_features")]
    pub features: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_offset")]
    pub offset: f64,
    #[serde(default)]
    pub correlation: f64,
    /// Permute the base stream before drifts are injected.
    #[serde(default)]
    pub shuffle: bool,
    #[serde(default)]
    pub drift: DriftSpec,
}

fn default_instances() -> usize {
    ClassificationSpec::default().instances
}
fn default_features() -> usize {
    ClassificationSpec::default().features
}
fn default_separation() -> f64 {
    ClassificationSpec::default().separation
}
fn default_offset() -> f64 {
    ClassificationSpec::default().offset
}

impl Default for GeneratedDataset {
    fn default() -> Self {
        Self {
            instances: default_instances(),
            features: default_features(),
            separation: default_separation(),
            offset: default_offset(),
            correlation: 0.0,
            shuffle: false,
            drift: DriftSpec::none(),
        }
    }
}

impl GeneratedDataset {
    pub fn spec(&self) -> ClassificationSpec {
        ClassificationSpec {
            instances: self.instances,
            features: self.features,
            separation: self.separation,
            offset: self.offset,
            correlation: self.correlation,
        }
    }

    /// Base stream, optional shuffle, then drift injection.
    pub fn generate(&self, seed: u64) -> Result<LabeledStream> {
        let mut base = make_classification_stream(&self.spec(), derive_seed(seed, STREAM_BASE))?;
        if self.shuffle {
            base = shuffle_instances(&base, derive_seed(seed, STREAM_SHUFFLE));
        }
        if self.drift.is_empty() {
            return Ok(base);
        }
        make_drift_stream(&base, &self.drift, derive_seed(seed, STREAM_DRIFT))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetConfig {
    Generated(GeneratedDataset),
    Csv {
        path: PathBuf,
        /// Drift sidecar; without one the stream has no annotated drifts.
        #[serde(default)]
        sidecar: Option<PathBuf>,
        /// 0-based label column; the last column when absent.
        #[serde(default)]
        label_column: Option<usize>,
    },
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Generated(GeneratedDataset::default())
    }
}

impl DatasetConfig {
    pub fn load(&self, seed: u64) -> Result<LabeledStream> {
        match self {
            DatasetConfig::Generated(g) => g.generate(seed),
            DatasetConfig::Csv {
                path,
                sidecar,
                label_column,
            } => {
                let label = label_column.map_or(LabelColumn::Last, LabelColumn::Index);
                let data = io::ingest_csv(path, label)?;
                let drift = match sidecar {
                    Some(p) => io::read_json(p)?,
                    None => DriftSpec::none(),
                };
                data.into_stream(drift)
            }
        }
    }

    fn drift_kind(&self) -> Option<DriftKind> {
        match self {
            DatasetConfig::Generated(g) if !g.drift.is_empty() => Some(g.drift.kind),
            _ => None,
        }
    }
}

/// One sparsity level of the matrix. Its seed is derived per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparsityLevel {
    pub mechanism: Mechanism,
    pub rate: f64,
    pub targets: Vec<usize>,
    #[serde(default)]
    pub driver: Option<usize>,
}

impl SparsityLevel {
    pub fn plan(&self, seed: u64) -> SparsityPlan {
        SparsityPlan {
            mechanism: self.mechanism,
            rate: self.rate,
            targets: self.targets.clone(),
            driver: self.driver,
            seed,
        }
    }
}

/// `auto` (select by RMSE) or one fixed method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ImputerChoice {
    #[default]
    Auto,
    Fixed(ImputationMethod),
}

impl TryFrom<String> for ImputerChoice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            Ok(ImputerChoice::Auto)
        } else {
            s.parse().map(ImputerChoice::Fixed)
        }
    }
}

impl From<ImputerChoice> for String {
    fn from(c: ImputerChoice) -> String {
        match c {
            ImputerChoice::Auto => "auto".into(),
            ImputerChoice::Fixed(m) => m.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputationSettings {
    pub method: ImputerChoice,
    /// Candidates scored by `auto`.
    pub candidates: Vec<ImputationMethod>,
    /// Complete rows `auto` needs before it falls back to the family default.
    pub min_complete_rows: usize,
    /// Significance level of the missingness classification.
    pub alpha: f64,
    pub allow_mcar: bool,
}

impl Default for ImputationSettings {
    fn default() -> Self {
        Self {
            method: ImputerChoice::Auto,
            candidates: vec![
                ImputationMethod::Mean,
                ImputationMethod::Median,
                ImputationMethod::Mode,
                ImputationMethod::Zero,
                ImputationMethod::Knn { k: 5 },
            ],
            min_complete_rows: SelectionOptions::default().min_complete_rows,
            alpha: 0.05,
            allow_mcar: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSettings {
    pub disabled: bool,
    /// Member preset; inferred from the dataset's drift kind when absent.
    pub preset: Option<Preset>,
    /// Explicit members, overriding the preset.
    pub members: Option<Vec<DetectorKind>>,
    pub window: Option<usize>,
    pub threshold: f64,
}

impl EnsembleSettings {
    pub fn resolve(&self, dataset: &DatasetConfig) -> EnsembleConfig {
        let preset = self.preset.unwrap_or(match dataset.drift_kind() {
            Some(DriftKind::Gradual) => Preset::Gradual,
            _ => Preset::Abrupt,
        });
        EnsembleConfig {
            members: self.members.clone().unwrap_or_else(|| preset.members()),
            window: self.window.unwrap_or(ensemble::DEFAULT_WINDOW),
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub adi_floor: usize,
    pub loss: Loss,
    pub retrain: RetrainPolicy,
    /// Cost of a wrong ensemble decision.
    pub c1: f64,
    /// Cost of a rejection.
    pub c2: f64,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            adi_floor: DEFAULT_ADI_FLOOR,
            loss: Loss::ZeroOne,
            retrain: RetrainPolicy::Reset,
            c1: 1.0,
            c2: 0.5,
        }
    }
}

/// Experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub levels: Vec<SparsityLevel>,
    #[serde(default)]
    pub imputation: ImputationSettings,
    /// Base detectors evaluated on their own.
    #[serde(default = "all_detectors")]
    pub detectors: Vec<DetectorKind>,
    #[serde(default, rename = "detector")]
    pub detector_params: DetectorConfig,
    #[serde(default)]
    pub ensemble: EnsembleSettings,
    #[serde(default)]
    pub metrics: MetricSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    #[serde(default)]
    pub jobs: usize,
    /// Write per-run trace CSVs next to each report.
    #[serde(default = "yes")]
    pub write_traces: bool,
}

fn all_detectors() -> Vec<DetectorKind> {
    DetectorKind::ALL.to_vec()
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config; relative dataset paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DatasetConfig::Csv { path, sidecar, .. } = &mut config.dataset {
            if path.is_relative() {
                *path = base.join(&*path);
            }
            if let Some(s) = sidecar.as_mut().filter(|s| s.is_relative()) {
                *s = base.join(&*s);
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies [`ENV_OUTPUT_DIR`] and [`ENV_JOBS`].
    pub fn apply_env_overrides(&mut self) -> Result<()> {
        if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
        if let Ok(jobs) = std::env::var(ENV_JOBS) {
            self.jobs = jobs
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{ENV_JOBS} must be a non-negative integer, got '{jobs}'")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.levels.is_empty() {
            return Err(Error::Config("at least one sparsity level is required".into()));
        }
        for level in &self.levels {
            if !(0.0..=1.0).contains(&level.rate) {
                return Err(Error::Config(format!("sparsity rate {} is outside [0, 1]", level.rate)));
            }
            if level.targets.is_empty() {
                return Err(Error::Config("a sparsity level needs target features".into()));
            }
            if level.mechanism == Mechanism::Mar && level.driver.is_none() {
                return Err(Error::Config("MAR levels need a driver feature".into()));
            }
        }
        if let DatasetConfig::Csv { path, sidecar, .. } = &self.dataset {
            for p in std::iter::once(path).chain(sidecar) {
                if !p.exists() {
                    return Err(Error::Config(format!("{} does not exist", p.display())));
                }
            }
        }
        if let DatasetConfig::Generated(g) = &self.dataset {
            g.drift.validate(g.instances)?;
        }
        let imp = &self.imputation;
        if imp.method == ImputerChoice::Auto {
            if imp.candidates.is_empty() {
                return Err(Error::Config("auto imputation needs candidates".into()));
            }
            if imp.min_complete_rows == 0 {
                return Err(Error::Config("min_complete_rows must be >= 1".into()));
            }
        }
        if !(imp.alpha > 0.0 && imp.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {}", imp.alpha)));
        }
        self.detector_params.validate()?;
        if !self.ensemble.disabled {
            self.ensemble.resolve(&self.dataset).validate()?;
        }
        if self.detectors.is_empty() && self.ensemble.disabled {
            return Err(Error::Config("nothing to evaluate: no detectors and the ensemble is disabled".into()));
        }
        self.metrics.loss.validate()?;
        let m = &self.metrics;
        if !(m.c2 >= 0.0 && m.c1 >= m.c2 && m.c1.is_finite()) {
            return Err(Error::Config(format!("costs need c1 >= c2 >= 0, got c1={} c2={}", m.c1, m.c2)));
        }
        Ok(())
    }

    /// SHA-256 of the config with the output directory and job count blanked,
    /// so the same experiment hashes identically wherever it is written.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.jobs = 0;
        let digest = Sha256::digest(serde_json::to_vec(&canonical)?);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// How the imputer of a cell was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputerSource {
    Selected,
    Fixed,
    /// Family default after selection was impossible.
    Default,
    /// Nothing was missing.
    NotNeeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputerRecord {
    pub method: Option<ImputationMethod>,
    pub source: ImputerSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// kNN cells that had no donor and took the column mean.
    pub knn_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub metrics: MetricsReport,
}

/// Everything measured in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub seed: u64,
    pub level: usize,
    pub sparsity: SparsityLevel,
    pub instances: usize,
    pub missing_cells: usize,
    pub verdict: MissingnessVerdict,
    pub imputer: ImputerRecord,
    pub selection: Option<SelectionReport>,
    pub bias: ImputationBiasReport,
    pub runs: Vec<RunReport>,
    pub risk: Option<RiskReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_note: Option<String>,
}

impl CellReport {
    pub fn run(&self, name: &str) -> Option<&MetricsReport> {
        self.runs.iter().find(|r| r.name == name).map(|r| &r.metrics)
    }
}

/// A cell's report plus the traces written next to it.
#[derive(Debug, Clone)]
pub struct CellArtifacts {
    pub report: CellReport,
    pub traces: Vec<(String, RunTrace)>,
}

pub const ENSEMBLE_RUN: &str = "ensemble";

/// Which runs a cell performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunSelection {
    All,
    EnsembleOnly,
}

fn choose_imputer(
    config: &ExperimentConfig,
    sparse: &crate::SparseMatrix,
    verdict: &MissingnessVerdict,
    seed: u64,
) -> Result<(ImputerRecord, Option<SelectionReport>)> {
    let record = |method, source, note| ImputerRecord {
        method: Some(method),
        source,
        note,
        knn_fallbacks: 0,
    };
    let imp = &config.imputation;
    match imp.method {
        ImputerChoice::Fixed(m) => Ok((record(m, ImputerSource::Fixed, None), None)),
        ImputerChoice::Auto => {
            let options = SelectionOptions {
                min_complete_rows: imp.min_complete_rows,
                execution: Execution::Parallel,
            };
            match select_best_imputer(sparse, &imp.candidates, verdict, derive_seed(seed, STREAM_SELECTION), options) {
                Ok(report) => Ok((record(report.winner, ImputerSource::Selected, None), Some(report))),
                Err(Error::Selection(reason)) => {
                    let fv = verdict
                        .sparse_features()
                        .next()
                        .ok_or_else(|| Error::Selection("no sparse feature to base a default on".into()))?;
                    let fit = identify_distribution(&sparse.observed_column(fv.feature))?;
                    let mechanism = fv.mechanism.expect("sparse feature has a mechanism");
                    let method = default_method_for(fit.family, mechanism, fv.sparsity)?;
                    let note = format!(
                        "{reason}; default for feature {} ({}, {mechanism}, rate {})",
                        fv.feature, fit.family, fv.sparsity
                    );
                    Ok((record(method, ImputerSource::Default, Some(note)), None))
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Runs one (seed, level) cell in memory.
pub fn run_cell(config: &ExperimentConfig, seed: u64, level: usize, runs: RunSelection) -> Result<CellArtifacts> {
    let sparsity = config
        .levels
        .get(level)
        .ok_or_else(|| Error::Config(format!("no sparsity level {level}")))?
        .clone();
    let stream = config.dataset.load(seed)?;
    let sparse = inject_sparsity(&stream.features, &sparsity.plan(derive_seed(seed, STREAM_SPARSITY)))?;
    let imp = &config.imputation;
    let verdict = classify_missingness(&sparse, imp.alpha, imp.allow_mcar)?;
    let missing_cells = sparse.missing_count();

    let (mut imputer, selection, features) = if missing_cells == 0 {
        let rec = ImputerRecord {
            method: None,
            source: ImputerSource::NotNeeded,
            note: None,
            knn_fallbacks: 0,
        };
        (rec, None, sparse.clone())
    } else {
        let (rec, selection) = choose_imputer(config, &sparse, &verdict, seed)?;
        let imputed = impute_with(&sparse, rec.method.expect("chosen"), Execution::Parallel)?;
        let rec = ImputerRecord {
            knn_fallbacks: imputed.knn_fallbacks.len(),
            ..rec
        };
        (rec, selection, imputed.data)
    };
    let bias = imputation_bias_report(&sparse, &features)?;
    let imputed = LabeledStream::new(features, stream.labels.clone(), stream.drift.clone())?;

    let mut monitors: Vec<(String, Monitor)> = Vec::new();
    if runs == RunSelection::All {
        for (k, &kind) in config.detectors.iter().enumerate() {
            let d = config
                .detector_params
                .build(kind, derive_seed(seed, STREAM_DETECTORS + k as u64))?;
            monitors.push((kind.name().to_string(), Monitor::Detector(d)));
        }
    }
    let ensemble_config = config.ensemble.resolve(&config.dataset);
    if !config.ensemble.disabled {
        let e = Ensemble::new(&ensemble_config, &config.detector_params, derive_seed(seed, STREAM_ENSEMBLE))?;
        monitors.push((ENSEMBLE_RUN.to_string(), Monitor::Ensemble(e)));
    }

    let metrics = &config.metrics;
    let n_features = imputed.features.n_cols();
    let traces = monitors
        .into_iter()
        .map(|(name, mut monitor)| {
            let mut learner = GaussianNb::new(n_features);
            prequential_run(&imputed, &mut learner, &mut monitor, metrics.retrain, metrics.loss).map(|t| (name, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = traces
        .iter()
        .map(|(name, trace)| {
            MetricsReport::from_trace(trace, metrics.adi_floor).map(|m| RunReport {
                name: name.clone(),
                metrics: m,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (risk, risk_note) = match traces.iter().find(|(n, _)| n == ENSEMBLE_RUN) {
        None => (None, None),
        Some((_, trace)) => {
            let phi: Vec<f64> = trace.ensemble.iter().map(|o| o.phi).collect();
            let truth = drift_region_labels(trace.records.len(), &trace.drift, metrics.adi_floor);
            let histories: Vec<Vec<i8>> = (0..ensemble_config.members.len())
                .map(|k| trace.ensemble.iter().map(|o| o.votes[k]).collect())
                .collect();
            match risk_report(&phi, &truth, &histories, ensemble_config.threshold, metrics.c1, metrics.c2) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
    };
    if imputer.method.is_none() {
        imputer.note = Some("no missing cells".into());
    }

    Ok(CellArtifacts {
        report: CellReport {
            seed,
            level,
            sparsity,
            instances: imputed.len(),
            missing_cells,
            verdict,
            imputer,
            selection,
            bias,
            runs,
            risk,
            risk_note,
        },
        traces,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub seed: u64,
    pub level: usize,
    pub dir: String,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub levels: usize,
    pub cells: Vec<ManifestCell>,
    pub failed: usize,
}

/// Mean and sample standard deviation over the cells that define a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        Self {
            n: values.len(),
            mean: stats::mean(values),
            std: stats::sample_std(values),
        }
    }
}

/// Aggregates of one run over the seeds of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub level: usize,
    pub run: String,
    pub cells: usize,
    pub accuracy: Aggregate,
    pub add: Aggregate,
    pub tpr: Aggregate,
    pub tpd: Aggregate,
    pub tpd_error: Aggregate,
    pub drift_count: Aggregate,
    pub detections: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

/// Groups cell reports by (level, run) in level order, runs in report order.
pub fn summarize(reports: &[&CellReport]) -> Summary {
    let mut groups: BTreeMap<usize, Vec<(String, Vec<&MetricsReport>)>> = BTreeMap::new();
    for report in reports {
        let runs = groups.entry(report.level).or_default();
        for run in &report.runs {
            match runs.iter_mut().find(|(n, _)| *n == run.name) {
                Some((_, v)) => v.push(&run.metrics),
                None => runs.push((run.name.clone(), vec![&run.metrics])),
            }
        }
    }
    let rows = groups
        .into_iter()
        .flat_map(|(level, runs)| {
            runs.into_iter().map(move |(run, ms)| {
                let col = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> Aggregate {
                    Aggregate::of(&ms.iter().filter_map(|m| f(m)).collect::<Vec<_>>())
                };
                SummaryRow {
                    level,
                    cells: ms.len(),
                    accuracy: col(&|m| Some(m.accuracy)),
                    add: col(&|m| m.detection.add),
                    tpr: col(&|m| Some(m.detection.tpr)),
                    tpd: col(&|m| m.detection.tpd),
                    tpd_error: col(&|m| m.detection.tpd.map(|t| (t - 1.0).abs())),
                    drift_count: col(&|m| Some(m.detection.drift_count as f64)),
                    detections: col(&|m| Some(m.detections.len() as f64)),
                    run,
                }
            })
        })
        .collect();
    Summary { rows }
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub reports: Vec<CellReport>,
    pub manifest: Manifest,
    pub summary: Summary,
}

fn cell_dir(seed: u64, level: usize) -> String {
    format!("cells/seed-{seed}_level-{level}")
}

fn cell_grid(config: &ExperimentConfig) -> Vec<(u64, usize)> {
    config
        .seeds
        .iter()
        .flat_map(|&s| (0..config.levels.len()).map(move |l| (s, l)))
        .collect()
}

fn run_cells(config: &ExperimentConfig, runs: RunSelection) -> Vec<((u64, usize), Result<CellArtifacts>)> {
    let grid = cell_grid(config);
    let results = par::with_jobs(config.jobs, || {
        par::map(Execution::Parallel, &grid, |&(seed, level)| run_cell(config, seed, level, runs))
    });
    grid.into_iter().zip(results).collect()
}

fn write_cell(out: &Path, dir: &str, cell: &CellArtifacts, traces: bool) -> Result<()> {
    let base = out.join(dir);
    io::write_json(&base.join("report.json"), &cell.report)?;
    if !traces {
        return Ok(());
    }
    for (name, trace) in &cell.traces {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).map_err(|e| Error::io(base.join("traces"), e))?;
        io::write_bytes(&base.join("traces").join(format!("{name}.csv")), &buf)?;
        if name == ENSEMBLE_RUN {
            let mut buf = Vec::new();
            ensemble::write_event_log(&mut buf, &trace.ensemble).map_err(|e| Error::io(&base, e))?;
            io::write_bytes(&base.join("ensemble_events.csv"), &buf)?;
        }
    }
    Ok(())
}

/// Runs every cell and writes `cells/*/report.json`, traces, `manifest.json`
/// and `summary.json` under the output directory. A failing cell is recorded
/// in the manifest; the others still run and are written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportBundle> {
    config.validate()?;
    let out = &config.output_dir;
    let mut cells = Vec::new();
    let mut reports = Vec::new();
    for ((seed, level), result) in run_cells(config, RunSelection::All) {
        let dir = cell_dir(seed, level);
        let written = result.and_then(|cell| write_cell(out, &dir, &cell, config.write_traces).map(|_| cell));
        let (status, error) = match written {
            Ok(cell) => {
                reports.push(cell.report);
                (CellStatus::Ok, None)
            }
            Err(e) => (CellStatus::Failed, Some(e.to_string())),
        };
        cells.push(ManifestCell {
            seed,
            level,
            dir,
            status,
            error,
        });
    }
    let manifest = Manifest {
        config_hash: config.hash()?,
        seeds: config.seeds.clone(),
        levels: config.levels.len(),
        failed: cells.iter().filter(|c| c.status == CellStatus::Failed).count(),
        cells,
    };
    let summary = summarize(&reports.iter().collect::<Vec<_>>());
    io::write_json(&out.join("manifest.json"), &manifest)?;
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(ReportBundle {
        reports,
        manifest,
        summary,
    })
}

/// What the vote-window sweep optimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepObjective {
    /// Smallest mean |TPD − 1|, ties by smaller mean ADD.
    #[default]
    TpdError,
    /// Smallest mean ADD, ties by |TPD − 1|.
    Add,
    /// Largest mean accuracy.
    Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub window: usize,
    pub cells: usize,
    pub failed: usize,
    pub tpd_error: Option<f64>,
    pub add: Option<f64>,
    pub tpd: Option<f64>,
    pub tpr: Option<f64>,
    pub accuracy: Option<f64>,
    pub drift_count: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub objective: SweepObjective,
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the best window; absent when no row has data.
    pub best: Option<usize>,
}

fn key(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::INFINITY)
}

/// Picks the best row; earlier rows win exact ties.
pub fn best_row(rows: &[SweepRow], objective: SweepObjective) -> Option<usize> {
    let score = |r: &SweepRow| -> (f64, f64) {
        match objective {
            SweepObjective::TpdError => (key(r.tpd_error), key(r.add)),
            SweepObjective::Add => (key(r.add), key(r.tpd_error)),
            SweepObjective::Accuracy => (-r.accuracy.unwrap_or(f64::NEG_INFINITY), 0.0),
        }
    };
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.cells > 0)
        .min_by(|(ia, a), (ib, b)| {
            let (sa, sb) = (score(a), score(b));
            sa.0.total_cmp(&sb.0).then(sa.1.total_cmp(&sb.1)).then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
}

/// Ensemble-only runs of every cell for each vote window.
pub fn sweep_vote_window(config: &ExperimentConfig, windows: &[usize], objective: SweepObjective) -> Result<SweepTable> {
    if windows.is_empty() {
        return Err(Error::Config("the sweep needs at least one window".into()));
    }
    if config.ensemble.disabled {
        return Err(Error::Config("the sweep needs the ensemble enabled".into()));
    }
    let mut rows = Vec::with_capacity(windows.len());
    for &window in windows {
        let mut cfg = config.clone();
        cfg.ensemble.window = Some(window);
        cfg.validate()?;
        let results = run_cells(&cfg, RunSelection::EnsembleOnly);
        let failed = results.iter().filter(|(_, r)| r.is_err()).count();
        let reports: Vec<CellReport> = results.into_iter().filter_map(|(_, r)| r.ok()).map(|c| c.report).collect();
        let summary = summarize(&reports.iter().collect::<Vec<_>>());
        let pooled = |f: &dyn Fn(&SummaryRow) -> &Aggregate| -> Option<f64> {
            let (mut sum, mut n) = (0.0, 0usize);
            for row in summary.rows.iter().filter(|r| r.run == ENSEMBLE_RUN) {
                let a = f(row);
                if let Some(m) = a.mean {
                    sum += m * a.n as f64;
                    n += a.n;
                }
            }
            (n > 0).then(|| sum / n as f64)
        };
        rows.push(SweepRow {
            window,
            cells: reports.len(),
            failed,
            tpd_error: pooled(&|r| &r.tpd_error),
            add: pooled(&|r| &r.add),
            tpd: pooled(&|r| &r.tpd),
            tpr: pooled(&|r| &r.tpr),
            accuracy: pooled(&|r| &r.accuracy),
            drift_count: pooled(&|r| &r.drift_count),
        });
    }
    let best = best_row(&rows, objective);
    Ok(SweepTable { objective, rows, best })
}

/// Writes the sweep table as CSV: `window,cells,failed,tpd_error,add,tpd,tpr,accuracy,drift_count,best`.
pub fn write_sweep_csv<W: std::io::Write>(mut out: W, table: &SweepTable) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    writeln!(out, "window,cells,failed,tpd_error,add,tpd,tpr,accuracy,drift_count,best")?;
    for (i, r) in table.rows.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.window,
            r.cells,
            r.failed,
            opt(r.tpd_error),
            opt(r.add),
            opt(r.tpd),
            opt(r.tpr),
            opt(r.accuracy),
            opt(r.drift_count),
            u8::from(table.best == Some(i))
        )?;
    }
    Ok(())
}
