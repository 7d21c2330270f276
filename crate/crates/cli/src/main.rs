//! `sparse-drift` command-line runner.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 at least one
//! experiment cell failed (see the manifest).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use sparse_drift::detectors::{self, DetectorConfig, DetectorEvent, DetectorKind, DriftDetector, Signal};
use sparse_drift::ensemble::{self, Ensemble, EnsembleConfig, Preset};
use sparse_drift::evaluation::{prequential_run, GaussianNb, Loss, MetricsReport, Monitor, RetrainPolicy};
use sparse_drift::experiment::{self, ExperimentConfig, GeneratedDataset, ImputerChoice, SweepObjective};
use sparse_drift::imputation::{impute, select_best_imputer, ImputationMethod, SelectionOptions};
use sparse_drift::io;
use sparse_drift::missingness::{classify_missingness, Mechanism};
use sparse_drift::streamgen::{inject_sparsity, DriftKind, DriftSpec, LabeledStream, SparsityPlan};
use sparse_drift::Error;

#[derive(Parser)]
#[command(name = "sparse-drift", version, about = "Drift detection on sparse streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled stream with label-flip drifts (CSV + drift sidecar).
    Gen(GenArgs),
    /// Remove values from a stream under MCAR, MAR or MNAR.
    Sparsify(SparsifyArgs),
    /// Classify the missingness of every feature and fit distributions.
    Analyze(AnalyzeArgs),
    /// Fill missing cells with a fixed or automatically selected imputer.
    Impute(ImputeArgs),
    /// Run detectors or an ensemble over a numeric series.
    Detect(DetectArgs),
    /// Prequential evaluation of an imputed stream.
    Eval(EvalArgs),
    /// Run a full experiment matrix from a config file.
    Run(RunArgs),
    /// Sweep the ensemble vote window.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Experiment config whose generated dataset section is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    instances: usize,
    #[arg(long, default_value_t = 4)]
    features: usize,
    /// Drift positions.
    #[arg(long, value_delimiter = ',')]
    drift_at: Vec<usize>,
    /// Width of every drift (0 = abrupt).
    #[arg(long, default_value_t = 0)]
    width: usize,
    #[arg(long, default_value_t = 0.0)]
    correlation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; the sidecar goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SparsifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    mechanism: Mechanism,
    #[arg(long)]
    rate: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    targets: Vec<usize>,
    #[arg(long)]
    driver: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Never classify a feature as MCAR.
    #[arg(long)]
    no_mcar: bool,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImputeArgs {
    #[arg(long)]
    input: PathBuf,
    /// `auto` or one of mean, median, mode, zero, knn(k).
    #[arg(long, default_value = "auto")]
    method: String,
    #[arg(long, value_delimiter = ',', default_value = "mean,median,mode,zero,knn(5)")]
    candidates: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MonitorArgs {
    /// Base detector; repeat for several.
    #[arg(long = "detector")]
    detectors: Vec<DetectorKind>,
    /// Ensemble preset.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long, default_value_t = ensemble::DEFAULT_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    input: PathBuf,
    /// Column holding the series.
    #[arg(long, default_value = "error")]
    column: String,
    #[command(flatten)]
    monitor: MonitorArgs,
    /// Event log CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    /// Drift sidecar; `<input>.drift.json` when present.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[command(flatten)]
    monitor: MonitorArgs,
    #[arg(long, default_value_t = sparse_drift::evaluation::DEFAULT_ADI_FLOOR)]
    adi_floor: usize,
    /// Keep the learner on drift instead of resetting it.
    #[arg(long)]
    no_retrain: bool,
    /// Metrics JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run this seed only.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = experiment::ENV_OUTPUT_DIR)]
    out: Option<PathBuf>,
    #[arg(long, env = experiment::ENV_JOBS)]
    jobs: Option<usize>,
    #[arg(long)]
    preset: Option<Preset>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
    windows: Vec<usize>,
    #[arg(long, value_enum, default_value = "tpd-error")]
    objective: Objective,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Objective {
    TpdError,
    Add,
    Accuracy,
}

impl From<Objective> for SweepObjective {
    fn from(o: Objective) -> Self {
        match o {
            Objective::TpdError => SweepObjective::TpdError,
            Objective::Add => SweepObjective::Add,
            Objective::Accuracy => SweepObjective::Accuracy,
        }
    }
}

/// Experiment cells that failed; mapped to exit code 4.
#[derive(Debug)]
struct CellFailures(usize);

impl std::fmt::Display for CellFailures {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} experiment cell(s) failed; see manifest.json", self.0)
    }
}

impl std::error::Error for CellFailures {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<CellFailures>().is_some() {
        return 4;
    }
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config(_) | Error::Parameter(_) | Error::Spec(_) | Error::Json(_) | Error::NoDefault(_)) => 2,
        Some(Error::Input(_) | Error::Parse { .. } | Error::Schema(_) | Error::Io { .. }) => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Sparsify(a) => sparsify(a),
        Command::Analyze(a) => analyze(a),
        Command::Impute(a) => impute_cmd(a),
        Command::Detect(a) => detect(a),
        Command::Eval(a) => eval(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => io::write_bytes(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn load_stream(path: &Path, sidecar: Option<&Path>) -> Result<LabeledStream> {
    let default = io::sidecar_path(path);
    let sidecar = sidecar.or_else(|| default.exists().then_some(default.as_path()));
    Ok(io::read_stream_file(path, sidecar)?)
}

fn save_stream(path: &Path, stream: &LabeledStream) -> Result<()> {
    io::write_stream_file(path, stream)?;
    io::write_json(&io::sidecar_path(path), &stream.drift)?;
    Ok(())
}

fn gen(a: GenArgs) -> Result<()> {
    let dataset = match &a.config {
        Some(path) => match ExperimentConfig::load(path)?.dataset {
            experiment::DatasetConfig::Generated(g) => g,
            _ => return Err(Error::Config("the config's dataset is not generated".into()).into()),
        },
        None => GeneratedDataset {
            instances: a.instances,
            features: a.features,
            correlation: a.correlation,
            drift: if a.width == 0 {
                DriftSpec::abrupt(a.drift_at.clone())
            } else {
                DriftSpec::gradual(a.drift_at.clone(), vec![a.width; a.drift_at.len()])
            },
            ..GeneratedDataset::default()
        },
    };
    let stream = dataset.generate(a.seed)?;
    save_stream(&a.out, &stream)
}

fn sparsify(a: SparsifyArgs) -> Result<()> {
    let stream = load_stream(&a.input, None)?;
    let plan = SparsityPlan {
        mechanism: a.mechanism,
        rate: a.rate,
        targets: a.targets,
        driver: a.driver,
        seed: a.seed,
    };
    let features = inject_sparsity(&stream.features, &plan)?;
    save_stream(&a.out, &LabeledStream::new(features, stream.labels, stream.drift)?)
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let stream = load_stream(&a.input, None)?;
    let verdict = classify_missingness(&stream.features, a.alpha, !a.no_mcar)?;
    let fits: Vec<serde_json::Value> = (0..stream.features.n_cols())
        .map(|j| match sparse_drift::imputation::identify_distribution(&stream.features.observed_column(j)) {
            Ok(fit) => serde_json::json!({ "feature": j, "fit": fit }),
            Err(e) => serde_json::json!({ "feature": j, "error": e.to_string() }),
        })
        .collect();
    let report = serde_json::json!({ "verdict": verdict, "distributions": fits });
    emit(a.out.as_deref(), io::to_json_string(&report)?.as_bytes())
}

fn impute_cmd(a: ImputeArgs) -> Result<()> {
    let stream = load_stream(&a.input, None)?;
    let choice = ImputerChoice::try_from(a.method)?;
    let (method, report) = match choice {
        ImputerChoice::Fixed(m) => (m, None),
        ImputerChoice::Auto => {
            let candidates = a
                .candidates
                .iter()
                .map(|c| c.parse::<ImputationMethod>())
                .collect::<Result<Vec<_>, _>>()?;
            let verdict = classify_missingness(&stream.features, a.alpha, true)?;
            let r = select_best_imputer(&stream.features, &candidates, &verdict, a.seed, SelectionOptions::default())?;
            (r.winner, Some(r))
        }
    };
    let imputed = impute(&stream.features, method)?;
    save_stream(&a.out, &LabeledStream::new(imputed.data, stream.labels, stream.drift)?)?;
    let summary = serde_json::json!({
        "method": method,
        "knn_fallbacks": imputed.knn_fallbacks.len(),
        "selection": report,
    });
    emit(None, io::to_json_string(&summary)?.as_bytes())
}

fn ensemble_config(preset: Preset, window: usize) -> EnsembleConfig {
    EnsembleConfig::preset(preset).with_window(window)
}

fn detect(a: DetectArgs) -> Result<()> {
    let file = std::fs::File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let xs = io::read_series(std::io::BufReader::new(file), &a.column)?;
    let m = &a.monitor;
    let mut buf = Vec::new();
    if let Some(preset) = m.preset {
        let mut e = Ensemble::new(&ensemble_config(preset, m.window), &DetectorConfig::default(), m.seed)?;
        let outputs = xs
            .iter()
            .map(|&x| e.update(x).map(|s| s.output))
            .collect::<Result<Vec<_>, _>>()?;
        ensemble::write_event_log(&mut buf, &outputs)?;
    } else {
        let kinds = if m.detectors.is_empty() {
            DetectorKind::ALL.to_vec()
        } else {
            m.detectors.clone()
        };
        let mut events = Vec::new();
        for kind in kinds {
            let mut d = DetectorConfig::default().build(kind, m.seed)?;
            for (index, &x) in xs.iter().enumerate() {
                let signal = d.update(x)?;
                if signal != Signal::InControl {
                    events.push(DetectorEvent {
                        index,
                        detector: kind,
                        signal,
                    });
                }
            }
        }
        events.sort_by_key(|e| (e.index, e.detector));
        detectors::write_event_log(&mut buf, &events)?;
    }
    emit(a.out.as_deref(), &buf)
}

fn eval(a: EvalArgs) -> Result<()> {
    let stream = load_stream(&a.input, a.sidecar.as_deref())?;
    let m = &a.monitor;
    let mut monitor = if let Some(preset) = m.preset {
        Monitor::Ensemble(Ensemble::new(&ensemble_config(preset, m.window), &DetectorConfig::default(), m.seed)?)
    } else if let [kind] = m.detectors.as_slice() {
        Monitor::Detector(DetectorConfig::default().build(*kind, m.seed)?)
    } else if m.detectors.is_empty() {
        let preset = if stream.drift.kind == DriftKind::Gradual && !stream.drift.is_empty() {
            Preset::Gradual
        } else {
            Preset::Abrupt
        };
        Monitor::Ensemble(Ensemble::new(&ensemble_config(preset, m.window), &DetectorConfig::default(), m.seed)?)
    } else {
        return Err(Error::Config("eval takes one --detector or a --preset".into()).into());
    };
    let policy = if a.no_retrain {
        RetrainPolicy::Ignore
    } else {
        RetrainPolicy::Reset
    };
    let mut learner = GaussianNb::new(stream.features.n_cols());
    let trace = prequential_run(&stream, &mut learner, &mut monitor, policy, Loss::ZeroOne)?;
    if let Some(path) = &a.trace {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        io::write_bytes(path, &buf)?;
    }
    let report = MetricsReport::from_trace(&trace, a.adi_floor)?;
    emit(a.out.as_deref(), io::to_json_string(&report)?.as_bytes())
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&a.config)?;
    config.apply_env_overrides()?;
    if let Some(seed) = a.seed {
        config.seeds = vec![seed];
    }
    if let Some(out) = &a.out {
        config.output_dir = out.clone();
    }
    if let Some(jobs) = a.jobs {
        config.jobs = jobs;
    }
    if let Some(preset) = a.preset {
        config.ensemble.preset = Some(preset);
        config.ensemble.members = None;
    }
    config.validate()?;
    Ok(config)
}

fn run(a: RunArgs) -> Result<()> {
    let config = experiment_config(&a.experiment)?;
    let bundle = experiment::run_experiment(&config)?;
    eprintln!(
        "{} cells, {} failed; reports in {}",
        bundle.manifest.cells.len(),
        bundle.manifest.failed,
        config.output_dir.display()
    );
    if bundle.manifest.failed > 0 {
        return Err(CellFailures(bundle.manifest.failed).into());
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let config = experiment_config(&a.experiment)?;
    let table = experiment::sweep_vote_window(&config, &a.windows, a.objective.into())?;
    let mut csv = Vec::new();
    experiment::write_sweep_csv(&mut csv, &table)?;
    io::write_bytes(&config.output_dir.join("sweep.csv"), &csv)?;
    io::write_json(&config.output_dir.join("sweep.json"), &table)?;
    std::io::stdout().write_all(&csv)?;
    Ok(())
}
