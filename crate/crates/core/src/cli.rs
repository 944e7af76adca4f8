//! The `uncertal` command line: configuration, orchestration and output files.
//!
//! A run is described by a TOML file (see [`ConfigFile`]) and/or flags; flags
//! override file values. Everything is resolved into a fully explicit
//! [`ConfigFile`] before any work starts, and that resolved form is what the
//! run manifest records, so feeding a manifest back through `--config`
//! reproduces the run.
//!
//! Outputs (experiment mode): `curves.csv`, `alc.csv`, `summary.csv`,
//! `summary.txt` and `manifest.toml`. Trace mode (`--trace`) writes
//! `trace.csv`, `trace_scores.csv` and `manifest.toml`. All files are
//! rendered in memory and only written, each via a temporary file and a
//! rename, once the whole run has succeeded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::{load, make_synthetic, DataError, Dataset, Format, SyntheticSpec};
use crate::experiment::{
    build_table, run_experiment, run_trial_observed, Budget, ComparisonTable, ExperimentConfig,
    ExperimentError, NamedStrategy, TrialResult,
};
use crate::model::{Label, ModelError};
use crate::strategies::{SolverStats, StrategyError, STRATEGY_NAMES};

/// Environment variable capping worker threads (`0` or unset: automatic).
pub const THREADS_ENV: &str = "UNCERTAL_THREADS";

/// Header of the learning-curve CSV.
pub const CURVES_HEADER: &str = "dataset,strategy,trial,step,accuracy";
/// Header of the per-trial ALC CSV.
pub const ALC_HEADER: &str = "dataset,strategy,trial,alc";
/// Header of the selection trace CSV.
pub const TRACE_HEADER: &str = "step,x1,x2,true_label,score";
/// Header of the per-step score dump written next to the trace.
pub const TRACE_SCORES_HEADER: &str =
    "step,pool_index,x1,x2,posterior_pos,posterior_neg,v_pos,v_neg,score,selected";

const DEFAULT_DATA_DIR: &str = "data";
const DEFAULT_OUT_DIR: &str = "results";
const GAUSSIAN_GENERATOR: &str = "gaussian";
const SYNTHETIC_NAME: &str = "synthetic";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset '{dataset}': {message}")]
    Data { dataset: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn data(dataset: &str, err: impl ToString) -> Self {
        CliError::Data {
            dataset: dataset.to_string(),
            message: err.to_string(),
        }
    }

    fn from_experiment(dataset: &str, err: ExperimentError) -> Self {
        match err {
            ExperimentError::Data(e) => CliError::data(dataset, e),
            ExperimentError::Config(m) => CliError::Config(m),
            ExperimentError::Strategy(StrategyError::InvalidSpec(m)) => CliError::Config(m),
            ExperimentError::Strategy(StrategyError::UnknownStrategy(m)) => CliError::Config(m),
            ExperimentError::Model(ModelError::InvalidConfig(m)) => CliError::Config(m),
            other => CliError::Numerical(format!("dataset '{dataset}': {other}")),
        }
    }
}

/// Command-line flags. Every flag overrides the corresponding config value.
#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "uncertal",
    version,
    about = "Pool-based active learning benchmark for logistic regression"
)]
pub struct Args {
    /// TOML configuration file (a run manifest is accepted too).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Comma-separated dataset names.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub datasets: Option<Vec<String>>,
    /// Comma-separated strategy names.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
    /// Trials per dataset and strategy.
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,
    /// Queries per trial: a number, `default` (min(100, pool)) or `full`.
    #[arg(long, value_name = "N")]
    pub budget: Option<BudgetSetting>,
    /// Regularization parameter lambda of ||w||^2 / (2 lambda).
    #[arg(long = "lambda", value_name = "X")]
    pub lambda: Option<f64>,
    /// Base seed of all random streams.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Export the selection trace of one strategy on one 2-D dataset
    /// instead of running the benchmark.
    #[arg(long)]
    pub trace: bool,
}

/// Query budget as written in configs and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetSetting {
    Default,
    Full,
    Count(usize),
}

impl From<BudgetSetting> for Budget {
    fn from(b: BudgetSetting) -> Budget {
        match b {
            BudgetSetting::Default => Budget::Default,
            BudgetSetting::Full => Budget::Full,
            BudgetSetting::Count(n) => Budget::Fixed(n),
        }
    }
}

impl FromStr for BudgetSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "default" => Ok(BudgetSetting::Default),
            "full" => Ok(BudgetSetting::Full),
            _ => s.parse().map(BudgetSetting::Count).map_err(|_| {
                format!("budget must be a non-negative integer, 'default' or 'full', got '{s}'")
            }),
        }
    }
}

impl Serialize for BudgetSetting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BudgetSetting::Default => s.serialize_str("default"),
            BudgetSetting::Full => s.serialize_str("full"),
            BudgetSetting::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BudgetSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(BudgetSetting::Count(n as usize)),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Top-level configuration file.
///
/// ```toml
/// trials = 20
/// budget = 100            # or "default" / "full"
/// lambda = 100.0
/// seed = 0
/// strategies = ["random", "eer", "ueer"]
/// datasets = ["breast", "gauss"]
/// data_dir = "data"
/// out = "results"
///
/// [dataset.breast]
/// path = "data/breast.libsvm"
///
/// [dataset.gauss]
/// generator = "gaussian"
/// per_class = 100
/// mean_pos = [1.0, 0.0]
/// mean_neg = [-1.0, 0.0]
/// covariance = [1.0, 0.0, 0.0, 1.0]
/// seed = 0
/// ```
///
/// Relative paths are resolved against the directory of the config file.
/// Datasets listed without a section are looked up as
/// `<data_dir>/<name>.libsvm` or `<data_dir>/<name>.csv`; the name
/// `synthetic` without a section is the default Gaussian generator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetSetting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Two-sided level of the paired t-tests behind win/tie/loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategies: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datasets: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<bool>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub dataset: BTreeMap<String, DatasetSection>,
}

/// One `[dataset.<name>]` section: either a file or a generator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// `libsvm` or `csv`; inferred from the extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    /// `gaussian`: two 2-D Gaussian classes with a shared covariance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_pos: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_neg: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Record of a completed run, written as `manifest.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// `experiment` or `trace`.
    pub mode: String,
    pub threads: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    /// Per-dataset `sha256:<hex>` of the file bytes (or, for generated
    /// data, of its libsvm rendering).
    pub checksums: BTreeMap<String, String>,
    pub solver: SolverSummary,
    /// The fully resolved configuration; usable as a config file.
    pub config: ConfigFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSummary {
    pub fits: u64,
    pub non_converged: u64,
    pub max_grad_inf_norm: f64,
}

impl From<SolverStats> for SolverSummary {
    fn from(s: SolverStats) -> Self {
        Self {
            fits: s.retrains,
            non_converged: s.non_converged,
            max_grad_inf_norm: s.max_grad_inf_norm,
        }
    }
}

/// A loaded dataset with its checksum.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub checksum: String,
    /// Generating distribution, for generated datasets.
    pub synthetic: Option<SyntheticSpec>,
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct Plan {
    pub resolved: ConfigFile,
    pub experiment: ExperimentConfig,
    pub strategies: Vec<NamedStrategy>,
    pub dataset_names: Vec<String>,
    pub out: PathBuf,
    pub trace: bool,
}

/// Rendered output files, name to content.
pub type Outputs = BTreeMap<String, String>;

/// Everything a run produced, before it is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub files: Outputs,
}

/// Parse a config file. Run manifests are accepted and yield their
/// resolved configuration plus the recorded checksums.
pub fn read_config(
    path: &Path,
) -> Result<(ConfigFile, Option<BTreeMap<String, String>>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// [`read_config`] on in-memory text.
pub fn parse_config(text: &str) -> Result<(ConfigFile, Option<BTreeMap<String, String>>), String> {
    let table: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    if table.contains_key("tool") && table.contains_key("config") {
        let manifest: RunManifest = toml::from_str(text).map_err(|e| e.to_string())?;
        Ok((manifest.config, Some(manifest.checksums)))
    } else {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| e.to_string())?;
        Ok((cfg, None))
    }
}

fn absolutize(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn canonical(p: &Path) -> Result<PathBuf, CliError> {
    fs::canonicalize(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
}

/// Files in `dir` with a dataset extension, as `(stem, path)` sorted by stem.
fn bundled_datasets(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Config(format!("data_dir {}: {e}", dir.display())))?;
    let mut found: Vec<(String, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Config(e.to_string()))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if !matches!(ext, "libsvm" | "csv") {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if found.iter().any(|(s, _)| s == stem) {
                return Err(CliError::Config(format!(
                    "data_dir {} has both a libsvm and a csv file for '{stem}'",
                    dir.display()
                )));
            }
            found.push((stem.to_string(), path));
        }
    }
    found.sort();
    Ok(found)
}

fn resolve_section(
    name: &str,
    section: &DatasetSection,
    base: &Path,
) -> Result<DatasetSection, CliError> {
    let bad = |m: String| CliError::Config(format!("[dataset.{name}]: {m}"));
    match (&section.path, &section.generator) {
        (Some(_), Some(_)) => Err(bad("set either 'path' or 'generator', not both".into())),
        (None, None) => Err(bad("needs 'path' or 'generator'".into())),
        (Some(path), None) => {
            let synthetic_keys = section.per_class.is_some()
                || section.mean_pos.is_some()
                || section.mean_neg.is_some()
                || section.covariance.is_some()
                || section.seed.is_some();
            if synthetic_keys {
                return Err(bad("generator parameters given for a file dataset".into()));
            }
            let path = absolutize(base, path);
            if !path.is_file() {
                return Err(bad(format!("file {} does not exist", path.display())));
            }
            let format = match &section.format {
                Some(f) => Format::parse(f).ok_or_else(|| bad(format!("unknown format '{f}'")))?,
                None => Format::from_path(&path),
            };
            Ok(DatasetSection {
                path: Some(canonical(&path)?),
                format: Some(format.name().to_string()),
                ..DatasetSection::default()
            })
        }
        (None, Some(generator)) => {
            if generator != GAUSSIAN_GENERATOR {
                return Err(bad(format!(
                    "unknown generator '{generator}' (expected '{GAUSSIAN_GENERATOR}')"
                )));
            }
            if section.format.is_some() {
                return Err(bad("'format' only applies to file datasets".into()));
            }
            let d = SyntheticSpec::default();
            Ok(DatasetSection {
                generator: Some(GAUSSIAN_GENERATOR.to_string()),
                per_class: Some(section.per_class.unwrap_or(d.per_class)),
                mean_pos: Some(section.mean_pos.unwrap_or(d.mean_pos)),
                mean_neg: Some(section.mean_neg.unwrap_or(d.mean_neg)),
                covariance: Some(section.covariance.unwrap_or(d.covariance)),
                seed: Some(section.seed.unwrap_or(d.seed)),
                ..DatasetSection::default()
            })
        }
    }
}

fn check_seed(seed: u64, what: &str) -> Result<(), CliError> {
    if seed > i64::MAX as u64 {
        return Err(CliError::Config(format!(
            "{what} must be at most {}",
            i64::MAX
        )));
    }
    Ok(())
}

/// Merge flags over the file, fill defaults and validate. `base` anchors
/// relative paths from the file; flag paths are relative to the working
/// directory.
pub fn resolve(file: &ConfigFile, args: &Args, base: &Path) -> Result<Plan, CliError> {
    let cwd = std::env::current_dir().map_err(|e| CliError::Config(e.to_string()))?;
    let defaults = ExperimentConfig::default();
    let trials = args.trials.or(file.trials).unwrap_or(defaults.trials);
    let budget = args
        .budget
        .or(file.budget)
        .unwrap_or(BudgetSetting::Default);
    let lambda = args.lambda.or(file.lambda).unwrap_or(defaults.lambda);
    let seed = args.seed.or(file.seed).unwrap_or(defaults.base_seed);
    check_seed(seed, "seed")?;
    let significance = file.significance.unwrap_or(defaults.significance);
    let trace = args.trace || file.trace.unwrap_or(false);

    let experiment = ExperimentConfig {
        trials,
        budget: budget.into(),
        lambda,
        base_seed: seed,
        significance,
    };
    experiment
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let strategy_names: Vec<String> = args
        .strategies
        .clone()
        .or_else(|| file.strategies.clone())
        .unwrap_or_else(|| STRATEGY_NAMES.iter().map(|s| s.to_string()).collect());
    if strategy_names.is_empty() {
        return Err(CliError::Config("no strategies selected".into()));
    }
    let mut strategies = Vec::with_capacity(strategy_names.len());
    for name in &strategy_names {
        if strategies.iter().any(|s: &NamedStrategy| &s.name == name) {
            return Err(CliError::Config(format!("strategy '{name}' listed twice")));
        }
        strategies
            .push(NamedStrategy::from_name(name).map_err(|e| CliError::Config(e.to_string()))?);
    }

    let data_dir = match &file.data_dir {
        Some(d) => absolutize(base, d),
        None => cwd.join(DEFAULT_DATA_DIR),
    };
    let out = match (&args.out, &file.out) {
        (Some(o), _) => absolutize(&cwd, o),
        (None, Some(o)) => absolutize(base, o),
        (None, None) => cwd.join(DEFAULT_OUT_DIR),
    };

    let listed = args.datasets.clone().or_else(|| file.datasets.clone());
    let names: Vec<String> = match listed {
        Some(names) => names,
        None if !file.dataset.is_empty() => file.dataset.keys().cloned().collect(),
        None => bundled_datasets(&data_dir)?
            .into_iter()
            .map(|(name, _)| name)
            .collect(),
    };
    if names.is_empty() {
        return Err(CliError::Config("no datasets selected".into()));
    }
    let mut sections = BTreeMap::new();
    for name in &names {
        if name.is_empty() || name.contains(',') {
            return Err(CliError::Config(format!("invalid dataset name '{name}'")));
        }
        if sections.contains_key(name) {
            return Err(CliError::Config(format!("dataset '{name}' listed twice")));
        }
        let section = match file.dataset.get(name) {
            Some(s) => resolve_section(name, s, base)?,
            None => {
                let candidates =
                    ["libsvm", "csv"].map(|ext| data_dir.join(format!("{name}.{ext}")));
                match candidates.iter().find(|p| p.is_file()) {
                    Some(p) => resolve_section(
                        name,
                        &DatasetSection {
                            path: Some(p.clone()),
                            ..DatasetSection::default()
                        },
                        base,
                    )?,
                    None if name == SYNTHETIC_NAME => resolve_section(
                        name,
                        &DatasetSection {
                            generator: Some(GAUSSIAN_GENERATOR.into()),
                            ..DatasetSection::default()
                        },
                        base,
                    )?,
                    None => {
                        return Err(CliError::Config(format!(
                            "dataset '{name}' has no [dataset.{name}] section and no {name}.libsvm or {name}.csv in {}",
                            data_dir.display()
                        )))
                    }
                }
            }
        };
        if let Some(s) = section.seed {
            check_seed(s, &format!("[dataset.{name}] seed"))?;
        }
        sections.insert(name.clone(), section);
    }
    for name in file.dataset.keys() {
        if !sections.contains_key(name) {
            log::info!("dataset section '{name}' is not selected for this run");
        }
    }
    if trace && (names.len() != 1 || strategies.len() != 1) {
        return Err(CliError::Config(format!(
            "--trace needs exactly one dataset and one strategy, got {} and {}",
            names.len(),
            strategies.len()
        )));
    }

    let resolved = ConfigFile {
        trials: Some(trials),
        budget: Some(budget),
        lambda: Some(lambda),
        seed: Some(seed),
        significance: Some(significance),
        strategies: Some(strategy_names),
        datasets: Some(names.clone()),
        data_dir: Some(data_dir),
        out: Some(out.clone()),
        trace: Some(trace),
        dataset: sections,
    };
    Ok(Plan {
        resolved,
        experiment,
        strategies,
        dataset_names: names,
        out,
        trace,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Load (or generate) one resolved dataset, named after its section.
pub fn load_dataset(name: &str, section: &DatasetSection) -> Result<LoadedDataset, CliError> {
    let loaded = if let Some(path) = &section.path {
        let format = section
            .format
            .as_deref()
            .and_then(Format::parse)
            .unwrap_or_else(|| Format::from_path(path));
        let bytes =
            fs::read(path).map_err(|e| CliError::data(name, format!("{}: {e}", path.display())))?;
        let dataset = load(path, format)
            .map_err(|e| CliError::data(name, e))?
            .with_name(name);
        LoadedDataset {
            dataset,
            checksum: sha256_hex(&bytes),
            synthetic: None,
        }
    } else {
        let d = SyntheticSpec::default();
        let spec = SyntheticSpec {
            per_class: section.per_class.unwrap_or(d.per_class),
            mean_pos: section.mean_pos.unwrap_or(d.mean_pos),
            mean_neg: section.mean_neg.unwrap_or(d.mean_neg),
            covariance: section.covariance.unwrap_or(d.covariance),
            seed: section.seed.unwrap_or(d.seed),
        };
        let dataset = make_synthetic(&spec)
            .map_err(|e| CliError::data(name, e))?
            .with_name(name);
        let mut rendered = Vec::new();
        dataset
            .write_libsvm(&mut rendered)
            .map_err(|e| CliError::data(name, e))?;
        LoadedDataset {
            dataset,
            checksum: sha256_hex(&rendered),
            synthetic: Some(spec),
        }
    };
    let (pos, neg) = loaded.dataset.class_counts();
    if pos < 2 || neg < 2 {
        return Err(CliError::data(
            name,
            DataError::TooFewPerClass {
                name: name.to_string(),
                pos,
                neg,
            },
        ));
    }
    Ok(loaded)
}

/// Format a real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// `curves.csv`: one row per (dataset, strategy, trial, step).
pub fn render_curves(results: &[TrialResult]) -> String {
    let mut s = String::new();
    s.push_str(CURVES_HEADER);
    s.push('\n');
    for r in results {
        for (step, acc) in r.curve.accuracies.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.dataset,
                r.strategy,
                r.trial,
                step,
                fmt_real(*acc)
            );
        }
    }
    s
}

/// `alc.csv`: one row per (dataset, strategy, trial).
pub fn render_alc(results: &[TrialResult]) -> String {
    let mut s = String::new();
    s.push_str(ALC_HEADER);
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.dataset,
            r.strategy,
            r.trial,
            fmt_real(r.alc)
        );
    }
    s
}

fn wtl_label(proposed: &str, baseline: &str) -> (String, String) {
    (
        format!("w/t/l {proposed} vs {baseline}"),
        proposed.to_string(),
    )
}

/// `summary.csv`: mean ALC per dataset and strategy, then a `mean` row, an
/// `average_rank` row and one win/tie/loss row per compared pair (the
/// counts sit in the proposed strategy's column).
pub fn render_summary_csv(table: &ComparisonTable) -> String {
    let mut s = String::from("dataset");
    for name in &table.strategies {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    let mut row = |label: &str, cells: Vec<String>| {
        s.push_str(label);
        for c in cells {
            s.push(',');
            s.push_str(&c);
        }
        s.push('\n');
    };
    for (d, name) in table.datasets.iter().enumerate() {
        row(
            name,
            table.mean_alc[d].iter().map(|v| fmt_real(*v)).collect(),
        );
    }
    row(
        "mean",
        table.overall_mean.iter().map(|v| fmt_real(*v)).collect(),
    );
    row(
        "average_rank",
        table.average_rank.iter().map(|v| fmt_real(*v)).collect(),
    );
    for cmp in &table.comparisons {
        let (label, column) = wtl_label(&cmp.proposed, &cmp.baseline);
        let (w, t, l) = cmp.counts();
        let cells = table
            .strategies
            .iter()
            .map(|s| {
                if *s == column {
                    format!("{w}/{t}/{l}")
                } else {
                    String::new()
                }
            })
            .collect();
        row(&label, cells);
    }
    s
}

fn aligned_line(
    out: &mut String,
    label: &str,
    cells: &[String],
    label_width: usize,
    col_width: usize,
) {
    let _ = write!(out, "{label:<label_width$}");
    for c in cells {
        let _ = write!(out, "  {c:>col_width$}");
    }
    out.push('\n');
}

/// `summary.txt`: the same table, aligned for reading.
pub fn render_summary_text(table: &ComparisonTable, cfg: &ExperimentConfig) -> String {
    let lw = table
        .datasets
        .iter()
        .map(String::len)
        .chain(["average rank".len()])
        .max()
        .unwrap_or(0);
    let cw = table
        .strategies
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max(8);
    let rule = "-".repeat(lw + table.strategies.len() * (cw + 2));
    let fixed = |v: &[f64], digits: usize| {
        v.iter()
            .map(|x| format!("{x:.digits$}"))
            .collect::<Vec<_>>()
    };
    let mut s = String::new();
    aligned_line(&mut s, "dataset", &table.strategies, lw, cw);
    let _ = writeln!(s, "{rule}");
    for (d, name) in table.datasets.iter().enumerate() {
        aligned_line(&mut s, name, &fixed(&table.mean_alc[d], 4), lw, cw);
    }
    let _ = writeln!(s, "{rule}");
    aligned_line(&mut s, "mean", &fixed(&table.overall_mean, 4), lw, cw);
    aligned_line(
        &mut s,
        "average rank",
        &fixed(&table.average_rank, 2),
        lw,
        cw,
    );
    if !table.comparisons.is_empty() {
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(
            s,
            "win/tie/loss (paired t-test over {} trials, two-sided level {}):",
            cfg.trials, cfg.significance
        );
        for cmp in &table.comparisons {
            let (w, t, l) = cmp.counts();
            let _ = writeln!(s, "  {} vs {}: {w}/{t}/{l}", cmp.proposed, cmp.baseline);
        }
    }
    s
}

/// Selection trace of one strategy on one 2-D dataset (trial 0): the trace
/// CSV and the per-step score dump.
pub fn render_trace(
    ds: &Dataset,
    strategy: &NamedStrategy,
    cfg: &ExperimentConfig,
) -> Result<(String, String, SolverStats), CliError> {
    if ds.dim() != 2 {
        return Err(CliError::data(
            ds.name(),
            DataError::NotTwoDimensional {
                name: ds.name().to_string(),
                dim: ds.dim(),
            },
        ));
    }
    let mut trace = String::new();
    trace.push_str(TRACE_HEADER);
    trace.push('\n');
    let mut scores = String::new();
    scores.push_str(TRACE_SCORES_HEADER);
    scores.push('\n');
    let label = |y: Label| if y == Label::Pos { "1" } else { "-1" };
    let result = run_trial_observed(ds, strategy, cfg, 0, |ev| {
        let x = ds.row(ev.pool_index);
        let score = ev
            .table
            .and_then(|t| t.rows.iter().find(|r| r.pool_index == ev.pool_index))
            .map(|r| fmt_real(r.aggregated))
            .unwrap_or_default();
        let _ = writeln!(
            trace,
            "{},{},{},{},{}",
            ev.step,
            fmt_real(x[0]),
            fmt_real(x[1]),
            label(ds.label(ev.pool_index)),
            score
        );
        if let Some(table) = ev.table {
            for r in &table.rows {
                let x = ds.row(r.pool_index);
                let _ = writeln!(
                    scores,
                    "{},{},{},{},{},{},{},{},{},{}",
                    ev.step,
                    r.pool_index,
                    fmt_real(x[0]),
                    fmt_real(x[1]),
                    fmt_real(r.per_label_posterior[Label::Pos.index()]),
                    fmt_real(r.per_label_posterior[Label::Neg.index()]),
                    fmt_real(r.per_label_v[Label::Pos.index()]),
                    fmt_real(r.per_label_v[Label::Neg.index()]),
                    fmt_real(r.aggregated),
                    u8::from(r.pool_index == ev.pool_index)
                );
            }
        }
    })
    .map_err(|e| CliError::from_experiment(ds.name(), e))?;
    Ok((trace, scores, result.solver))
}

/// Worker count from [`THREADS_ENV`]: `None` for automatic.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Config(format!("{THREADS_ENV}: {e}"))),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(CliError::Config(format!(
                "{THREADS_ENV} must be a non-negative integer, got '{v}'"
            ))),
        },
    }
}

/// Run a resolved plan, rendering all outputs in memory.
pub fn execute(
    plan: &Plan,
    threads: Option<usize>,
    expected_checksums: Option<&BTreeMap<String, String>>,
) -> Result<RunOutput, CliError> {
    let started = Instant::now();
    let started_unix_seconds = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))?;
    let thread_count = pool.current_num_threads();

    let mut datasets = Vec::with_capacity(plan.dataset_names.len());
    let mut checksums = BTreeMap::new();
    for name in &plan.dataset_names {
        let loaded = load_dataset(name, &plan.resolved.dataset[name])?;
        if let Some(expected) = expected_checksums.and_then(|c| c.get(name)) {
            if *expected != loaded.checksum {
                return Err(CliError::data(
                    name,
                    format!(
                        "checksum {} differs from the manifest's {expected}",
                        loaded.checksum
                    ),
                ));
            }
        }
        checksums.insert(name.clone(), loaded.checksum.clone());
        datasets.push(loaded.dataset);
    }

    let mut files = Outputs::new();
    let mut solver = SolverStats::default();
    let mode = if plan.trace {
        let (trace, scores, stats) =
            pool.install(|| render_trace(&datasets[0], &plan.strategies[0], &plan.experiment))?;
        solver.merge(&stats);
        files.insert("trace.csv".into(), trace);
        files.insert("trace_scores.csv".into(), scores);
        "trace"
    } else {
        let mut results = Vec::new();
        for ds in &datasets {
            let part = pool
                .install(|| {
                    run_experiment(std::slice::from_ref(ds), &plan.strategies, &plan.experiment)
                })
                .map_err(|e| CliError::from_experiment(ds.name(), e))?;
            results.extend(part);
        }
        for r in &results {
            solver.merge(&r.solver);
        }
        let table = build_table(&results, &plan.experiment)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        files.insert("curves.csv".into(), render_curves(&results));
        files.insert("alc.csv".into(), render_alc(&results));
        files.insert("summary.csv".into(), render_summary_csv(&table));
        files.insert(
            "summary.txt".into(),
            render_summary_text(&table, &plan.experiment),
        );
        "experiment"
    };
    if solver.non_converged > 0 {
        log::warn!(
            "{} of {} fits stopped before reaching the gradient tolerance (max |grad| {:e})",
            solver.non_converged,
            solver.retrains,
            solver.max_grad_inf_norm
        );
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: mode.to_string(),
        threads: thread_count,
        started_unix_seconds,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        checksums,
        solver: solver.into(),
        config: plan.resolved.clone(),
    };
    let rendered = render_manifest(&manifest)?;
    files.insert("manifest.toml".into(), rendered);
    Ok(RunOutput { manifest, files })
}

/// Serialize a manifest as TOML.
pub fn render_manifest(manifest: &RunManifest) -> Result<String, CliError> {
    toml::to_string(manifest).map_err(|e| CliError::Output(format!("manifest: {e}")))
}

/// Write every file into `dir` through a temporary file and a rename.
pub fn write_outputs(dir: &Path, files: &Outputs) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let pid = std::process::id();
    let mut staged = Vec::with_capacity(files.len());
    for (name, content) in files {
        let tmp = dir.join(format!(".{name}.{pid}.tmp"));
        if let Err(e) = fs::write(&tmp, content) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(CliError::Output(format!("{}: {e}", tmp.display())));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in &staged {
        fs::rename(tmp, dest).map_err(|e| CliError::Output(format!("{}: {e}", dest.display())))?;
    }
    Ok(())
}

/// Resolve, execute and write: the whole `uncertal` invocation.
pub fn run(args: &Args) -> Result<RunOutput, CliError> {
    let cwd = std::env::current_dir().map_err(|e| CliError::Config(e.to_string()))?;
    let (file, checksums, base) = match &args.config {
        Some(path) => {
            let (file, checksums) = read_config(path)?;
            let base = absolutize(&cwd, path)
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or(cwd.clone());
            (file, checksums, base)
        }
        None => (ConfigFile::default(), None, cwd),
    };
    let plan = resolve(&file, args, &base)?;
    let threads = threads_from_env()?;
    let output = execute(&plan, threads, checksums.as_ref())?;
    write_outputs(&plan.out, &output.files)?;
    Ok(output)
}

/// Entry point of the binary: parse `argv`, run, and map the outcome to an
/// exit status (0 ok, 2 configuration, 3 data, 4 numerical failure).
pub fn main_with_args<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&args) {
        Ok(out) => {
            log::info!(
                "{} run finished in {:.1}s; outputs in {}",
                out.manifest.mode,
                out.manifest.wall_clock_seconds,
                args.out
                    .clone()
                    .or(out.manifest.config.out.clone())
                    .unwrap_or_default()
                    .display()
            );
            0
        }
        Err(e) => {
            eprintln!("uncertal: {e}");
            e.exit_code()
        }
    }
}
