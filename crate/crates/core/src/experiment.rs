//! The simulated-oracle benchmark: repeated trials, learning curves, ALC,
//! paired t-tests and the per-dataset comparison table.
//!
//! Trial `t` on dataset `D` draws its train/test split and seed set from a
//! stream keyed only by `(seed, D, t)`, so every strategy sees the same
//! split and the per-trial ALCs of two strategies form valid pairs.

use std::collections::HashMap;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::data::{split_and_seed, standardize, DataError, Dataset, PoolState, Rng};
use crate::model::{train, Label, Model, ModelError, Sample, TrainConfig};
use crate::strategies::{select_traced, ScoreTable, SolverStats, StrategyError, StrategySpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("missing results for dataset '{dataset}', strategy '{strategy}': {detail}")]
    MissingCell {
        dataset: String,
        strategy: String,
        detail: String,
    },
    #[error("pool invariant violated: {0}")]
    Invariant(String),
    #[error("sample lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("paired t-test needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

/// Number of queries per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// `min(100, |U0|)`.
    Default,
    /// Label the whole pool.
    Full,
    /// Clipped to `|U0|` with a warning.
    Fixed(usize),
}

impl Budget {
    pub const DEFAULT_CAP: usize = 100;

    pub fn resolve(self, pool_size: usize) -> usize {
        match self {
            Budget::Default => pool_size.min(Self::DEFAULT_CAP),
            Budget::Full => pool_size,
            Budget::Fixed(b) => {
                if b > pool_size {
                    log::warn!("budget {b} exceeds the unlabeled pool ({pool_size}); clipping");
                }
                b.min(pool_size)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub budget: Budget,
    pub lambda: f64,
    pub base_seed: u64,
    /// Two-sided significance level of the paired t-tests.
    pub significance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            budget: Budget::Default,
            lambda: 100.0,
            base_seed: 0,
            significance: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::Config("trials must be >= 1".into()));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(ExperimentError::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(ExperimentError::Config(format!(
                "significance must be in (0, 1), got {}",
                self.significance
            )));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig::with_lambda(self.lambda)
    }
}

/// Test accuracy after each query; entry 0 is the seed-set model.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub accuracies: Vec<f64>,
}

/// A strategy under a display name.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedStrategy {
    pub name: String,
    pub spec: StrategySpec,
}

impl NamedStrategy {
    pub fn from_name(name: &str) -> Result<Self, StrategyError> {
        Ok(Self {
            name: name.to_string(),
            spec: StrategySpec::from_name(name)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub dataset: String,
    pub strategy: String,
    pub trial: usize,
    pub curve: LearningCurve,
    pub alc: f64,
    pub selected_indices: Vec<usize>,
    pub solver: SolverStats,
}

/// One query step, as seen by a trial observer.
pub struct StepEvent<'a> {
    /// 1-based query number.
    pub step: usize,
    pub pool_index: usize,
    /// Pool state before the query.
    pub pool: &'a PoolState,
    /// The model trained on `L` before the query.
    pub base_model: &'a Model,
    /// Standardized data the strategy saw.
    pub data: &'a Dataset,
    pub table: Option<&'a ScoreTable>,
}

/// Mean of the curve: the area under a unit-spaced learning curve divided
/// by its number of points.
pub fn alc(curve: &LearningCurve) -> f64 {
    assert!(!curve.accuracies.is_empty(), "ALC of an empty curve");
    curve.accuracies.iter().sum::<f64>() / curve.accuracies.len() as f64
}

fn labeled_samples<'d>(data: &'d Dataset, pool: &PoolState) -> Vec<Sample<'d>> {
    pool.labeled().iter().map(|&i| data.sample(i)).collect()
}

/// Fraction of `rows` whose predicted label (`+1` iff `P(+1|x) >= 0.5`) is correct.
pub fn accuracy(model: &Model, data: &Dataset, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let correct = rows
        .iter()
        .filter(|&&i| {
            let predicted = if model.prob_pos_unchecked(data.row(i)) >= 0.5 {
                Label::Pos
            } else {
                Label::Neg
            };
            predicted == data.label(i)
        })
        .count();
    correct as f64 / rows.len() as f64
}

/// Initial pool for trial `trial` of `ds`, shared by all strategies.
pub fn trial_pool(
    ds: &Dataset,
    cfg: &ExperimentConfig,
    trial: usize,
) -> Result<PoolState, DataError> {
    let trial_key = trial.to_string();
    let mut rng = Rng::stream(cfg.base_seed, &["split", ds.name(), &trial_key]);
    split_and_seed(ds, &mut rng)
}

/// Run one trial of one strategy.
pub fn run_trial(
    ds: &Dataset,
    strategy: &NamedStrategy,
    cfg: &ExperimentConfig,
    trial: usize,
) -> Result<TrialResult, ExperimentError> {
    run_trial_observed(ds, strategy, cfg, trial, |_| {})
}

/// [`run_trial`], calling `observer` before each query is applied.
pub fn run_trial_observed<F>(
    ds: &Dataset,
    strategy: &NamedStrategy,
    cfg: &ExperimentConfig,
    trial: usize,
    mut observer: F,
) -> Result<TrialResult, ExperimentError>
where
    F: FnMut(&StepEvent<'_>),
{
    cfg.validate()?;
    strategy.spec.validate()?;
    let mut pool = trial_pool(ds, cfg, trial)?;
    let (_, data) = standardize(ds, pool.train());
    let budget = cfg.budget.resolve(pool.unlabeled().len());
    let trial_key = trial.to_string();
    let mut rng = Rng::stream(
        cfg.base_seed,
        &["select", ds.name(), &strategy.name, &trial_key],
    );
    let mut train_cfg = cfg.train_config();
    let mut solver = SolverStats::default();

    let mut fit_base = |pool: &PoolState,
                        warm: Option<Model>,
                        solver: &mut SolverStats|
     -> Result<Model, ExperimentError> {
        train_cfg.warm_start = warm;
        let fit = train(&labeled_samples(&data, pool), &train_cfg)?;
        solver.retrains += 1;
        solver.non_converged += u64::from(!fit.converged);
        solver.max_grad_inf_norm = solver.max_grad_inf_norm.max(fit.grad_inf_norm);
        Ok(fit.model)
    };

    let mut model = fit_base(&pool, None, &mut solver)?;
    let mut accuracies = Vec::with_capacity(budget + 1);
    accuracies.push(accuracy(&model, &data, pool.test()));
    let mut selected = Vec::with_capacity(budget);
    let query_cfg = cfg.train_config();
    for step in 1..=budget {
        let selection = select_traced(&strategy.spec, &pool, &data, &model, &mut rng, &query_cfg)?;
        if let Some(t) = &selection.table {
            solver.merge(&t.stats);
        }
        observer(&StepEvent {
            step,
            pool_index: selection.pool_index,
            pool: &pool,
            base_model: &model,
            data: &data,
            table: selection.table.as_ref(),
        });
        pool.query(selection.pool_index)?;
        pool.check_invariants(ds.len())
            .map_err(ExperimentError::Invariant)?;
        selected.push(selection.pool_index);
        model = fit_base(&pool, Some(model), &mut solver)?;
        accuracies.push(accuracy(&model, &data, pool.test()));
    }
    let curve = LearningCurve { accuracies };
    Ok(TrialResult {
        dataset: ds.name().to_string(),
        strategy: strategy.name.clone(),
        trial,
        alc: alc(&curve),
        curve,
        selected_indices: selected,
        solver,
    })
}

/// Every (dataset, strategy, trial) combination, in that nesting order.
pub fn run_experiment(
    datasets: &[Dataset],
    strategies: &[NamedStrategy],
    cfg: &ExperimentConfig,
) -> Result<Vec<TrialResult>, ExperimentError> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = (0..datasets.len())
        .flat_map(|d| {
            (0..strategies.len()).flat_map(move |s| (0..cfg.trials).map(move |t| (d, s, t)))
        })
        .collect();
    jobs.into_par_iter()
        .map(|(d, s, t)| run_trial(&datasets[d], &strategies[s], cfg, t))
        .collect()
}

/// Outcome of a paired comparison, from the first sample's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Win,
    Tie,
    Loss,
}

/// Two-sided Student-t critical value `t_{1 - alpha/2, df}`.
pub fn t_critical(alpha: f64, df: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    dist.inverse_cdf(1.0 - alpha / 2.0)
}

/// Paired t statistic of `d = a - b`, or `None` when the differences have
/// zero variance.
pub fn paired_t_statistic(a: &[f64], b: &[f64]) -> Option<f64> {
    let k = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / k;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    if var == 0.0 {
        None
    } else {
        Some(mean / (var / k).sqrt())
    }
}

/// Two-sided paired t-test at level `alpha`: `Win` when `a` is
/// significantly larger, `Loss` when significantly smaller.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<Decision, ExperimentError> {
    if a.len() != b.len() {
        return Err(ExperimentError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(ExperimentError::TooFewSamples(a.len()));
    }
    let mean = a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
    let by_sign = |m: f64| {
        if m > 0.0 {
            Decision::Win
        } else if m < 0.0 {
            Decision::Loss
        } else {
            Decision::Tie
        }
    };
    match paired_t_statistic(a, b) {
        None => Ok(by_sign(mean)),
        Some(t) if t.abs() > t_critical(alpha, a.len() - 1) => Ok(by_sign(mean)),
        Some(_) => Ok(Decision::Tie),
    }
}

/// Ranks with 1 for the largest value; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Pairwise comparison of a proposed strategy against a baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PairComparison {
    pub proposed: String,
    pub baseline: String,
    /// One decision per dataset, from the proposed strategy's side.
    pub decisions: Vec<Decision>,
}

impl PairComparison {
    pub fn counts(&self) -> (usize, usize, usize) {
        let count = |d| self.decisions.iter().filter(|&&x| x == d).count();
        (
            count(Decision::Win),
            count(Decision::Tie),
            count(Decision::Loss),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub datasets: Vec<String>,
    pub strategies: Vec<String>,
    /// `mean_alc[d][s]`.
    pub mean_alc: Vec<Vec<f64>>,
    /// `ranks[d][s]`, 1 = best.
    pub ranks: Vec<Vec<f64>>,
    /// Mean over datasets, per strategy.
    pub overall_mean: Vec<f64>,
    pub average_rank: Vec<f64>,
    pub comparisons: Vec<PairComparison>,
}

/// Proposed/baseline pairs compared when both strategies are present.
pub const COMPARED_PAIRS: [(&str, &str); 4] = [
    ("ueer", "eer"),
    ("umli", "mli"),
    ("ueer", "eer-worst"),
    ("umli", "mli-avg"),
];

fn first_seen<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in it {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

/// Aggregate trial results into the per-dataset comparison table.
/// Datasets and strategies keep their first-appearance order.
pub fn build_table(
    results: &[TrialResult],
    cfg: &ExperimentConfig,
) -> Result<ComparisonTable, ExperimentError> {
    let datasets = first_seen(results.iter().map(|r| r.dataset.as_str()));
    let strategies = first_seen(results.iter().map(|r| r.strategy.as_str()));
    let mut cells: HashMap<(&str, &str), Vec<Option<f64>>> = HashMap::new();
    for r in results {
        let cell = cells
            .entry((r.dataset.as_str(), r.strategy.as_str()))
            .or_insert_with(|| vec![None; cfg.trials]);
        let slot = cell
            .get_mut(r.trial)
            .ok_or_else(|| ExperimentError::MissingCell {
                dataset: r.dataset.clone(),
                strategy: r.strategy.clone(),
                detail: format!("trial {} out of range for {} trials", r.trial, cfg.trials),
            })?;
        if slot.replace(r.alc).is_some() {
            return Err(ExperimentError::MissingCell {
                dataset: r.dataset.clone(),
                strategy: r.strategy.clone(),
                detail: format!("duplicate trial {}", r.trial),
            });
        }
    }
    // alcs[d][s] = per-trial ALCs ordered by trial index
    let mut alcs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(datasets.len());
    for d in &datasets {
        let mut row = Vec::with_capacity(strategies.len());
        for s in &strategies {
            let cell = cells.get(&(d.as_str(), s.as_str())).ok_or_else(|| {
                ExperimentError::MissingCell {
                    dataset: d.clone(),
                    strategy: s.clone(),
                    detail: "no trials".into(),
                }
            })?;
            let vals = cell
                .iter()
                .enumerate()
                .map(|(t, v)| {
                    v.ok_or_else(|| ExperimentError::MissingCell {
                        dataset: d.clone(),
                        strategy: s.clone(),
                        detail: format!("trial {t} missing"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            row.push(vals);
        }
        alcs.push(row);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mean_alc: Vec<Vec<f64>> = alcs
        .iter()
        .map(|row| row.iter().map(|v| mean(v)).collect())
        .collect();
    let ranks: Vec<Vec<f64>> = mean_alc.iter().map(|row| average_ranks(row)).collect();
    let nd = datasets.len().max(1) as f64;
    let overall_mean = (0..strategies.len())
        .map(|s| mean_alc.iter().map(|row| row[s]).sum::<f64>() / nd)
        .collect();
    let average_rank = (0..strategies.len())
        .map(|s| ranks.iter().map(|row| row[s]).sum::<f64>() / nd)
        .collect();

    let position = |name: &str| strategies.iter().position(|s| s == name);
    let mut comparisons = Vec::new();
    for (proposed, baseline) in COMPARED_PAIRS {
        let (Some(p), Some(b)) = (position(proposed), position(baseline)) else {
            continue;
        };
        let decisions = if cfg.trials >= 2 {
            alcs.iter()
                .map(|row| paired_t_test(&row[p], &row[b], cfg.significance))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        comparisons.push(PairComparison {
            proposed: proposed.to_string(),
            baseline: baseline.to_string(),
            decisions,
        });
    }
    Ok(ComparisonTable {
        datasets,
        strategies,
        mean_alc,
        ranks,
        overall_mean,
        average_rank,
        comparisons,
    })
}
