//! Query strategies.
//!
//! Retraining-based strategies score every pool candidate `x` under each
//! hypothesized label `y` by refitting on `L ∪ {(x, y)}` and evaluating a
//! criterion `V(x, y)`. The per-label values are then collapsed with the
//! current posterior `P_L(y|x)` by one of four aggregation modes, and the
//! candidate with the smallest aggregated score is queried.
//!
//! | name        | criterion | aggregation          | regularizer in V |
//! |-------------|-----------|----------------------|------------------|
//! | `eer`       | entropy   | average              | -                |
//! | `ueer`      | entropy   | uncertainty-weighted | -                |
//! | `eer-worst` | entropy   | worst                | -                |
//! | `mli`       | loss      | worst                | yes              |
//! | `umli`      | loss      | uncertainty-weighted | no               |
//! | `mli-avg`   | loss      | average              | yes              |

use std::fmt;
use std::iter;

use rand::Rng as _;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::{Dataset, PoolState, Rng};
use crate::model::{
    binary_entropy, objective_value, objective_value_unchecked, posterior, Label, Model,
    ModelError, Posterior, RetrainContext, Sample, TrainConfig,
};

/// Scores are compared after rounding to this grid; ties go to the
/// smallest pool index.
pub const TIE_RESOLUTION: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("the unlabeled pool is empty")]
    EmptyPool,
    #[error("invalid strategy: {0}")]
    InvalidSpec(String),
    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),
    #[error("non-finite score for pool index {0}")]
    NonFiniteScore(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    None,
    /// Summed posterior entropy over the remaining pool after refitting.
    EerLogLoss,
    /// Training objective on `L ∪ {(x, y)}` after refitting.
    Mli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregation {
    /// `sum_y P(y|x) V(x, y)`
    Average,
    /// `max_y V(x, y)`
    Worst,
    /// `min_y V(x, y)`
    Best,
    /// `max_y P(y|x) V(x, y)`
    UncertaintyWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SelectorKind {
    Random,
    Uncertainty,
    Retraining,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StrategySpec {
    pub criterion: Criterion,
    pub aggregation: Aggregation,
    /// Add `||w||^2 / (2 lambda)` to the MLI criterion.
    pub include_regularizer: bool,
    pub selector_kind: SelectorKind,
    /// Keep the candidate itself in the EER entropy sum.
    pub eer_include_candidate: bool,
}

/// Names accepted by [`StrategySpec::from_name`].
pub const STRATEGY_NAMES: [&str; 8] = [
    "random",
    "uncertainty",
    "eer",
    "ueer",
    "eer-worst",
    "mli",
    "umli",
    "mli-avg",
];

impl StrategySpec {
    const fn retraining(
        criterion: Criterion,
        aggregation: Aggregation,
        include_regularizer: bool,
    ) -> Self {
        Self {
            criterion,
            aggregation,
            include_regularizer,
            selector_kind: SelectorKind::Retraining,
            eer_include_candidate: false,
        }
    }

    pub const RANDOM: Self = Self {
        criterion: Criterion::None,
        aggregation: Aggregation::Average,
        include_regularizer: false,
        selector_kind: SelectorKind::Random,
        eer_include_candidate: false,
    };
    pub const UNCERTAINTY: Self = Self {
        selector_kind: SelectorKind::Uncertainty,
        ..Self::RANDOM
    };
    pub const EER: Self = Self::retraining(Criterion::EerLogLoss, Aggregation::Average, false);
    pub const UEER: Self = Self::retraining(
        Criterion::EerLogLoss,
        Aggregation::UncertaintyWeighted,
        false,
    );
    pub const EER_WORST: Self = Self::retraining(Criterion::EerLogLoss, Aggregation::Worst, false);
    pub const MLI: Self = Self::retraining(Criterion::Mli, Aggregation::Worst, true);
    pub const UMLI: Self =
        Self::retraining(Criterion::Mli, Aggregation::UncertaintyWeighted, false);
    pub const MLI_AVG: Self = Self::retraining(Criterion::Mli, Aggregation::Average, true);

    pub fn from_name(name: &str) -> Result<Self, StrategyError> {
        Ok(match name {
            "random" => Self::RANDOM,
            "uncertainty" => Self::UNCERTAINTY,
            "eer" => Self::EER,
            "ueer" => Self::UEER,
            "eer-worst" => Self::EER_WORST,
            "mli" => Self::MLI,
            "umli" => Self::UMLI,
            "mli-avg" => Self::MLI_AVG,
            other => return Err(StrategyError::UnknownStrategy(other.to_string())),
        })
    }

    /// Canonical name, if this spec is one of the named strategies.
    pub fn canonical_name(&self) -> Option<&'static str> {
        STRATEGY_NAMES
            .iter()
            .copied()
            .find(|n| Self::from_name(n).ok().as_ref() == Some(self))
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let retraining = self.selector_kind == SelectorKind::Retraining;
        let has_criterion = self.criterion != Criterion::None;
        if retraining != has_criterion {
            return Err(StrategyError::InvalidSpec(format!(
                "selector {:?} is incompatible with criterion {:?}",
                self.selector_kind, self.criterion
            )));
        }
        Ok(())
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.canonical_name() {
            Some(n) => f.write_str(n),
            None => write!(
                f,
                "{:?}/{:?}/reg={}/{:?}",
                self.criterion, self.aggregation, self.include_regularizer, self.selector_kind
            ),
        }
    }
}

/// One row of the score table. Per-label arrays follow [`Label::ALL`].
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub pool_index: usize,
    pub per_label_v: [f64; 2],
    pub per_label_posterior: [f64; 2],
    pub aggregated: f64,
}

/// Solver bookkeeping for the refits behind a score table.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    pub retrains: u64,
    pub non_converged: u64,
    pub max_grad_inf_norm: f64,
}

impl SolverStats {
    pub fn merge(&mut self, other: &SolverStats) {
        self.retrains += other.retrains;
        self.non_converged += other.non_converged;
        self.max_grad_inf_norm = self.max_grad_inf_norm.max(other.max_grad_inf_norm);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<CandidateScore>,
    pub stats: SolverStats,
}

/// Collapse per-label criterion values with the posterior.
pub fn aggregate(posteriors: [f64; 2], v: [f64; 2], mode: Aggregation) -> f64 {
    match mode {
        Aggregation::Average => posteriors[0] * v[0] + posteriors[1] * v[1],
        Aggregation::Worst => v[0].max(v[1]),
        Aggregation::Best => v[0].min(v[1]),
        Aggregation::UncertaintyWeighted => (posteriors[0] * v[0]).max(posteriors[1] * v[1]),
    }
}

/// Summed binary entropy of `model` over the unlabeled pool, leaving out
/// `candidate` unless `include_candidate`.
pub fn v_eer(
    pool: &PoolState,
    model: &Model,
    candidate: usize,
    data: &Dataset,
    include_candidate: bool,
) -> Result<f64, ModelError> {
    if data.dim() != model.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: model.dim(),
            found: data.dim(),
        });
    }
    Ok(pool_entropy(
        pool.unlabeled(),
        model,
        candidate,
        data,
        include_candidate,
    ))
}

fn pool_entropy(
    unlabeled: &[usize],
    model: &Model,
    candidate: usize,
    data: &Dataset,
    include_candidate: bool,
) -> f64 {
    unlabeled
        .iter()
        .filter(|&&i| include_candidate || i != candidate)
        .map(|&i| binary_entropy(model.prob_pos_unchecked(data.row(i))))
        .sum()
}

/// Training loss of `model` on `lplus`, with or without the regularizer.
pub fn v_mli(
    model: &Model,
    lplus: &[Sample<'_>],
    include_regularizer: bool,
) -> Result<f64, ModelError> {
    objective_value(model, lplus, include_regularizer)
}

/// Base-model posteriors for every pool index.
pub fn pool_posteriors(
    pool: &PoolState,
    data: &Dataset,
    base_model: &Model,
) -> Result<Vec<Posterior>, ModelError> {
    pool.unlabeled()
        .iter()
        .map(|&i| posterior(base_model, data.row(i)))
        .collect()
}

/// Score `pool_indices` with an arbitrary criterion `v(position, label)`,
/// where `position` indexes `pool_indices`.
pub fn score_candidates<F>(
    pool_indices: &[usize],
    posteriors: &[Posterior],
    mode: Aggregation,
    v: F,
) -> Vec<CandidateScore>
where
    F: Fn(usize, Label) -> f64 + Sync,
{
    (0..pool_indices.len())
        .into_par_iter()
        .map(|k| {
            let p = posteriors[k].as_array();
            let per_label_v = [v(k, Label::Pos), v(k, Label::Neg)];
            CandidateScore {
                pool_index: pool_indices[k],
                per_label_v,
                per_label_posterior: p,
                aggregated: aggregate(p, per_label_v, mode),
            }
        })
        .collect()
}

#[inline]
fn rounded(score: f64) -> f64 {
    (score / TIE_RESOLUTION).round()
}

/// Pool index with the smallest aggregated score; ties after rounding to
/// [`TIE_RESOLUTION`] go to the smallest pool index.
pub fn argmin(rows: &[CandidateScore]) -> Result<usize, StrategyError> {
    let mut best: Option<(f64, usize)> = None;
    for r in rows {
        if !r.aggregated.is_finite() {
            return Err(StrategyError::NonFiniteScore(r.pool_index));
        }
        let key = rounded(r.aggregated);
        best = match best {
            Some((k, i)) if k < key || (k == key && i < r.pool_index) => Some((k, i)),
            _ => Some((key, r.pool_index)),
        };
    }
    best.map(|(_, i)| i).ok_or(StrategyError::EmptyPool)
}

/// Full score table for the current pool.
///
/// Uncertainty sampling reports `V = 1` for both labels and aggregates with
/// the uncertainty-weighted rule, i.e. `max_y P(y|x)`. Random sampling
/// reports all-zero scores.
pub fn score_table(
    spec: &StrategySpec,
    pool: &PoolState,
    data: &Dataset,
    base_model: &Model,
    train_cfg: &TrainConfig,
) -> Result<ScoreTable, StrategyError> {
    spec.validate()?;
    if pool.unlabeled().is_empty() {
        return Err(StrategyError::EmptyPool);
    }
    if base_model.dim() != data.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: data.dim(),
            found: base_model.dim(),
        }
        .into());
    }
    let unlabeled = pool.unlabeled();
    let posts = pool_posteriors(pool, data, base_model)?;
    match spec.selector_kind {
        SelectorKind::Random => Ok(ScoreTable {
            rows: score_candidates(unlabeled, &posts, Aggregation::Average, |_, _| 0.0),
            stats: SolverStats::default(),
        }),
        SelectorKind::Uncertainty => Ok(ScoreTable {
            rows: score_candidates(
                unlabeled,
                &posts,
                Aggregation::UncertaintyWeighted,
                |_, _| 1.0,
            ),
            stats: SolverStats::default(),
        }),
        SelectorKind::Retraining => {
            retraining_table(spec, pool, data, base_model, train_cfg, &posts)
        }
    }
}

/// [`score_table`] without the solver statistics.
pub fn score_all(
    spec: &StrategySpec,
    pool: &PoolState,
    data: &Dataset,
    base_model: &Model,
    train_cfg: &TrainConfig,
) -> Result<Vec<CandidateScore>, StrategyError> {
    score_table(spec, pool, data, base_model, train_cfg).map(|t| t.rows)
}

fn retraining_table(
    spec: &StrategySpec,
    pool: &PoolState,
    data: &Dataset,
    base_model: &Model,
    train_cfg: &TrainConfig,
    posts: &[Posterior],
) -> Result<ScoreTable, StrategyError> {
    let labeled: Vec<Sample<'_>> = pool.labeled().iter().map(|&i| data.sample(i)).collect();
    let ctx = RetrainContext::new(&labeled, base_model, train_cfg)?;
    let unlabeled = pool.unlabeled();

    let per_candidate: Vec<(CandidateScore, SolverStats)> = (0..unlabeled.len())
        .into_par_iter()
        .map(|k| {
            let idx = unlabeled[k];
            let x = data.row(idx);
            let mut stats = SolverStats::default();
            let mut v = [0.0; 2];
            for y in Label::ALL {
                let fit = ctx.retrain(x, y);
                stats.retrains += 1;
                stats.non_converged += u64::from(!fit.converged);
                stats.max_grad_inf_norm = stats.max_grad_inf_norm.max(fit.grad_inf_norm);
                v[y.index()] = match spec.criterion {
                    Criterion::EerLogLoss => {
                        pool_entropy(unlabeled, &fit.model, idx, data, spec.eer_include_candidate)
                    }
                    Criterion::Mli => objective_value_unchecked(
                        &fit.model,
                        labeled.iter().copied().chain(iter::once(Sample::new(x, y))),
                        spec.include_regularizer,
                    ),
                    Criterion::None => unreachable!("validated"),
                };
            }
            let p = posts[k].as_array();
            let row = CandidateScore {
                pool_index: idx,
                per_label_v: v,
                per_label_posterior: p,
                aggregated: aggregate(p, v, spec.aggregation),
            };
            (row, stats)
        })
        .collect();

    let mut stats = SolverStats::default();
    let mut rows = Vec::with_capacity(per_candidate.len());
    for (row, s) in per_candidate {
        stats.merge(&s);
        rows.push(row);
    }
    Ok(ScoreTable { rows, stats })
}

/// Outcome of one selection round.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub pool_index: usize,
    /// Absent for random sampling.
    pub table: Option<ScoreTable>,
}

/// Choose the next query from the unlabeled pool.
pub fn select(
    spec: &StrategySpec,
    pool: &PoolState,
    data: &Dataset,
    base_model: &Model,
    rng: &mut Rng,
    train_cfg: &TrainConfig,
) -> Result<usize, StrategyError> {
    select_traced(spec, pool, data, base_model, rng, train_cfg).map(|s| s.pool_index)
}

/// [`select`], also returning the score table it was based on.
pub fn select_traced(
    spec: &StrategySpec,
    pool: &PoolState,
    data: &Dataset,
    base_model: &Model,
    rng: &mut Rng,
    train_cfg: &TrainConfig,
) -> Result<Selection, StrategyError> {
    spec.validate()?;
    let unlabeled = pool.unlabeled();
    if unlabeled.is_empty() {
        return Err(StrategyError::EmptyPool);
    }
    if spec.selector_kind == SelectorKind::Random {
        let k = rng.random_range(0..unlabeled.len() as u64) as usize;
        return Ok(Selection {
            pool_index: unlabeled[k],
            table: None,
        });
    }
    let table = score_table(spec, pool, data, base_model, train_cfg)?;
    let pool_index = argmin(&table.rows)?;
    Ok(Selection {
        pool_index,
        table: Some(table),
    })
}
