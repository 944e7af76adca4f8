//! L2-regularized logistic regression.
//!
//! The model minimizes
//!
//! ```text
//! g(w) = ||w||^2 / (2 * lambda) + sum_i log(1 + exp(-y_i * w . x~_i))
//! ```
//!
//! over augmented inputs `x~ = (x, 1)`, so the last weight is the bias and it
//! is regularized together with the feature weights. Fitting uses Newton's
//! method with a backtracking line search. [`RetrainContext`] specializes the
//! solver for the "labeled set plus one hypothesized point" refits that every
//! retraining-based query strategy performs thousands of times per query.

mod linalg;

use std::collections::VecDeque;
use std::iter;

use thiserror::Error;

use linalg::Cholesky;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking
/// logs of posteriors (entropy).
pub const PROB_CLAMP: f64 = 1e-12;

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const MAX_CONDITION: f64 = 1e12;
const QN_MAX_STEPS: usize = 20;
const CHORD_MAX_STEPS: usize = 12;
const QN_MEMORY: usize = 8;
const QN_PROBE_STEPS: usize = 5;
const QN_PROBE_REDUCTION: f64 = 1e-2;
/// Up to this many weights (bias included) the plain chord iteration on the
/// base Hessian is cheaper than carrying quasi-Newton curvature pairs.
const CHORD_MAX_DIM: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    /// The label set in the fixed order used by every per-label table: `[+1, -1]`.
    pub const ALL: [Label; 2] = [Label::Pos, Label::Neg];

    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Option<Label> {
        if s == 1.0 {
            Some(Label::Pos)
        } else if s == -1.0 {
            Some(Label::Neg)
        } else {
            None
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    /// Position of this label in [`Label::ALL`].
    pub fn index(self) -> usize {
        match self {
            Label::Pos => 0,
            Label::Neg => 1,
        }
    }
}

/// One labeled instance, borrowing its feature row.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub x: &'a [f64],
    pub y: Label,
}

impl<'a> Sample<'a> {
    pub fn new(x: &'a [f64], y: Label) -> Self {
        Self { x, y }
    }
}

/// Trained weights; the last entry is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    weights: Vec<f64>,
    lambda: f64,
}

impl Model {
    pub fn new(weights: Vec<f64>, lambda: f64) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::NonFinite("weights"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(ModelError::InvalidConfig(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self { weights, lambda })
    }

    /// The all-zero model over `dim` features.
    pub fn zeros(dim: usize, lambda: f64) -> Result<Self, ModelError> {
        Self::new(vec![0.0; dim + 1], lambda)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Feature dimensionality, excluding the bias.
    pub fn dim(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn bias(&self) -> f64 {
        self.weights[self.dim()]
    }

    /// The model with every weight negated.
    pub fn negated(&self) -> Model {
        Model {
            weights: self.weights.iter().map(|w| -w).collect(),
            lambda: self.lambda,
        }
    }

    /// Linear score `w . (x, 1)` without dimension checks.
    #[inline]
    pub(crate) fn margin_unchecked(&self, x: &[f64]) -> f64 {
        margin(&self.weights, x)
    }

    /// `P(+1 | x)` without dimension checks.
    #[inline]
    pub(crate) fn prob_pos_unchecked(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin_unchecked(x))
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lambda: f64,
    /// Convergence threshold on the gradient's infinity norm.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub warm_start: Option<Model>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            grad_tol: 1e-8,
            max_iter: 200,
            warm_start: None,
        }
    }
}

impl TrainConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(ModelError::InvalidConfig(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(ModelError::InvalidConfig("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a fit. Non-convergence is reported here rather than as an error.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: Model,
    pub converged: bool,
    pub iterations: usize,
    pub grad_inf_norm: f64,
}

/// Posterior pair `(P(+1|x), P(-1|x))`, stored as `p` and `1 - p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub pos: f64,
    pub neg: f64,
}

impl Posterior {
    pub fn from_pos(p: f64) -> Self {
        Self {
            pos: p,
            neg: 1.0 - p,
        }
    }

    pub fn of(&self, y: Label) -> f64 {
        match y {
            Label::Pos => self.pos,
            Label::Neg => self.neg,
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.pos, self.neg]
    }

    pub fn max(&self) -> f64 {
        self.pos.max(self.neg)
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub fn log1p_exp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary entropy in nats with the probability clamped away from 0 and 1.
#[inline]
pub fn binary_entropy(p: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

#[inline]
fn margin(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = w[d];
    for (wi, xi) in w[..d].iter().zip(x) {
        s += wi * xi;
    }
    s
}

fn validate_samples(samples: &[Sample<'_>]) -> Result<usize, ModelError> {
    let first = samples.first().ok_or(ModelError::EmptyTrainingSet)?;
    let d = first.x.len();
    for s in samples {
        if s.x.len() != d {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                found: s.x.len(),
            });
        }
        if s.x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("features"));
        }
    }
    Ok(d)
}

fn regularizer(w: &[f64], lambda: f64) -> f64 {
    w.iter().map(|v| v * v).sum::<f64>() / (2.0 * lambda)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularized objective and its gradient in one pass.
fn objective_grad_iter<'a>(
    w: &[f64],
    lambda: f64,
    samples: impl Iterator<Item = Sample<'a>>,
) -> (f64, Vec<f64>) {
    let dim = w.len() - 1;
    let mut grad: Vec<f64> = w.iter().map(|v| v / lambda).collect();
    let mut f = regularizer(w, lambda);
    for s in samples {
        let ys = s.y.sign();
        let m = -ys * margin(w, s.x);
        f += log1p_exp(m);
        let c = -ys * sigmoid(m);
        for (g, xi) in grad[..dim].iter_mut().zip(s.x) {
            *g += c * xi;
        }
        grad[dim] += c;
    }
    (f, grad)
}

/// Lower triangle of the Hessian, row-major `D x D`.
fn hessian_iter<'a>(w: &[f64], lambda: f64, samples: impl Iterator<Item = Sample<'a>>) -> Vec<f64> {
    let n = w.len();
    let dim = n - 1;
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0 / lambda;
    }
    for s in samples {
        let p = sigmoid(margin(w, s.x));
        let c = p * (1.0 - p);
        if c == 0.0 {
            continue;
        }
        for i in 0..dim {
            let ci = c * s.x[i];
            let row = &mut h[i * n..i * n + i + 1];
            for (hij, xj) in row.iter_mut().zip(s.x) {
                *hij += ci * xj;
            }
        }
        let last = &mut h[dim * n..dim * n + n];
        for (hj, xj) in last[..dim].iter_mut().zip(s.x) {
            *hj += c * xj;
        }
        last[dim] += c;
    }
    h
}

/// Fit the model on `labeled` by Newton's method with backtracking.
pub fn train(labeled: &[Sample<'_>], config: &TrainConfig) -> Result<Fit, ModelError> {
    config.validate()?;
    let d = validate_samples(labeled)?;
    let start = match &config.warm_start {
        Some(m) => {
            if m.dim() != d {
                return Err(ModelError::DimensionMismatch {
                    expected: d,
                    found: m.dim(),
                });
            }
            m.weights.clone()
        }
        None => vec![0.0; d + 1],
    };
    Ok(newton(labeled, config, start, 0))
}

fn newton(
    labeled: &[Sample<'_>],
    config: &TrainConfig,
    mut w: Vec<f64>,
    iters_so_far: usize,
) -> Fit {
    let lambda = config.lambda;
    let n = w.len();
    let (mut f, mut g) = objective_grad_iter(&w, lambda, labeled.iter().copied());
    let mut iterations = iters_so_far;
    let mut converged = inf_norm(&g) <= config.grad_tol;
    while !converged && iterations < config.max_iter {
        iterations += 1;
        let h = hessian_iter(&w, lambda, labeled.iter().copied());
        let dir: Vec<f64> = match Cholesky::factor(&h, n) {
            Some(ch) if ch.condition_estimate() <= MAX_CONDITION => {
                ch.solve(&g).into_iter().map(|v| -v).collect()
            }
            // Gradient step scaled by the regularizer's curvature bound.
            _ => g.iter().map(|v| -v * lambda.min(1.0)).collect(),
        };
        match line_search(&w, f, &g, &dir, lambda, labeled.iter().copied()) {
            Some((w_new, f_new, g_new)) => {
                w = w_new;
                f = f_new;
                g = g_new;
            }
            None => break,
        }
        converged = inf_norm(&g) <= config.grad_tol;
    }
    let grad_inf_norm = inf_norm(&g);
    Fit {
        model: Model { weights: w, lambda },
        converged,
        iterations,
        grad_inf_norm,
    }
}

/// Backtracking (Armijo) along `dir`. Returns the accepted point with its
/// objective and gradient, or `None` when no step decreases the objective.
fn line_search<'a, I>(
    w: &[f64],
    f: f64,
    g: &[f64],
    dir: &[f64],
    lambda: f64,
    samples: I,
) -> Option<(Vec<f64>, f64, Vec<f64>)>
where
    I: Iterator<Item = Sample<'a>> + Clone,
{
    let slope = dot(g, dir);
    if !(slope < 0.0) {
        return None;
    }
    let g_norm = inf_norm(g);
    // Round-off floor on objective comparisons near the optimum.
    let slack = 1e-14 * f.abs().max(1.0);
    let mut t = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let trial: Vec<f64> = w.iter().zip(dir).map(|(a, b)| a + t * b).collect();
        let (f_new, g_new) = objective_grad_iter(&trial, lambda, samples.clone());
        let armijo = f_new <= f + ARMIJO_C * t * slope;
        let flat = f_new <= f + slack && inf_norm(&g_new) < g_norm;
        if f_new.is_finite() && (armijo || flat) {
            return Some((trial, f_new, g_new));
        }
        t *= 0.5;
    }
    None
}

/// `P(+1|x)` and `P(-1|x)` under `model`.
pub fn posterior(model: &Model, x: &[f64]) -> Result<Posterior, ModelError> {
    model.check_dim(x)?;
    Ok(Posterior::from_pos(model.prob_pos_unchecked(x)))
}

/// `sum_i -log P(y_i|x_i)`, plus `||w||^2 / (2 lambda)` when `include_regularizer`.
pub fn objective_value(
    model: &Model,
    labeled: &[Sample<'_>],
    include_regularizer: bool,
) -> Result<f64, ModelError> {
    let d = validate_samples(labeled)?;
    model.check_dim(&labeled[0].x[..d])?;
    Ok(objective_value_unchecked(
        model,
        labeled.iter().copied(),
        include_regularizer,
    ))
}

pub(crate) fn objective_value_unchecked<'a>(
    model: &Model,
    labeled: impl Iterator<Item = Sample<'a>>,
    include_regularizer: bool,
) -> f64 {
    let w = &model.weights;
    let loss: f64 = labeled
        .map(|s| log1p_exp(-s.y.sign() * margin(w, s.x)))
        .sum();
    if include_regularizer {
        loss + regularizer(w, model.lambda)
    } else {
        loss
    }
}

/// Analytic gradient of the regularized objective at `model`'s weights.
pub fn gradient(model: &Model, labeled: &[Sample<'_>]) -> Result<Vec<f64>, ModelError> {
    let d = validate_samples(labeled)?;
    model.check_dim(&labeled[0].x[..d])?;
    Ok(objective_grad_iter(&model.weights, model.lambda, labeled.iter().copied()).1)
}

/// Cached state for refitting `L ∪ {(x, y)}` from the model trained on `L`.
///
/// Each refit starts at the base weights with an exact Newton step: the
/// Hessian of `L ∪ {(x, y)}` at the base weights is the cached base Hessian
/// plus a rank-one term, applied through Sherman-Morrison. Later steps reuse
/// that matrix: unchanged for low-dimensional models (a chord iteration),
/// corrected by limited-memory BFGS updates otherwise. If that phase stalls
/// the fit hands over to full Newton from the current point, so every refit
/// ends with the same convergence guarantee as [`train`].
pub struct RetrainContext<'s, 'a> {
    labeled: &'s [Sample<'a>],
    config: TrainConfig,
    base: Vec<f64>,
    base_obj: f64,
    base_grad: Vec<f64>,
    chol: Option<Cholesky>,
}

impl<'s, 'a> RetrainContext<'s, 'a> {
    pub fn new(
        labeled: &'s [Sample<'a>],
        base: &Model,
        config: &TrainConfig,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let d = validate_samples(labeled)?;
        if base.dim() != d {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                found: base.dim(),
            });
        }
        let lambda = config.lambda;
        let w = base.weights.clone();
        let (base_obj, base_grad) = objective_grad_iter(&w, lambda, labeled.iter().copied());
        let h = hessian_iter(&w, lambda, labeled.iter().copied());
        let chol =
            Cholesky::factor(&h, w.len()).filter(|c| c.condition_estimate() <= MAX_CONDITION);
        let mut config = config.clone();
        config.warm_start = None;
        Ok(Self {
            labeled,
            config,
            base: w,
            base_obj,
            base_grad,
            chol,
        })
    }

    pub fn labeled(&self) -> &'s [Sample<'a>] {
        self.labeled
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Fit on the cached labeled set plus `(x, y)`.
    pub fn retrain(&self, x: &[f64], y: Label) -> Fit {
        debug_assert_eq!(x.len() + 1, self.base.len());
        let lambda = self.config.lambda;
        let tol = self.config.grad_tol;
        let extra = Sample::new(x, y);
        let samples = || self.labeled.iter().copied().chain(iter::once(extra));

        let mut w = self.base.clone();
        let ys = y.sign();
        let z = margin(&w, x);
        let m = -ys * z;
        let mut f = self.base_obj + log1p_exp(m);
        let c = -ys * sigmoid(m);
        let mut g = self.base_grad.clone();
        let dim = x.len();
        for (gi, xi) in g[..dim].iter_mut().zip(x) {
            *gi += c * xi;
        }
        g[dim] += c;
        let mut g_norm = inf_norm(&g);
        let g_start = g_norm;
        let mut iterations = 0;
        if g_norm <= tol {
            return Fit {
                model: Model { weights: w, lambda },
                converged: true,
                iterations,
                grad_inf_norm: g_norm,
            };
        }

        if let Some(chol) = &self.chol {
            let p = sigmoid(z);
            let s = p * (1.0 - p);
            let mut xt = x.to_vec();
            xt.push(1.0);
            let u = chol.solve(&xt);
            let denom = 1.0 + s * dot(&xt, &u);
            let apply_h0 = |v: &[f64]| -> Vec<f64> {
                let mut r = chol.solve(v);
                let k = s * dot(&u, v) / denom;
                for (ri, ui) in r.iter_mut().zip(&u) {
                    *ri -= k * ui;
                }
                r
            };
            let chord = self.base.len() <= CHORD_MAX_DIM;
            let capacity = if chord { 0 } else { QN_MEMORY };
            let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(capacity);
            let mut alphas = Vec::with_capacity(QN_MEMORY);
            for _ in 0..if chord { CHORD_MAX_STEPS } else { QN_MAX_STEPS } {
                if iterations >= self.config.max_iter {
                    break;
                }
                iterations += 1;
                // L-BFGS two-loop recursion on top of the exact base Hessian.
                let mut q = g.clone();
                alphas.clear();
                for (sk, yk, rho) in memory.iter().rev() {
                    let a = rho * dot(sk, &q);
                    for (qi, yi) in q.iter_mut().zip(yk) {
                        *qi -= a * yi;
                    }
                    alphas.push(a);
                }
                let mut r = apply_h0(&q);
                for ((sk, yk, rho), a) in memory.iter().zip(alphas.iter().rev()) {
                    let b = rho * dot(yk, &r);
                    for (ri, si) in r.iter_mut().zip(sk) {
                        *ri += (a - b) * si;
                    }
                }
                let dir: Vec<f64> = r.into_iter().map(|v| -v).collect();
                let Some((w_new, f_new, g_new)) = line_search(&w, f, &g, &dir, lambda, samples())
                else {
                    break;
                };
                let sk: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
                let yk: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&sk, &yk);
                if sy > 0.0 && capacity > 0 {
                    if memory.len() == capacity {
                        memory.pop_front();
                    }
                    memory.push_back((sk, yk, 1.0 / sy));
                }
                w = w_new;
                f = f_new;
                g = g_new;
                let prev_norm = g_norm;
                g_norm = inf_norm(&g);
                if g_norm <= tol {
                    return Fit {
                        model: Model { weights: w, lambda },
                        converged: true,
                        iterations,
                        grad_inf_norm: g_norm,
                    };
                }
                // A chord step that fails to halve the gradient means the
                // base curvature is no longer representative: hand over to
                // Newton.
                if chord && g_norm > 0.5 * prev_norm {
                    break;
                }
                if !chord && iterations >= QN_PROBE_STEPS && g_norm > QN_PROBE_REDUCTION * g_start {
                    break;
                }
            }
        }

        let all: Vec<Sample<'_>> = samples().collect();
        newton(&all, &self.config, w, iterations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(data: &[(f64, Label)]) -> Vec<[f64; 1]> {
        data.iter().map(|(x, _)| [*x]).collect()
    }

    #[test]
    fn sigmoid_at_two() {
        let m = Model::new(vec![1.0, 0.0], 100.0).unwrap();
        let p = posterior(&m, &[2.0]).unwrap();
        assert!((p.pos - 0.8807970779778823).abs() < 1e-15);
        assert_eq!(p.pos + p.neg, 1.0);
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = Model::zeros(3, 100.0).unwrap();
        let p = posterior(&m, &[1.0, -4.0, 7.5]).unwrap();
        assert_eq!(p.pos, 0.5);
        assert_eq!(p.neg, 0.5);
    }

    #[test]
    fn posterior_rejects_wrong_dim() {
        let m = Model::zeros(2, 100.0).unwrap();
        assert!(matches!(
            posterior(&m, &[1.0]),
            Err(ModelError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn symmetric_pair_has_positive_slope_and_zero_bias() {
        let data = [(1.0, Label::Pos), (-1.0, Label::Neg)];
        let xs = pts(&data);
        let samples: Vec<_> = xs
            .iter()
            .zip(&data)
            .map(|(x, (_, y))| Sample::new(x, *y))
            .collect();
        let fit = train(&samples, &TrainConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.model.weights()[0] > 0.0);
        assert!(fit.model.bias().abs() < 1e-9);
        assert!(fit.grad_inf_norm <= 1e-8);
    }

    #[test]
    fn gradient_at_zero_for_symmetric_pair() {
        let data = [(1.0, Label::Pos), (-1.0, Label::Neg)];
        let xs = pts(&data);
        let samples: Vec<_> = xs
            .iter()
            .zip(&data)
            .map(|(x, (_, y))| Sample::new(x, *y))
            .collect();
        let g = gradient(&Model::zeros(1, 100.0).unwrap(), &samples).unwrap();
        // Slope: -sum_i y_i x_i / 2 = -1; the bias terms cancel.
        assert_eq!(g, vec![-1.0, 0.0]);
    }

    #[test]
    fn objective_at_zero_is_n_ln2() {
        let xs = [[0.3, 1.0], [2.0, -1.0], [-0.5, 0.0]];
        let ys = [Label::Pos, Label::Neg, Label::Neg];
        let samples: Vec<_> = xs.iter().zip(ys).map(|(x, y)| Sample::new(x, y)).collect();
        let m = Model::zeros(2, 100.0).unwrap();
        let off = objective_value(&m, &samples, false).unwrap();
        let on = objective_value(&m, &samples, true).unwrap();
        assert!((off - 3.0 * std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(on, off);
    }

    #[test]
    fn empty_and_mismatched_inputs_error() {
        assert_eq!(
            train(&[], &TrainConfig::default()).unwrap_err(),
            ModelError::EmptyTrainingSet
        );
        let a = [1.0];
        let b = [1.0, 2.0];
        let s = [Sample::new(&a, Label::Pos), Sample::new(&b, Label::Neg)];
        assert!(matches!(
            train(&s, &TrainConfig::default()),
            Err(ModelError::DimensionMismatch { .. })
        ));
        let bad = TrainConfig {
            max_iter: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&s[..1], &bad),
            Err(ModelError::InvalidConfig(_))
        ));
    }

    #[test]
    fn max_iter_reached_is_flagged_not_fatal() {
        let xs = [[3.0], [-1.0], [0.5], [-2.0]];
        let ys = [Label::Pos, Label::Neg, Label::Neg, Label::Pos];
        let samples: Vec<_> = xs.iter().zip(ys).map(|(x, y)| Sample::new(x, y)).collect();
        let cfg = TrainConfig {
            max_iter: 1,
            grad_tol: 1e-300,
            ..TrainConfig::default()
        };
        let fit = train(&samples, &cfg).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn entropy_is_bounded_and_clamped() {
        assert!((binary_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(binary_entropy(1.0) < 1e-10);
        assert!(binary_entropy(0.0) < 1e-10);
        assert!(binary_entropy(1.0) > 0.0);
    }

    #[test]
    fn log1p_exp_is_stable() {
        assert_eq!(log1p_exp(1000.0), 1000.0);
        assert!(log1p_exp(-1000.0) >= 0.0);
        assert!((log1p_exp(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
    }

    #[test]
    fn retrain_matches_cold_fit() {
        let xs = [
            [0.2, 1.0],
            [1.5, -0.3],
            [-0.7, 0.4],
            [-1.2, -1.1],
            [0.9, 0.8],
        ];
        let ys = [Label::Pos, Label::Pos, Label::Neg, Label::Neg, Label::Neg];
        let samples: Vec<_> = xs.iter().zip(ys).map(|(x, y)| Sample::new(x, y)).collect();
        let cfg = TrainConfig::default();
        let base = train(&samples, &cfg).unwrap().model;
        let ctx = RetrainContext::new(&samples, &base, &cfg).unwrap();
        let extra = [0.1, -0.2];
        for y in Label::ALL {
            let warm = ctx.retrain(&extra, y);
            let mut all = samples.clone();
            all.push(Sample::new(&extra, y));
            let cold = train(&all, &cfg).unwrap();
            assert!(warm.converged && cold.converged);
            for (a, b) in warm.model.weights().iter().zip(cold.model.weights()) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }
}
