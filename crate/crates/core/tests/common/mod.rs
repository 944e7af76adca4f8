//! Independent reference implementations used as test oracles.
//!
//! Everything here is deliberately naive: cold-start Newton with Gaussian
//! elimination, direct loops over the pool, no caching and no parallelism.
//! Only the split/seed draw and the training-split standardization are taken
//! from the library (they are tested on their own), so that the oracle and
//! the library see the same numbers.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng as _;
use uncertal::data::{standardize, Dataset, Rng};
use uncertal::experiment::{trial_pool, ExperimentConfig};
use uncertal::model::Label;
use uncertal::strategies::{Aggregation, Criterion, SelectorKind, StrategySpec};

pub const CLAMP: f64 = 1e-12;

pub fn sigma(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `w . (x, 1)`.
pub fn score(w: &[f64], x: &[f64]) -> f64 {
    let mut s = w[w.len() - 1];
    for j in 0..x.len() {
        s += w[j] * x[j];
    }
    s
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularized objective, straightforward summation.
pub fn objective(w: &[f64], xs: &[Vec<f64>], ys: &[f64], lambda: f64, regularize: bool) -> f64 {
    let mut f = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        f += softplus(-y * score(w, x));
    }
    if regularize {
        f += w.iter().map(|v| v * v).sum::<f64>() / (2.0 * lambda);
    }
    f
}

fn grad_hess(w: &[f64], xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = w.len();
    let mut g: Vec<f64> = w.iter().map(|v| v / lambda).collect();
    let mut h = vec![vec![0.0; n]; n];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0 / lambda;
    }
    for (x, y) in xs.iter().zip(ys) {
        let mut xt = x.clone();
        xt.push(1.0);
        let p = sigma(score(w, x));
        // d/dw log(1 + exp(-y w.x)) = -y (1 - sigma(y w.x)) x
        let c = -y * sigma(-y * score(w, x));
        for j in 0..n {
            g[j] += c * xt[j];
            for k in 0..n {
                h[j][k] += p * (1.0 - p) * xt[j] * xt[k];
            }
        }
    }
    (g, h)
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    x
}

/// Cold-start damped Newton to a tight tolerance.
pub fn fit(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> Vec<f64> {
    let n = xs[0].len() + 1;
    let mut w = vec![0.0; n];
    for _ in 0..500 {
        let (g, h) = grad_hess(&w, xs, ys, lambda);
        if g.iter().all(|v| v.abs() <= 1e-12) {
            break;
        }
        let step = gauss_solve(h, g.iter().map(|v| -v).collect());
        let f0 = objective(&w, xs, ys, lambda, true);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            if objective(&trial, xs, ys, lambda, true) <= f0 {
                w = trial;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    w
}

pub fn entropy(p: f64) -> f64 {
    let p = p.clamp(CLAMP, 1.0 - CLAMP);
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

/// Combine per-label values `v = [v(+1), v(-1)]` with posteriors `p`.
pub fn combine(p: [f64; 2], v: [f64; 2], mode: Aggregation) -> f64 {
    match mode {
        Aggregation::Average => p[0] * v[0] + p[1] * v[1],
        Aggregation::Worst => {
            if v[0] >= v[1] {
                v[0]
            } else {
                v[1]
            }
        }
        Aggregation::Best => {
            if v[0] <= v[1] {
                v[0]
            } else {
                v[1]
            }
        }
        Aggregation::UncertaintyWeighted => {
            let a = p[0] * v[0];
            let b = p[1] * v[1];
            if a >= b {
                a
            } else {
                b
            }
        }
    }
}

/// Index of the smallest score after rounding to 1e-9; earliest index on ties.
pub fn pick(candidates: &[(usize, f64)]) -> usize {
    let mut best = candidates[0];
    for &(i, s) in &candidates[1..] {
        let (bi, bs) = best;
        let (r, br) = ((s / 1e-9).round(), (bs / 1e-9).round());
        if r < br || (r == br && i < bi) {
            best = (i, s);
        }
    }
    best.0
}

fn row(ds: &Dataset, i: usize) -> Vec<f64> {
    ds.row(i).to_vec()
}

fn y_of(ds: &Dataset, i: usize) -> f64 {
    if ds.label(i) == Label::Pos {
        1.0
    } else {
        -1.0
    }
}

/// Scores of every unlabeled index for a deterministic strategy, by
/// exhaustive cold-start retraining.
pub fn score_pool(
    spec: &StrategySpec,
    data: &Dataset,
    labeled: &[usize],
    unlabeled: &[usize],
    lambda: f64,
) -> Vec<(usize, f64)> {
    let xs: Vec<Vec<f64>> = labeled.iter().map(|&i| row(data, i)).collect();
    let ys: Vec<f64> = labeled.iter().map(|&i| y_of(data, i)).collect();
    let base = fit(&xs, &ys, lambda);
    unlabeled
        .iter()
        .map(|&c| {
            let pp = sigma(score(&base, data.row(c)));
            let p = [pp, 1.0 - pp];
            let s = match spec.selector_kind {
                SelectorKind::Uncertainty => {
                    combine(p, [1.0, 1.0], Aggregation::UncertaintyWeighted)
                }
                SelectorKind::Retraining => {
                    let mut v = [0.0; 2];
                    for (k, y) in [1.0, -1.0].into_iter().enumerate() {
                        let mut xs2 = xs.clone();
                        let mut ys2 = ys.clone();
                        xs2.push(row(data, c));
                        ys2.push(y);
                        let w = fit(&xs2, &ys2, lambda);
                        v[k] = match spec.criterion {
                            Criterion::EerLogLoss => unlabeled
                                .iter()
                                .filter(|&&u| spec.eer_include_candidate || u != c)
                                .map(|&u| entropy(sigma(score(&w, data.row(u)))))
                                .sum(),
                            Criterion::Mli => {
                                objective(&w, &xs2, &ys2, lambda, spec.include_regularizer)
                            }
                            Criterion::None => unreachable!(),
                        };
                    }
                    combine(p, v, spec.aggregation)
                }
                SelectorKind::Random => unreachable!(),
            };
            (c, s)
        })
        .collect()
}

/// Result of the reference trial.
pub struct OracleTrial {
    pub selected: Vec<usize>,
    pub accuracies: Vec<f64>,
}

/// Reference implementation of one trial: query loop, cold-start
/// retraining for every candidate and label, test accuracy after each step.
pub fn trial(
    ds: &Dataset,
    name: &str,
    spec: &StrategySpec,
    cfg: &ExperimentConfig,
    t: usize,
) -> OracleTrial {
    let pool = trial_pool(ds, cfg, t).unwrap();
    let (_, data) = standardize(ds, pool.train());
    let mut labeled = pool.labeled().to_vec();
    let mut unlabeled = pool.unlabeled().to_vec();
    let budget = cfg.budget.resolve(unlabeled.len());
    let mut rng = Rng::stream(cfg.base_seed, &["select", ds.name(), name, &t.to_string()]);
    let accuracy = |labeled: &[usize]| {
        let xs: Vec<Vec<f64>> = labeled.iter().map(|&i| row(&data, i)).collect();
        let ys: Vec<f64> = labeled.iter().map(|&i| y_of(&data, i)).collect();
        let w = fit(&xs, &ys, cfg.lambda);
        let correct = pool
            .test()
            .iter()
            .filter(|&&i| {
                let predicted = if sigma(score(&w, data.row(i))) >= 0.5 {
                    1.0
                } else {
                    -1.0
                };
                predicted == y_of(&data, i)
            })
            .count();
        correct as f64 / pool.test().len() as f64
    };
    let mut accuracies = vec![accuracy(&labeled)];
    let mut selected = Vec::new();
    for _ in 0..budget {
        let chosen = if spec.selector_kind == SelectorKind::Random {
            unlabeled[rng.random_range(0..unlabeled.len() as u64) as usize]
        } else {
            pick(&score_pool(spec, &data, &labeled, &unlabeled, cfg.lambda))
        };
        unlabeled.retain(|&u| u != chosen);
        labeled.push(chosen);
        selected.push(chosen);
        accuracies.push(accuracy(&labeled));
    }
    OracleTrial {
        selected,
        accuracies,
    }
}

/// A random small dataset: `n` points in `dim` dimensions with at least two
/// instances per class.
pub fn random_dataset(rng: &mut impl rand::Rng, name: &str, n: usize, dim: usize) -> Dataset {
    loop {
        let features: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let labels: Vec<Label> = (0..n)
            .map(|i| {
                // noisy linear concept so both separable and overlapping
                // configurations occur
                let s: f64 = features[i * dim..(i + 1) * dim].iter().sum::<f64>()
                    + rng.random_range(-1.5..1.5);
                if s >= 0.0 {
                    Label::Pos
                } else {
                    Label::Neg
                }
            })
            .collect();
        let pos = labels.iter().filter(|&&l| l == Label::Pos).count();
        if pos >= 2 && n - pos >= 2 {
            return Dataset::new(name, features, dim, labels).unwrap();
        }
    }
}
