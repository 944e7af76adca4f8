use rand_distr::{Distribution, StandardNormal};

use super::{DataError, Dataset, Rng};
use crate::model::Label;

/// Two 2-D Gaussian blobs with a shared covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub per_class: usize,
    pub mean_pos: [f64; 2],
    pub mean_neg: [f64; 2],
    /// Row-major 2x2 covariance.
    pub covariance: [f64; 4],
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            per_class: 100,
            mean_pos: [2.0, 0.0],
            mean_neg: [-2.0, 0.0],
            covariance: [1.0, 0.0, 0.0, 1.0],
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn cholesky(&self) -> Result<[f64; 3], DataError> {
        let [a, b, c, d] = self.covariance;
        if self.covariance.iter().any(|v| !v.is_finite())
            || b != c
            || !(a > 0.0)
            || !(a * d - b * c > 0.0)
        {
            return Err(DataError::NotPositiveDefinite);
        }
        let l11 = a.sqrt();
        let l21 = b / l11;
        let l22 = (d - l21 * l21).sqrt();
        Ok([l11, l21, l22])
    }

    /// Distance from `x` to the Bayes decision boundary of the generating
    /// distribution (equal priors, shared covariance: a straight line).
    pub fn bayes_boundary_distance(&self, x: &[f64]) -> f64 {
        let [a, b, c, d] = self.covariance;
        let det = a * d - b * c;
        let inv = [d / det, -b / det, -c / det, a / det];
        let dm = [
            self.mean_pos[0] - self.mean_neg[0],
            self.mean_pos[1] - self.mean_neg[1],
        ];
        let w = [
            inv[0] * dm[0] + inv[1] * dm[1],
            inv[2] * dm[0] + inv[3] * dm[1],
        ];
        let mid = [
            0.5 * (self.mean_pos[0] + self.mean_neg[0]),
            0.5 * (self.mean_pos[1] + self.mean_neg[1]),
        ];
        let num = w[0] * (x[0] - mid[0]) + w[1] * (x[1] - mid[1]);
        num.abs() / (w[0] * w[0] + w[1] * w[1]).sqrt()
    }
}

/// Draw the blobs: `per_class` positives followed by `per_class` negatives.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset, DataError> {
    if spec.per_class == 0 {
        return Err(DataError::Synthetic("per_class must be >= 1".into()));
    }
    if spec
        .mean_pos
        .iter()
        .chain(&spec.mean_neg)
        .any(|v| !v.is_finite())
    {
        return Err(DataError::Synthetic("means must be finite".into()));
    }
    let [l11, l21, l22] = spec.cholesky()?;
    let mut rng = Rng::stream(spec.seed, &["synthetic"]);
    let n = 2 * spec.per_class;
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (label, mean) in [(Label::Pos, spec.mean_pos), (Label::Neg, spec.mean_neg)] {
        for _ in 0..spec.per_class {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            features.push(mean[0] + l11 * z1);
            features.push(mean[1] + l21 * z1 + l22 * z2);
            labels.push(label);
        }
    }
    Dataset::new("synthetic", features, 2, labels)
}
