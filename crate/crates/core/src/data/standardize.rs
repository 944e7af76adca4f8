use super::Dataset;

/// Per-feature affine map `(x - mean) / std`, fitted on training rows.
/// Constant features map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    /// Fit on `rows` of `ds` (population standard deviation).
    pub fn fit(ds: &Dataset, rows: &[usize]) -> Self {
        assert!(!rows.is_empty(), "standardization needs at least one row");
        let d = ds.dim();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for &i in rows {
            for (m, v) in mean.iter_mut().zip(ds.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for &i in rows {
            for ((s, v), m) in var.iter_mut().zip(ds.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd <= 1e-12 * m.abs().max(1.0) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Zero marks a constant feature.
    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn transform_row(&self, x: &[f64], out: &mut Vec<f64>) {
        out.extend(x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| {
            if *s == 0.0 {
                0.0
            } else {
                (v - m) / s
            }
        }));
    }

    /// Transform every row of `ds`.
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut features = Vec::with_capacity(ds.features().len());
        for i in 0..ds.len() {
            self.transform_row(ds.row(i), &mut features);
        }
        Dataset {
            features,
            ..ds.clone()
        }
    }
}

/// Fit on `train_rows` and transform the whole dataset with those statistics.
pub fn standardize(ds: &Dataset, train_rows: &[usize]) -> (Standardizer, Dataset) {
    let s = Standardizer::fit(ds, train_rows);
    let out = s.apply(ds);
    (s, out)
}
