//! Dense symmetric positive-definite solves for the Newton steps.

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor the row-major `n x n` matrix `a`. Only the lower triangle is read.
    pub(crate) fn factor(a: &[f64], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            let (done, rest) = l.split_at_mut(i * n);
            let row_i = &mut rest[..n];
            for j in 0..=i {
                let row_j = if j == i {
                    &row_i[..j]
                } else {
                    &done[j * n..j * n + j]
                };
                let s = a[i * n + j] - dot(&row_i[..j], row_j);
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    row_i[i] = s.sqrt();
                } else {
                    row_i[j] = s / done[j * n + j];
                }
            }
        }
        Some(Self { n, l })
    }

    /// Cheap condition-number estimate from the factor's diagonal.
    pub(crate) fn condition_estimate(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.n {
            let d = self.l[i * self.n + i];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (hi / lo).powi(2)
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        // Forward substitution with L, row by row.
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            y[i] = (y[i] - dot(row, &y[..i])) / self.l[i * n + i];
        }
        // Back substitution with L^T, consuming L row by row so the
        // accesses stay contiguous.
        for i in (0..n).rev() {
            let row = &self.l[i * n..i * n + i];
            y[i] /= self.l[i * n + i];
            let yi = y[i];
            for (yk, lik) in y[..i].iter_mut().zip(row) {
                *yk -= lik * yi;
            }
        }
        y
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let chol = Cholesky::factor(&a, 3).unwrap();
        let x = chol.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        assert!(Cholesky::factor(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}
