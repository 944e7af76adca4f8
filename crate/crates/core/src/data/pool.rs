use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{DataError, Dataset, Rng};
use crate::model::Label;

const MAX_SPLIT_ATTEMPTS: usize = 10_000;

/// Train/test split plus the labeled (`L`) / unlabeled (`U`) partition of
/// the training indices.
///
/// `train`, `test` and `unlabeled` are kept sorted; `labeled` is in
/// acquisition order (the two seed indices first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    train: Vec<usize>,
    test: Vec<usize>,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

impl PoolState {
    /// Assemble a pool from explicit index sets, checking the partition
    /// invariants against a dataset of `n` instances.
    pub fn from_parts(
        mut train: Vec<usize>,
        mut test: Vec<usize>,
        labeled: Vec<usize>,
        n: usize,
    ) -> Result<Self, DataError> {
        train.sort_unstable();
        test.sort_unstable();
        let unlabeled = train
            .iter()
            .copied()
            .filter(|i| !labeled.contains(i))
            .collect();
        let pool = Self {
            train,
            test,
            labeled,
            unlabeled,
        };
        pool.check_invariants(n).map_err(DataError::Shape)?;
        Ok(pool)
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    /// Move `index` from `U` to `L`.
    pub fn query(&mut self, index: usize) -> Result<(), DataError> {
        let pos = self
            .unlabeled
            .binary_search(&index)
            .map_err(|_| DataError::NotInPool(index))?;
        self.unlabeled.remove(pos);
        self.labeled.push(index);
        Ok(())
    }

    /// Check `L ∩ U = ∅`, `L ∪ U = train`, `train ∩ test = ∅` and
    /// `train ∪ test = {0..n}`.
    pub fn check_invariants(&self, n: usize) -> Result<(), String> {
        let mut seen = vec![0u8; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n {
                return Err(format!("index {i} out of range for {n} instances"));
            }
            seen[i] += 1;
        }
        if let Some(i) = seen.iter().position(|&c| c != 1) {
            return Err(format!(
                "index {i} appears {} times across train and test",
                seen[i]
            ));
        }
        let mut in_train = vec![false; n];
        for &i in &self.train {
            in_train[i] = true;
        }
        let mut covered = vec![0u8; n];
        for &i in self.labeled.iter().chain(&self.unlabeled) {
            if !in_train[i] {
                return Err(format!("index {i} is in L or U but not in train"));
            }
            covered[i] += 1;
        }
        if let Some(&i) = self.train.iter().find(|&&i| covered[i] != 1) {
            return Err(format!(
                "train index {i} is covered {} times by L and U",
                covered[i]
            ));
        }
        Ok(())
    }
}

/// Random equal-size train/test split with a two-point seed set, one
/// instance per class, drawn from the training half.
///
/// The training half gets `ceil(n/2)` instances. Splits whose training half
/// lacks a class are redrawn.
pub fn split_and_seed(ds: &Dataset, rng: &mut Rng) -> Result<PoolState, DataError> {
    let (pos, neg) = ds.class_counts();
    if pos < 2 || neg < 2 {
        return Err(DataError::TooFewPerClass {
            name: ds.name().to_string(),
            pos,
            neg,
        });
    }
    let n = ds.len();
    let n_train = n.div_ceil(2);
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..MAX_SPLIT_ATTEMPTS {
        perm.shuffle(rng);
        let mut train = perm[..n_train].to_vec();
        train.sort_unstable();
        let positives: Vec<usize> = train
            .iter()
            .copied()
            .filter(|&i| ds.label(i) == Label::Pos)
            .collect();
        let negatives: Vec<usize> = train
            .iter()
            .copied()
            .filter(|&i| ds.label(i) == Label::Neg)
            .collect();
        if positives.is_empty() || negatives.is_empty() {
            continue;
        }
        let p = positives[rng.random_range(0..positives.len() as u64) as usize];
        let q = negatives[rng.random_range(0..negatives.len() as u64) as usize];
        let mut test = perm[n_train..].to_vec();
        test.sort_unstable();
        let unlabeled = train
            .iter()
            .copied()
            .filter(|&i| i != p && i != q)
            .collect();
        return Ok(PoolState {
            train,
            test,
            labeled: vec![p, q],
            unlabeled,
        });
    }
    Err(DataError::TooFewPerClass {
        name: ds.name().to_string(),
        pos,
        neg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four() -> Dataset {
        Dataset::new(
            "four",
            vec![0.0, 1.0, 2.0, 3.0],
            1,
            vec![Label::Pos, Label::Neg, Label::Pos, Label::Neg],
        )
        .unwrap()
    }

    #[test]
    fn forced_minimal_split() {
        let ds = four();
        let pool = split_and_seed(&ds, &mut Rng::new(3)).unwrap();
        assert_eq!(pool.train().len(), 2);
        assert_eq!(pool.test().len(), 2);
        assert_eq!(pool.labeled().len(), 2);
        assert!(pool.unlabeled().is_empty());
        assert_eq!(ds.label(pool.labeled()[0]), Label::Pos);
        assert_eq!(ds.label(pool.labeled()[1]), Label::Neg);
        pool.check_invariants(4).unwrap();
    }

    #[test]
    fn odd_n_gives_train_the_extra_instance() {
        let ds = Dataset::new(
            "five",
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            1,
            vec![Label::Pos, Label::Neg, Label::Pos, Label::Neg, Label::Pos],
        )
        .unwrap();
        let pool = split_and_seed(&ds, &mut Rng::new(1)).unwrap();
        assert_eq!(pool.train().len(), 3);
        assert_eq!(pool.test().len(), 2);
    }

    #[test]
    fn deterministic() {
        let ds = four();
        let a = split_and_seed(&ds, &mut Rng::stream(9, &["x"])).unwrap();
        let b = split_and_seed(&ds, &mut Rng::stream(9, &["x"])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_per_class() {
        let ds = Dataset::new(
            "t",
            vec![0.0, 1.0, 2.0],
            1,
            vec![Label::Pos, Label::Neg, Label::Neg],
        )
        .unwrap();
        assert!(matches!(
            split_and_seed(&ds, &mut Rng::new(0)),
            Err(DataError::TooFewPerClass { pos: 1, neg: 2, .. })
        ));
    }

    #[test]
    fn query_moves_index() {
        let mut pool = PoolState::from_parts(vec![0, 1, 2, 3], vec![4, 5], vec![0, 1], 6).unwrap();
        assert_eq!(pool.unlabeled(), &[2, 3]);
        pool.query(3).unwrap();
        assert_eq!(pool.unlabeled(), &[2]);
        assert_eq!(pool.labeled(), &[0, 1, 3]);
        pool.check_invariants(6).unwrap();
        assert!(matches!(pool.query(3), Err(DataError::NotInPool(3))));
    }

    #[test]
    fn from_parts_rejects_overlap() {
        assert!(PoolState::from_parts(vec![0, 1, 2], vec![2, 3], vec![0], 4).is_err());
        assert!(PoolState::from_parts(vec![0, 1], vec![2, 3], vec![0, 3], 4).is_err());
    }
}
