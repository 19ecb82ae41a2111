//! Train/test splits and stratified k-fold partitions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::distinct_classes;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    /// Ascending row indices.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
}

/// `round_half_up(fraction · n)`.
pub fn test_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64) + 0.5).floor() as usize
}

fn rows_by_class(labels: &[u32]) -> Vec<(u32, Vec<usize>)> {
    distinct_classes(labels)
        .into_iter()
        .map(|c| (c, (0..labels.len()).filter(|&i| labels[i] == c).collect()))
        .collect()
}

/// Splits off `round_half_up(fraction · n)` test rows. When stratified, each
/// class contributes `⌊fraction · n_c⌋` or one more, assigned by largest
/// remainder (lower class first on equal remainders).
pub fn train_test_split(labels: &[u32], test_fraction: f64, seed: u64, stratified: bool) -> Result<SplitIndices> {
    let n = labels.len();
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("cannot split {n} rows")));
    }
    let n_test = test_count(n, test_fraction).clamp(1, n - 1);
    let mut rng = seeded(seed);
    let mut test = Vec::with_capacity(n_test);
    if stratified {
        let groups = rows_by_class(labels);
        if n < groups.len() {
            return Err(Error::InvalidParameter(format!(
                "{n} rows cannot be stratified over {} classes",
                groups.len()
            )));
        }
        let exact: Vec<f64> = groups.iter().map(|(_, r)| test_fraction * r.len() as f64).collect();
        let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
        let assigned: usize = quota.iter().sum();
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut extra = n_test.saturating_sub(assigned);
        for &g in order.iter().cycle().take(order.len() * 2) {
            if extra == 0 {
                break;
            }
            if quota[g] < groups[g].1.len() {
                quota[g] += 1;
                extra -= 1;
            }
        }
        for ((_, rows), q) in groups.iter().zip(&quota) {
            let mut rows = rows.clone();
            rows.shuffle(&mut rng);
            test.extend_from_slice(&rows[..*q]);
        }
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        test.extend_from_slice(&rows[..n_test]);
    }
    test.sort_unstable();
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    Ok(SplitIndices {
        train_rows: (0..n).filter(|&i| !is_test[i]).collect(),
        test_rows: test,
        seed,
    })
}

/// The default 80/20 split.
pub fn split_80_20(labels: &[u32], seed: u64, stratified: bool) -> Result<SplitIndices> {
    train_test_split(labels, 0.2, seed, stratified)
}

/// `k` disjoint folds covering every row. Each class is shuffled and dealt
/// round-robin, continuing from where the previous class stopped so fold
/// sizes stay within one of each other.
pub fn stratified_kfold(labels: &[u32], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("fold count {k} must be at least 2")));
    }
    let mut rng = seeded(seed);
    let mut folds = vec![Vec::new(); k];
    let mut offset = 0;
    for (class, mut rows) in rows_by_class(labels) {
        if rows.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                size: rows.len(),
                required: k,
            });
        }
        rows.shuffle(&mut rng);
        for (j, r) in rows.iter().enumerate() {
            folds[(offset + j) % k].push(*r);
        }
        offset = (offset + rows.len()) % k;
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Rows outside fold `held_out`, ascending.
pub fn training_rows(folds: &[Vec<usize>], held_out: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != held_out)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    rows.sort_unstable();
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survey_sized_split() {
        let labels: Vec<u32> = (0..9473).map(|i| (i % 4) as u32 + 1).collect();
        let s = split_80_20(&labels, 1, true).unwrap();
        assert_eq!(s.test_rows.len(), 1895);
        assert_eq!(s.train_rows.len(), 7578);
        let s = split_80_20(&labels, 1, false).unwrap();
        assert_eq!(s.test_rows.len(), 1895);
    }

    #[test]
    fn ten_rows_stratified() {
        let labels = [1, 1, 1, 1, 1, 1, 2, 2, 2, 2];
        for seed in 0..20 {
            let s = split_80_20(&labels, seed, true).unwrap();
            let ones = s.test_rows.iter().filter(|&&i| labels[i] == 1).count();
            let twos = s.test_rows.len() - ones;
            assert!((1..=2).contains(&ones) && (1..=2).contains(&twos));
            assert_eq!(s, split_80_20(&labels, seed, true).unwrap());
        }
    }

    #[test]
    fn two_folds_of_ten() {
        let labels = [1, 1, 1, 1, 1, 1, 2, 2, 2, 2];
        let folds = stratified_kfold(&labels, 2, 0).unwrap();
        for f in &folds {
            assert_eq!(f.iter().filter(|&&i| labels[i] == 1).count(), 3);
            assert_eq!(f.iter().filter(|&&i| labels[i] == 2).count(), 2);
        }
        assert_eq!(training_rows(&folds, 0), folds[1]);
    }

    #[test]
    fn small_class_rejected() {
        assert!(matches!(
            stratified_kfold(&[1, 1, 1, 2], 2, 0),
            Err(Error::ClassTooSmall { class: 2, .. })
        ));
    }
}
