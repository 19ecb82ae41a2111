//! Class-imbalance treatments applied to training rows.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMethod {
    #[default]
    None,
    Undersample,
    Oversample,
    Smote,
    ClassWeights,
}

fn default_smote_k() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceConfig {
    #[serde(default)]
    pub method: BalanceMethod,
    #[serde(default = "default_smote_k")]
    pub smote_k: usize,
    /// Overrides the seed derived from the pipeline seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            method: BalanceMethod::None,
            smote_k: default_smote_k(),
            seed: None,
        }
    }
}

/// Before/after class counts plus any classes SMOTE had to duplicate instead.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BalanceReport {
    pub method: BalanceMethod,
    pub before: BTreeMap<u32, usize>,
    pub after: BTreeMap<u32, usize>,
    pub duplication_fallback: Vec<u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<u32, f64>,
}

impl BalanceReport {
    pub fn to_log_lines(&self) -> Vec<String> {
        let fmt = |m: &BTreeMap<u32, usize>| m.iter().map(|(c, n)| format!("{c}:{n}")).collect::<Vec<_>>().join(" ");
        let mut out = vec![
            format!("balance: method {:?}", self.method),
            format!("balance: before {}", fmt(&self.before)),
            format!("balance: after {}", fmt(&self.after)),
        ];
        if !self.duplication_fallback.is_empty() {
            out.push(format!(
                "balance: single-member classes duplicated instead of interpolated: {:?}",
                self.duplication_fallback
            ));
        }
        for (c, w) in &self.weights {
            out.push(format!("balance: class {c} weight {w}"));
        }
        out
    }
}

pub fn class_counts(labels: &[u32]) -> BTreeMap<u32, usize> {
    let mut counts = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
}

fn class_members(labels: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    members
}

fn check_rows(matrix: &Matrix, labels: &[u32]) -> Result<BTreeMap<u32, Vec<usize>>> {
    if matrix.n_rows() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} rows but {} labels",
            matrix.n_rows(),
            labels.len()
        )));
    }
    let members = class_members(labels);
    if members.len() < 2 {
        return Err(Error::SingleClass);
    }
    Ok(members)
}

/// Randomly removes rows until every class has the minority count.
pub fn undersample(matrix: &Matrix, labels: &[u32], seed: u64) -> Result<(Matrix, Vec<u32>)> {
    let members = check_rows(matrix, labels)?;
    let target = members.values().map(Vec::len).min().unwrap_or(0);
    let mut rng = seeded(seed);
    let mut keep = Vec::with_capacity(target * members.len());
    for rows in members.values() {
        let picked = sample(&mut rng, rows.len(), target);
        keep.extend(picked.iter().map(|i| rows[i]));
    }
    keep.sort_unstable();
    Ok((matrix.select_rows(&keep), keep.iter().map(|&i| labels[i]).collect()))
}

/// Duplicates randomly drawn rows until every class has the majority count.
pub fn oversample(matrix: &Matrix, labels: &[u32], seed: u64) -> Result<(Matrix, Vec<u32>)> {
    let members = check_rows(matrix, labels)?;
    let target = members.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = seeded(seed);
    let mut rows: Vec<usize> = (0..labels.len()).collect();
    for class_rows in members.values() {
        for _ in class_rows.len()..target {
            rows.push(class_rows[rng.gen_range(0..class_rows.len())]);
        }
    }
    Ok((matrix.select_rows(&rows), rows.iter().map(|&i| labels[i]).collect()))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k` nearest same-class neighbours of `rows[pos]`, ties broken by row index.
fn neighbours(matrix: &Matrix, rows: &[usize], pos: usize, k: usize) -> Vec<usize> {
    let x = matrix.row(rows[pos]);
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != pos)
        .map(|(_, &r)| (squared_distance(x, matrix.row(r)), r))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, r)| r).collect()
}

/// Synthetic minority over-sampling: each new row is `x + λ(x_nn − x)` for a
/// random class member `x`, one of its `k` nearest same-class neighbours and
/// `λ ~ U[0, 1]`. Classes with a single member fall back to duplication.
pub fn smote(matrix: &Matrix, labels: &[u32], k: usize, seed: u64) -> Result<(Matrix, Vec<u32>, BalanceReport)> {
    if k == 0 {
        return Err(Error::InvalidParameter("smote_k must be at least 1".into()));
    }
    let members = check_rows(matrix, labels)?;
    let target = members.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = seeded(seed);
    let mut out = matrix.clone();
    let mut out_labels = labels.to_vec();
    let mut fallback = Vec::new();
    let mut synthetic = vec![0.0; matrix.n_cols()];

    for (&class, rows) in &members {
        let need = target - rows.len();
        if need == 0 {
            continue;
        }
        if rows.len() == 1 {
            fallback.push(class);
            for _ in 0..need {
                out.push_row(matrix.row(rows[0]))?;
                out_labels.push(class);
            }
            continue;
        }
        let kk = k.min(rows.len() - 1);
        let mut cache: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for _ in 0..need {
            let pos = rng.gen_range(0..rows.len());
            let nn = cache.entry(pos).or_insert_with(|| neighbours(matrix, rows, pos, kk));
            let other = nn[rng.gen_range(0..nn.len())];
            let lambda: f64 = rng.gen_range(0.0..=1.0);
            let x = matrix.row(rows[pos]);
            let y = matrix.row(other);
            for ((s, a), b) in synthetic.iter_mut().zip(x).zip(y) {
                *s = a + lambda * (b - a);
            }
            out.push_row(&synthetic)?;
            out_labels.push(class);
        }
    }
    let report = BalanceReport {
        method: BalanceMethod::Smote,
        before: class_counts(labels),
        after: class_counts(&out_labels),
        duplication_fallback: fallback,
        weights: BTreeMap::new(),
    };
    Ok((out, out_labels, report))
}

/// Balanced class weights `N / (K · n_c)`.
pub fn class_weights(labels: &[u32]) -> BTreeMap<u32, f64> {
    let counts = class_counts(labels);
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    counts.into_iter().map(|(c, nc)| (c, n / (k * nc as f64))).collect()
}

/// Output of [`apply`]: possibly resampled rows plus optional per-row weights.
#[derive(Debug, Clone)]
pub struct Balanced {
    pub matrix: Matrix,
    pub labels: Vec<u32>,
    pub weights: Option<Vec<f64>>,
    pub report: BalanceReport,
}

/// Runs the configured treatment with an explicit seed.
pub fn apply(config: &BalanceConfig, matrix: &Matrix, labels: &[u32], seed: u64) -> Result<Balanced> {
    let seed = config.seed.unwrap_or(seed);
    let before = class_counts(labels);
    let simple = |m: Matrix, l: Vec<u32>, method| {
        let report = BalanceReport {
            method,
            before: before.clone(),
            after: class_counts(&l),
            ..Default::default()
        };
        Balanced {
            matrix: m,
            labels: l,
            weights: None,
            report,
        }
    };
    Ok(match config.method {
        BalanceMethod::None => simple(matrix.clone(), labels.to_vec(), BalanceMethod::None),
        BalanceMethod::Undersample => {
            let (m, l) = undersample(matrix, labels, seed)?;
            simple(m, l, BalanceMethod::Undersample)
        }
        BalanceMethod::Oversample => {
            let (m, l) = oversample(matrix, labels, seed)?;
            simple(m, l, BalanceMethod::Oversample)
        }
        BalanceMethod::Smote => {
            let (m, l, report) = smote(matrix, labels, config.smote_k, seed)?;
            Balanced {
                matrix: m,
                labels: l,
                weights: None,
                report,
            }
        }
        BalanceMethod::ClassWeights => {
            let w = class_weights(labels);
            let per_row = labels.iter().map(|l| w[l]).collect();
            let mut b = simple(matrix.clone(), labels.to_vec(), BalanceMethod::ClassWeights);
            b.weights = Some(per_row);
            b.report.weights = w;
            b
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn data(counts: &[(u32, usize)]) -> (Matrix, Vec<u32>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut i = 0.0_f64;
        for &(c, n) in counts {
            for _ in 0..n {
                rows.push(vec![i, c as f64 * 10.0 + (i * 0.37).sin()]);
                labels.push(c);
                i += 1.0;
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    fn counts_of(labels: &[u32]) -> Vec<(u32, usize)> {
        class_counts(labels).into_iter().collect()
    }

    #[test]
    fn undersample_examples() {
        let (m, l) = data(&[(1, 10), (2, 2)]);
        let (_, l2) = undersample(&m, &l, 1).unwrap();
        assert_eq!(counts_of(&l2), vec![(1, 2), (2, 2)]);
        let (m, l) = data(&[(1, 5), (2, 5)]);
        let (m2, l2) = undersample(&m, &l, 1).unwrap();
        assert_eq!(l2, l);
        assert_eq!(m2, m);
        let (m, l) = data(&[(1, 600), (2, 100), (3, 150), (4, 150)]);
        let (_, l2) = undersample(&m, &l, 9).unwrap();
        assert!(class_counts(&l2).values().all(|&n| n == 100));
    }

    #[test]
    fn oversample_examples() {
        let (m, l) = data(&[(1, 10), (2, 2)]);
        let (m2, l2) = oversample(&m, &l, 3).unwrap();
        assert_eq!(counts_of(&l2), vec![(1, 10), (2, 10)]);
        for (row, &lab) in m2.rows().zip(&l2) {
            assert!(m.rows().zip(&l).any(|(r, &c)| r == row && c == lab));
        }
        let (m, l) = data(&[(1, 600), (2, 100), (3, 150), (4, 150)]);
        let (_, l2) = oversample(&m, &l, 3).unwrap();
        assert!(class_counts(&l2).values().all(|&n| n == 600));
        let (m, l) = data(&[(1, 3), (2, 3)]);
        assert_eq!(oversample(&m, &l, 3).unwrap().1, l);
    }

    #[test]
    fn single_class_rejected() {
        let (m, l) = data(&[(1, 4)]);
        assert!(matches!(undersample(&m, &l, 0), Err(Error::SingleClass)));
        assert!(matches!(oversample(&m, &l, 0), Err(Error::SingleClass)));
        assert!(matches!(smote(&m, &l, 1, 0), Err(Error::SingleClass)));
    }

    #[test]
    fn smote_midpoint_of_two_points() {
        // with k=1 each minority point's only neighbour is the other point
        let m = Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0], [9.0, 9.0], [9.0, 8.0], [8.0, 9.0]]).unwrap();
        let l = vec![2, 2, 1, 1, 1];
        let (out, labels, report) = smote(&m, &l, 1, 5).unwrap();
        assert_eq!(counts_of(&labels), vec![(1, 3), (2, 3)]);
        assert!(report.duplication_fallback.is_empty());
        let s = out.row(5);
        assert!((s[0] - s[1]).abs() < 1e-12 && (0.0..=2.0).contains(&s[0]));
    }

    #[test]
    fn smote_counts_and_fallback() {
        let (m, l) = data(&[(1, 4), (2, 2)]);
        let (_, l2, _) = smote(&m, &l, 5, 0).unwrap();
        assert_eq!(counts_of(&l2), vec![(1, 4), (2, 4)]);
        let (m, l) = data(&[(1, 4), (2, 1)]);
        let (out, l2, report) = smote(&m, &l, 3, 0).unwrap();
        assert_eq!(report.duplication_fallback, vec![2]);
        assert_eq!(counts_of(&l2), vec![(1, 4), (2, 4)]);
        assert_eq!(out.row(7), m.row(4));
        assert!(smote(&m, &l, 0, 0).is_err());
    }

    #[test]
    fn class_weight_examples() {
        let w = class_weights(&[1, 1, 1, 1, 1, 2, 2, 2, 2, 2]);
        assert_eq!(w[&1], 1.0);
        assert_eq!(w[&2], 1.0);
        let mut labels = vec![0u32; 9];
        labels.push(1);
        let w = class_weights(&labels);
        assert!((w[&0] - 10.0 / 18.0).abs() < 1e-12);
        assert!((w[&1] - 5.0).abs() < 1e-12);
        // 9,557 rows over 4 classes with 5,996 in the majority class
        let mut labels = vec![4u32; 5996];
        labels.extend(std::iter::repeat_n(1, 755));
        labels.extend(std::iter::repeat_n(2, 1597));
        labels.extend(std::iter::repeat_n(3, 1209));
        let w = class_weights(&labels);
        assert!((w[&4] - 9557.0 / (4.0 * 5996.0)).abs() < 1e-12);
        assert!((w[&4] - 0.3985).abs() < 5e-5);
    }

    proptest! {
        #[test]
        fn treatments_equalize_and_are_deterministic(
            counts in prop::collection::vec(2usize..25, 2..5),
            seed in any::<u64>(),
        ) {
            let spec: Vec<(u32, usize)> = counts.iter().enumerate().map(|(i, &n)| (i as u32 + 1, n)).collect();
            let (m, l) = data(&spec);

            let (mu, lu) = undersample(&m, &l, seed).unwrap();
            let (mo, lo) = oversample(&m, &l, seed).unwrap();
            let (ms, ls, _) = smote(&m, &l, 3, seed).unwrap();
            for labels in [&lu, &lo, &ls] {
                let c = class_counts(labels);
                let first = *c.values().next().unwrap();
                prop_assert!(c.values().all(|&n| n == first));
            }
            // under/over-sampling only ever emit input rows
            for (row, lab) in mu.rows().zip(&lu).chain(mo.rows().zip(&lo)) {
                prop_assert!(m.rows().zip(&l).any(|(r, c)| r == row && c == lab));
            }
            // synthetic rows lie componentwise between two same-class rows
            for (row, lab) in ms.rows().zip(&ls).skip(l.len()) {
                let members: Vec<&[f64]> = m.rows().zip(&l).filter(|(_, c)| *c == lab).map(|(r, _)| r).collect();
                let ok = members.iter().any(|a| members.iter().any(|b| {
                    row.iter().zip(a.iter()).zip(b.iter()).all(|((s, x), y)| {
                        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                        *s >= lo - 1e-9 && *s <= hi + 1e-9
                    })
                }));
                prop_assert!(ok);
            }
            prop_assert_eq!(undersample(&m, &l, seed).unwrap().1, lu);
            prop_assert_eq!(smote(&m, &l, 3, seed).unwrap().0, ms);

            let w = class_weights(&l);
            let total: f64 = class_counts(&l).iter().map(|(c, n)| w[c] * *n as f64).sum();
            prop_assert!((total - l.len() as f64).abs() < 1e-9);
        }
    }
}
