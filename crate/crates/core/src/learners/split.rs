//! Exact split search shared by the classification and regression trees.
//!
//! Each training column is replaced once by the rank of its value among the
//! column's sorted distinct values. A node scan then either buckets its rows
//! by rank (when the column has few levels relative to the node) or sorts
//! them by rank, and sweeps candidate thresholds at the midpoints between
//! consecutive distinct values present in the node.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use rand::seq::SliceRandom;

pub(crate) struct RankedColumns {
    levels: Vec<Vec<f64>>,
    ranks: Vec<Vec<u32>>,
}

impl RankedColumns {
    pub(crate) fn new(x: &Matrix) -> Result<Self> {
        let mut levels = Vec::with_capacity(x.n_cols());
        let mut ranks = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let col = x.column(j);
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("feature {j} has a non-finite value")));
            }
            let mut lv = col.clone();
            lv.sort_by(f64::total_cmp);
            lv.dedup();
            let r = col
                .iter()
                .map(|v| lv.binary_search_by(|p| p.total_cmp(v)).unwrap_or(0) as u32)
                .collect();
            levels.push(lv);
            ranks.push(r);
        }
        Ok(Self { levels, ranks })
    }

    pub(crate) fn n_features(&self) -> usize {
        self.levels.len()
    }

    #[inline]
    fn rank(&self, feature: usize, row: usize) -> u32 {
        self.ranks[feature][row]
    }
}

/// Additive per-row statistics and the impurity they induce.
pub(crate) trait Criterion: Sync {
    fn width(&self) -> usize;
    fn accumulate(&self, row: usize, stats: &mut [f64]);
    /// Total (weight-scaled) impurity of a node with these statistics.
    fn impurity(&self, stats: &[f64]) -> f64;
    fn weight(&self, stats: &[f64]) -> f64;
}

/// Weighted Gini: stats are per-class weights; impurity is `W·(1 − Σp²)`.
pub(crate) struct GiniCriterion<'a> {
    pub classes: &'a [usize],
    pub weights: &'a [f64],
    pub n_classes: usize,
}

impl Criterion for GiniCriterion<'_> {
    fn width(&self) -> usize {
        self.n_classes
    }
    #[inline]
    fn accumulate(&self, row: usize, stats: &mut [f64]) {
        stats[self.classes[row]] += self.weights[row];
    }
    #[inline]
    fn impurity(&self, stats: &[f64]) -> f64 {
        let w: f64 = stats.iter().sum();
        if w <= 0.0 {
            return 0.0;
        }
        w - stats.iter().map(|s| s * s).sum::<f64>() / w
    }
    #[inline]
    fn weight(&self, stats: &[f64]) -> f64 {
        stats.iter().sum()
    }
}

/// Weighted squared error: stats are `[Σw, Σw·t, Σw·t²]`.
pub(crate) struct SquaredErrorCriterion<'a> {
    pub targets: &'a [f64],
    pub weights: &'a [f64],
}

impl Criterion for SquaredErrorCriterion<'_> {
    fn width(&self) -> usize {
        3
    }
    #[inline]
    fn accumulate(&self, row: usize, stats: &mut [f64]) {
        let w = self.weights[row];
        let t = self.targets[row];
        stats[0] += w;
        stats[1] += w * t;
        stats[2] += w * t * t;
    }
    #[inline]
    fn impurity(&self, stats: &[f64]) -> f64 {
        if stats[0] <= 0.0 {
            return 0.0;
        }
        (stats[2] - stats[1] * stats[1] / stats[0]).max(0.0)
    }
    #[inline]
    fn weight(&self, stats: &[f64]) -> f64 {
        stats[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitInfo {
    pub feature: usize,
    pub threshold: f64,
    /// Largest rank routed left.
    pub left_rank: u32,
    /// Absolute impurity decrease, in the criterion's weighted units.
    pub gain: f64,
}

/// Gains closer than this (relative to node weight) count as ties.
const TIE_TOLERANCE: f64 = 1e-10;

fn better(candidate: &SplitInfo, best: Option<&SplitInfo>, tol: f64) -> bool {
    match best {
        None => true,
        Some(b) => {
            if candidate.gain > b.gain + tol {
                true
            } else if candidate.gain >= b.gain - tol {
                (candidate.feature, candidate.threshold) < (b.feature, b.threshold)
            } else {
                false
            }
        }
    }
}

#[derive(Default)]
pub(crate) struct Scratch {
    buckets: Vec<f64>,
    counts: Vec<u32>,
    pairs: Vec<(u32, u32)>,
    left: Vec<f64>,
    right: Vec<f64>,
    level_stats: Vec<f64>,
}

pub(crate) enum Scan {
    Constant,
    NoGain,
    Best(SplitInfo),
}

pub(crate) struct NodeContext<'a, C: Criterion> {
    pub cols: &'a RankedColumns,
    pub criterion: &'a C,
    pub min_samples_leaf: usize,
    /// Accept splits that do not lower impurity, so impure nodes keep splitting.
    pub zero_gain_splits: bool,
}

impl<C: Criterion> NodeContext<'_, C> {
    pub(crate) fn node_stats(&self, rows: &[usize]) -> Vec<f64> {
        let mut s = vec![0.0; self.criterion.width()];
        for &r in rows {
            self.criterion.accumulate(r, &mut s);
        }
        s
    }

    /// Best threshold on one feature for the given node rows.
    pub(crate) fn scan_feature(&self, feature: usize, rows: &[usize], parent: &[f64], scratch: &mut Scratch) -> Scan {
        let width = self.criterion.width();
        let levels = &self.cols.levels[feature];
        let d = levels.len();
        let n = rows.len();
        let parent_imp = self.criterion.impurity(parent);
        let tol = TIE_TOLERANCE * self.criterion.weight(parent).abs().max(1.0);
        let min_gain = if self.zero_gain_splits { -tol } else { tol };

        scratch.left.clear();
        scratch.left.resize(width, 0.0);
        scratch.right.clear();
        scratch.right.resize(width, 0.0);
        scratch.level_stats.clear();
        scratch.level_stats.resize(width, 0.0);

        let mut best: Option<SplitInfo> = None;
        let mut n_levels = 0usize;
        let mut left_count = 0usize;
        let mut prev_rank: Option<u32> = None;

        // Called once per distinct level present in the node, in ascending order.
        let mut visit = |rank: u32,
                         count: usize,
                         level_stats: &[f64],
                         left: &mut Vec<f64>,
                         right: &mut Vec<f64>,
                         best: &mut Option<SplitInfo>| {
            n_levels += 1;
            if let Some(prev) = prev_rank {
                let right_count = n - left_count;
                if left_count >= self.min_samples_leaf && right_count >= self.min_samples_leaf {
                    for ((r, p), l) in right.iter_mut().zip(parent).zip(left.iter()) {
                        *r = p - l;
                    }
                    let wl = self.criterion.weight(left);
                    let wr = self.criterion.weight(right);
                    if wl > 0.0 && wr > 0.0 {
                        let gain = parent_imp - self.criterion.impurity(left) - self.criterion.impurity(right);
                        let lo = levels[prev as usize];
                        let hi = levels[rank as usize];
                        let mut threshold = lo + (hi - lo) / 2.0;
                        if threshold >= hi {
                            threshold = lo;
                        }
                        let cand = SplitInfo {
                            feature,
                            threshold,
                            left_rank: prev,
                            gain,
                        };
                        if gain > min_gain && better(&cand, best.as_ref(), tol) {
                            *best = Some(cand);
                        }
                    }
                }
            }
            for (l, s) in left.iter_mut().zip(level_stats) {
                *l += s;
            }
            left_count += count;
            prev_rank = Some(rank);
        };

        if d <= 2 * n + 16 {
            scratch.buckets.clear();
            scratch.buckets.resize(d * width, 0.0);
            scratch.counts.clear();
            scratch.counts.resize(d, 0);
            for &r in rows {
                let k = self.cols.rank(feature, r) as usize;
                scratch.counts[k] += 1;
                self.criterion
                    .accumulate(r, &mut scratch.buckets[k * width..(k + 1) * width]);
            }
            let Scratch {
                buckets,
                counts,
                left,
                right,
                ..
            } = scratch;
            for k in 0..d {
                if counts[k] > 0 {
                    visit(
                        k as u32,
                        counts[k] as usize,
                        &buckets[k * width..(k + 1) * width],
                        left,
                        right,
                        &mut best,
                    );
                }
            }
        } else {
            scratch.pairs.clear();
            scratch
                .pairs
                .extend(rows.iter().map(|&r| (self.cols.rank(feature, r), r as u32)));
            scratch.pairs.sort_unstable();
            let Scratch {
                pairs,
                left,
                right,
                level_stats,
                ..
            } = scratch;
            let mut i = 0;
            while i < pairs.len() {
                let rank = pairs[i].0;
                level_stats.iter_mut().for_each(|s| *s = 0.0);
                let start = i;
                while i < pairs.len() && pairs[i].0 == rank {
                    self.criterion.accumulate(pairs[i].1 as usize, level_stats);
                    i += 1;
                }
                visit(rank, i - start, level_stats, left, right, &mut best);
            }
        }

        match best {
            Some(b) => Scan::Best(b),
            None if n_levels <= 1 => Scan::Constant,
            None => Scan::NoGain,
        }
    }

    /// Best split over `features`; ties go to the lower feature index, then
    /// the lower threshold.
    pub(crate) fn best_over(
        &self,
        features: &[usize],
        rows: &[usize],
        parent: &[f64],
        scratch: &mut Scratch,
    ) -> Option<SplitInfo> {
        let tol = TIE_TOLERANCE * self.criterion.weight(parent).abs().max(1.0);
        let mut best: Option<SplitInfo> = None;
        for &f in features {
            if let Scan::Best(s) = self.scan_feature(f, rows, parent, scratch) {
                if better(&s, best.as_ref(), tol) {
                    best = Some(s);
                }
            }
        }
        best
    }

    /// Random-subspace search: visits features in random order until `m`
    /// non-constant ones have been seen, then keeps the best among them.
    pub(crate) fn best_random(
        &self,
        m: usize,
        rows: &[usize],
        parent: &[f64],
        scratch: &mut Scratch,
        rng: &mut Rng,
        order: &mut Vec<usize>,
    ) -> Option<SplitInfo> {
        let p = self.cols.n_features();
        if m >= p {
            let all: Vec<usize> = (0..p).collect();
            return self.best_over(&all, rows, parent, scratch);
        }
        order.clear();
        order.extend(0..p);
        order.shuffle(rng);
        let tol = TIE_TOLERANCE * self.criterion.weight(parent).abs().max(1.0);
        let mut best: Option<SplitInfo> = None;
        let mut visited = 0;
        for &f in order.iter() {
            if visited >= m {
                break;
            }
            match self.scan_feature(f, rows, parent, scratch) {
                Scan::Constant => {}
                Scan::NoGain => visited += 1,
                Scan::Best(s) => {
                    visited += 1;
                    if better(&s, best.as_ref(), tol) {
                        best = Some(s);
                    }
                }
            }
        }
        best
    }

    pub(crate) fn partition(&self, rows: &[usize], split: &SplitInfo) -> (Vec<usize>, Vec<usize>) {
        rows.iter()
            .partition(|&&r| self.cols.rank(split.feature, r) <= split.left_rank)
    }
}
