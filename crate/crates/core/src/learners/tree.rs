//! CART decision trees: Gini-split classification trees and the
//! squared-error regression trees used by boosting.

use serde::{Deserialize, Serialize};

use super::split::{Criterion, GiniCriterion, NodeContext, RankedColumns, Scratch, SplitInfo};
use super::{class_index, normalized_weights, Classifier};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{seeded, Rng};

/// Arena node: internal nodes send `x` left iff `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node<L> {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted impurity decrease achieved by this split.
        gain: f64,
    },
    Leaf(L),
}

/// Classification tree node; leaves hold class probabilities.
pub type TreeNode = Node<Vec<f64>>;

pub(crate) fn descend<'a, L>(nodes: &'a [Node<L>], x: &[f64]) -> &'a L {
    let mut i = 0;
    loop {
        match &nodes[i] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => i = if x[*feature] <= *threshold { *left } else { *right },
            Node::Leaf(v) => return v,
        }
    }
}

pub(crate) fn split_gains<L>(nodes: &[Node<L>], n_features: usize) -> Vec<f64> {
    let mut g = vec![0.0; n_features];
    for n in nodes {
        if let Node::Split { feature, gain, .. } = n {
            g[*feature] += gain.max(0.0);
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until the stop rules fire.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features drawn per split; `None` searches all.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            features_per_split: None,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParameter("min_samples_leaf must be at least 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::InvalidParameter("features_per_split must be at least 1".into()));
        }
        Ok(())
    }
}

/// Grows a tree and returns leaves as row sets; `leaf` turns each into a value.
pub(crate) fn grow<C: Criterion, L>(
    ctx: &NodeContext<'_, C>,
    rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut Rng,
    is_pure: impl Fn(&[f64]) -> bool,
    mut leaf: impl FnMut(&[usize], &[f64]) -> L,
) -> Vec<Node<L>> {
    let p = ctx.cols.n_features();
    let m = params.features_per_split.unwrap_or(p).min(p);
    let min_split = params.min_samples_split.max(2);
    let mut scratch = Scratch::default();
    let mut order = Vec::with_capacity(p);

    let mut nodes: Vec<Option<Node<L>>> = vec![None];
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((id, rows, depth)) = stack.pop() {
        let stats = ctx.node_stats(&rows);
        let can_split = params.max_depth.is_none_or(|d| depth < d)
            && rows.len() >= min_split
            && rows.len() >= 2 * ctx.min_samples_leaf
            && !is_pure(&stats);
        let split: Option<SplitInfo> = if can_split {
            ctx.best_random(m, &rows, &stats, &mut scratch, rng, &mut order)
        } else {
            None
        };
        match split {
            Some(s) => {
                let (l, r) = ctx.partition(&rows, &s);
                let left = nodes.len();
                nodes.push(None);
                nodes.push(None);
                nodes[id] = Some(Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right: left + 1,
                    gain: s.gain.max(0.0),
                });
                stack.push((left + 1, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
            None => nodes[id] = Some(Node::Leaf(leaf(&rows, &stats))),
        }
    }
    nodes.into_iter().map(|n| n.expect("every node assigned")).collect()
}

/// `1 − Σ p_c²` over (possibly weighted) class counts.
pub fn gini(class_counts: &[f64]) -> Result<f64> {
    let total: f64 = class_counts.iter().sum();
    if class_counts.iter().any(|&c| c < 0.0) || total <= 0.0 {
        return Err(Error::InvalidParameter(
            "class counts must be non-negative and not all zero".into(),
        ));
    }
    Ok(1.0 - class_counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>())
}

/// A chosen split: the decrease is in Gini units (parent minus the
/// weight-averaged children).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

/// Exhaustive search over midpoints of consecutive distinct values of each
/// candidate feature. `None` when no split lowers impurity.
pub fn best_split(features: &Matrix, labels: &[u32], weights: Option<&[f64]>, candidates: &[usize]) -> Option<Split> {
    if features.n_rows() == 0 || features.n_rows() != labels.len() {
        return None;
    }
    let cols = RankedColumns::new(features).ok()?;
    let (classes, idx) = class_index(labels);
    let w = normalized_weights(weights, labels.len()).ok()?;
    let crit = GiniCriterion {
        classes: &idx,
        weights: &w,
        n_classes: classes.len(),
    };
    let ctx = NodeContext {
        cols: &cols,
        criterion: &crit,
        min_samples_leaf: 1,
        zero_gain_splits: false,
    };
    let rows: Vec<usize> = (0..labels.len()).collect();
    let parent = ctx.node_stats(&rows);
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.retain(|&f| f < features.n_cols());
    let s = ctx.best_over(&sorted, &rows, &parent, &mut Scratch::default())?;
    let total = crit.weight(&parent);
    Some(Split {
        feature: s.feature,
        threshold: s.threshold,
        decrease: s.gain / total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub classes: Vec<u32>,
    pub n_features: usize,
    pub nodes: Vec<TreeNode>,
}

pub(crate) fn is_pure_classes(stats: &[f64]) -> bool {
    stats.iter().filter(|&&w| w > 0.0).count() <= 1
}

pub(crate) fn distribution(stats: &[f64]) -> Vec<f64> {
    let total: f64 = stats.iter().sum();
    if total > 0.0 {
        stats.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / stats.len() as f64; stats.len()]
    }
}

impl DecisionTree {
    pub fn fit(x: &Matrix, y: &[u32], weights: Option<&[f64]>, params: &TreeParams) -> Result<Self> {
        if x.n_rows() == 0 {
            return Err(Error::EmptyInput("decision tree"));
        }
        if x.n_rows() != y.len() {
            return Err(Error::InvalidParameter("row/label count mismatch".into()));
        }
        params.validate()?;
        let cols = RankedColumns::new(x)?;
        let (classes, idx) = class_index(y);
        let w = normalized_weights(weights, y.len())?;
        let rows = (0..y.len()).collect();
        let mut rng = seeded(params.seed);
        Ok(Self::fit_ranked(&cols, &classes, &idx, &w, rows, params, &mut rng))
    }

    pub(crate) fn fit_ranked(
        cols: &RankedColumns,
        classes: &[u32],
        class_idx: &[usize],
        weights: &[f64],
        rows: Vec<usize>,
        params: &TreeParams,
        rng: &mut Rng,
    ) -> Self {
        let crit = GiniCriterion {
            classes: class_idx,
            weights,
            n_classes: classes.len(),
        };
        let ctx = NodeContext {
            cols,
            criterion: &crit,
            min_samples_leaf: params.min_samples_leaf,
            zero_gain_splits: true,
        };
        let nodes = grow(&ctx, rows, params, rng, is_pure_classes, |_, stats| distribution(stats));
        Self {
            classes: classes.to_vec(),
            n_features: cols.n_features(),
            nodes,
        }
    }

    pub fn leaf_distribution(&self, x: &[f64]) -> &[f64] {
        descend(&self.nodes, x)
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf(_) => 0,
            }
        }
        go(&self.nodes, 0)
    }

    /// Summed weighted Gini decrease per feature (unnormalized).
    pub fn split_gains(&self) -> Vec<f64> {
        split_gains(&self.nodes, self.n_features)
    }
}

impl Classifier for DecisionTree {
    fn classes(&self) -> &[u32] {
        &self.classes
    }

    fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        x.rows().map(|r| self.leaf_distribution(r).to_vec()).collect()
    }
}

/// Convenience wrapper over [`DecisionTree::fit`].
pub fn fit_tree(x: &Matrix, y: &[u32], weights: Option<&[f64]>, params: &TreeParams) -> Result<DecisionTree> {
    DecisionTree::fit(x, y, weights, params)
}
