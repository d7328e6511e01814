//! Impurity measures and the two single-tree learners.
//!
//! [`fit_cart`] grows binary threshold trees scored by gini impurity or
//! entropy. [`fit_id3`] discretizes every feature into equal-frequency bins
//! once, then grows multiway trees by information gain, using each feature at
//! most once per path. Both learners break ties toward the lowest feature
//! index and then the lowest threshold, so training is deterministic.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::features::FeatureVector;

/// Score differences at or below this are treated as ties.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("class distribution is empty")]
    EmptyDistribution,
    #[error("child totals sum to {children}, parent total is {parent}")]
    TotalsMismatch { parent: usize, children: usize },
    #[error("distributions have {0} and {1} classes")]
    ClassCountMismatch(usize, usize),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid tree parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} feature values, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("feature names do not match the model's")]
    FeatureNames,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Per-class counts at a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: Vec<usize>,
}

impl ClassDistribution {
    pub fn new(counts: Vec<usize>) -> Self {
        ClassDistribution { counts }
    }

    pub fn zeros(n_classes: usize) -> Self {
        ClassDistribution {
            counts: vec![0; n_classes],
        }
    }

    pub fn from_labels(labels: impl IntoIterator<Item = usize>, n_classes: usize) -> Self {
        let mut d = Self::zeros(n_classes);
        for l in labels {
            d.counts[l] += 1;
        }
        d
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    /// Most frequent class, lowest index on ties.
    pub fn majority(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_pure(&self) -> bool {
        self.counts.iter().filter(|&&c| c > 0).count() <= 1
    }
}

fn entropy_of(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

fn gini_of(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Shannon entropy in bits.
pub fn entropy(dist: &ClassDistribution) -> Result<f64, TreeError> {
    match dist.total() {
        0 => Err(TreeError::EmptyDistribution),
        total => Ok(entropy_of(&dist.counts, total).max(0.0)),
    }
}

/// Gini impurity `1 - sum p_i^2`.
pub fn gini_impurity(dist: &ClassDistribution) -> Result<f64, TreeError> {
    match dist.total() {
        0 => Err(TreeError::EmptyDistribution),
        total => Ok(gini_of(&dist.counts, total).max(0.0)),
    }
}

/// Parent entropy minus the size-weighted entropy of the children.
pub fn information_gain(parent: &ClassDistribution, children: &[ClassDistribution]) -> Result<f64, TreeError> {
    let n = parent.total();
    if n == 0 {
        return Err(TreeError::EmptyDistribution);
    }
    let child_total: usize = children.iter().map(ClassDistribution::total).sum();
    if child_total != n {
        return Err(TreeError::TotalsMismatch {
            parent: n,
            children: child_total,
        });
    }
    if let Some(c) = children.iter().find(|c| c.n_classes() != parent.n_classes()) {
        return Err(TreeError::ClassCountMismatch(parent.n_classes(), c.n_classes()));
    }
    let weighted: f64 = children
        .iter()
        .filter(|c| c.total() > 0)
        .map(|c| c.total() as f64 / n as f64 * entropy_of(&c.counts, c.total()))
        .sum();
    // concavity makes this non-negative; clamp rounding noise
    Ok((entropy_of(&parent.counts, n) - weighted).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
    InfoGain,
}

impl Criterion {
    /// Node impurity under this criterion; information gain uses entropy.
    pub fn impurity(self, counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        match self {
            Criterion::Gini => gini_of(counts, total).max(0.0),
            Criterion::Entropy | Criterion::InfoGain => entropy_of(counts, total).max(0.0),
        }
    }

    pub fn measure_name(self) -> &'static str {
        match self {
            Criterion::Gini => "gini",
            Criterion::Entropy | Criterion::InfoGain => "entropy",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
            Criterion::InfoGain => "info_gain",
        })
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            "info_gain" | "infogain" => Ok(Criterion::InfoGain),
            other => Err(format!("unknown criterion {other:?} (expected gini, entropy or info_gain)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub min_gain: f64,
    pub id3_bins: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: None,
            min_leaf: 1,
            min_gain: 0.0,
            id3_bins: 8,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.min_leaf == 0 {
            return Err(TreeError::InvalidParams("min_leaf must be positive".into()));
        }
        if !(self.min_gain >= 0.0) {
            return Err(TreeError::InvalidParams(format!("min_gain must be non-negative, got {}", self.min_gain)));
        }
        if self.id3_bins == 0 {
            return Err(TreeError::InvalidParams("id3_bins must be positive".into()));
        }
        Ok(())
    }

    fn depth_allows(&self, depth: usize) -> bool {
        self.max_depth.is_none_or(|d| depth < d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitRule {
    /// `x <= threshold` goes to child 0, otherwise child 1.
    Threshold { threshold: f64 },
    /// Interior cut points of equal-frequency bins. Bin `b` holds values in
    /// `(edges[b-1], edges[b]]`; values beyond the outer cut points fall in
    /// the first or last bin. `child_of_bin[b]` is the child serving bin `b`.
    Bins { edges: Vec<f64>, child_of_bin: Vec<usize> },
}

impl SplitRule {
    pub fn route(&self, x: f64) -> usize {
        match self {
            SplitRule::Threshold { threshold } => usize::from(!(x <= *threshold)),
            SplitRule::Bins { edges, child_of_bin } => child_of_bin[bin_of(edges, x)],
        }
    }
}

fn bin_of(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|&e| e < x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Leaf,
    Internal {
        feature_index: usize,
        rule: SplitRule,
        /// Impurity decrease achieved by this split (information gain for ID3).
        decrease: f64,
        children: Vec<TreeNode>,
    },
}

/// A node with the training distribution that reached it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub distribution: ClassDistribution,
    pub impurity: f64,
    #[serde(flatten)]
    pub kind: NodeKind,
}

impl TreeNode {
    fn leaf(distribution: ClassDistribution, impurity: f64) -> Self {
        TreeNode {
            distribution,
            impurity,
            kind: NodeKind::Leaf,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf)
    }

    pub fn n_samples(&self) -> usize {
        self.distribution.total()
    }

    pub fn count_nodes(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf => 1,
            NodeKind::Internal { children, .. } => 1 + children.iter().map(TreeNode::count_nodes).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf => 0,
            NodeKind::Internal { children, .. } => 1 + children.iter().map(TreeNode::depth).max().unwrap_or(0),
        }
    }

    fn route<'a>(&'a self, x: &[f64]) -> &'a TreeNode {
        let mut node = self;
        while let NodeKind::Internal {
            feature_index,
            rule,
            children,
            ..
        } = &node.kind
        {
            node = &children[rule.route(x[*feature_index])];
        }
        node
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: TreeNode,
    pub params: TreeParams,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

/// Predicted class index and per-class scores (the leaf's class frequencies).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub scores: Vec<f64>,
}

impl TreeModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn leaf_for(&self, x: &[f64]) -> Result<&TreeNode, TreeError> {
        if x.len() != self.feature_names.len() {
            return Err(TreeError::Arity {
                expected: self.feature_names.len(),
                found: x.len(),
            });
        }
        Ok(self.root.route(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, TreeError> {
        let leaf = self.leaf_for(x)?;
        Ok(Prediction {
            label: leaf.distribution.majority(),
            scores: leaf.distribution.probabilities(),
        })
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<usize, TreeError> {
        Ok(self.leaf_for(x)?.distribution.majority())
    }

    /// Predicts a named vector, checking its feature names against the model.
    pub fn predict_vector(&self, x: &FeatureVector) -> Result<(String, Vec<f64>), TreeError> {
        if x.names[..] != self.feature_names[..] {
            return Err(TreeError::FeatureNames);
        }
        let p = self.predict(&x.values)?;
        Ok((self.class_names[p.label].clone(), p.scores))
    }

    pub fn accuracy(&self, ds: &Dataset) -> Result<f64, TreeError> {
        let mut correct = 0;
        for (row, &label) in ds.rows.iter().zip(&ds.labels) {
            correct += usize::from(self.predict_label(row)? == label);
        }
        Ok(correct as f64 / ds.len().max(1) as f64)
    }

    /// Sum over internal nodes of `(n_node / n_root) * decrease`, per feature.
    pub fn weighted_decreases(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.feature_names.len()];
        let n_root = self.root.n_samples().max(1) as f64;
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            if let NodeKind::Internal {
                feature_index,
                decrease,
                children,
                ..
            } = &node.kind
            {
                out[*feature_index] += node.n_samples() as f64 / n_root * decrease;
                stack.extend(children.iter());
            }
        }
        out
    }

    pub fn export_dot(&self) -> String {
        export_dot(self)
    }
}

/// Best threshold split found by [`best_binary_split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinarySplit {
    pub feature_index: usize,
    pub threshold: f64,
    /// Impurity decrease `I(parent) - sum (n_i / n) I(child_i)`.
    pub decrease: f64,
}

/// Midpoint of two consecutive distinct values that still separates them.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo / 2.0 + hi / 2.0;
    if mid >= lo && mid < hi {
        mid
    } else {
        lo
    }
}

/// Exhaustive best threshold split over `features` for the rows `rows` of `ds`.
///
/// Candidate thresholds are midpoints between consecutive distinct values.
/// Returns `None` when no candidate has a positive impurity decrease.
pub fn best_binary_split(ds: &Dataset, rows: &[usize], features: &[usize], criterion: Criterion) -> Option<BinarySplit> {
    let mut scratch = Vec::with_capacity(rows.len());
    best_split_with(ds, rows, features, criterion, 1, &mut scratch)
}

fn best_split_with(
    ds: &Dataset,
    rows: &[usize],
    features: &[usize],
    criterion: Criterion,
    min_leaf: usize,
    scratch: &mut Vec<(f64, usize)>,
) -> Option<BinarySplit> {
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let n_classes = ds.n_classes();
    let parent = ClassDistribution::from_labels(rows.iter().map(|&r| ds.labels[r]), n_classes);
    let parent_impurity = criterion.impurity(&parent.counts, n);
    if parent_impurity <= 0.0 {
        return None;
    }

    let mut sorted_features = features.to_vec();
    sorted_features.sort_unstable();
    sorted_features.dedup();

    let mut best: Option<BinarySplit> = None;
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];
    for &f in &sorted_features {
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (ds.rows[r][f], ds.labels[r])));
        scratch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if scratch[0].0 == scratch[n - 1].0 {
            continue;
        }
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(&parent.counts);
        for i in 0..n - 1 {
            let (value, label) = scratch[i];
            left[label] += 1;
            right[label] -= 1;
            let next = scratch[i + 1].0;
            if next == value {
                continue;
            }
            let (n_left, n_right) = (i + 1, n - i - 1);
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let decrease = parent_impurity
                - (n_left as f64 / n as f64) * criterion.impurity(&left, n_left)
                - (n_right as f64 / n as f64) * criterion.impurity(&right, n_right);
            if decrease <= TIE_EPSILON {
                continue;
            }
            // features and thresholds are visited in ascending order, so a
            // later candidate only wins by a clear margin
            if best.is_none_or(|b| decrease > b.decrease + TIE_EPSILON) {
                best = Some(BinarySplit {
                    feature_index: f,
                    threshold: midpoint(value, next),
                    decrease,
                });
            }
        }
    }
    best
}

/// Chooses the candidate features examined at one node.
pub(crate) trait FeatureSelector {
    fn select(&mut self, n_features: usize) -> Vec<usize>;
}

pub(crate) struct AllFeatures;

impl FeatureSelector for AllFeatures {
    fn select(&mut self, n_features: usize) -> Vec<usize> {
        (0..n_features).collect()
    }
}

pub(crate) fn check_fit_inputs(train: &Dataset, params: &TreeParams) -> Result<(), TreeError> {
    params.validate()?;
    if train.is_empty() {
        return Err(TreeError::EmptyTrainingSet);
    }
    train.validate()?;
    Ok(())
}

/// Grows a binary threshold tree over `rows` (indices into `train`, repeats
/// allowed) drawing candidate features from `selector` at every node.
pub(crate) fn grow_binary_tree(
    train: &Dataset,
    rows: Vec<usize>,
    params: &TreeParams,
    selector: &mut dyn FeatureSelector,
) -> TreeNode {
    let mut scratch = Vec::with_capacity(rows.len());
    grow_binary(train, rows, params, selector, 0, &mut scratch)
}

fn grow_binary(
    train: &Dataset,
    rows: Vec<usize>,
    params: &TreeParams,
    selector: &mut dyn FeatureSelector,
    depth: usize,
    scratch: &mut Vec<(f64, usize)>,
) -> TreeNode {
    let criterion = params.criterion;
    let dist = ClassDistribution::from_labels(rows.iter().map(|&r| train.labels[r]), train.n_classes());
    let impurity = criterion.impurity(&dist.counts, rows.len());
    if dist.is_pure() || !params.depth_allows(depth) || rows.len() < 2 * params.min_leaf {
        return TreeNode::leaf(dist, impurity);
    }
    let features = selector.select(train.n_features());
    let split = match best_split_with(train, &rows, &features, criterion, params.min_leaf, scratch) {
        Some(s) if s.decrease > params.min_gain => s,
        _ => return TreeNode::leaf(dist, impurity),
    };
    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&r| train.rows[r][split.feature_index] <= split.threshold);
    let children = vec![
        grow_binary(train, left, params, selector, depth + 1, scratch),
        grow_binary(train, right, params, selector, depth + 1, scratch),
    ];
    TreeNode {
        distribution: dist,
        impurity,
        kind: NodeKind::Internal {
            feature_index: split.feature_index,
            rule: SplitRule::Threshold {
                threshold: split.threshold,
            },
            decrease: split.decrease,
            children,
        },
    }
}

/// CART-style binary tree scored by gini impurity or entropy.
pub fn fit_cart(train: &Dataset, params: &TreeParams) -> Result<TreeModel, TreeError> {
    check_fit_inputs(train, params)?;
    if params.criterion == Criterion::InfoGain {
        return Err(TreeError::InvalidParams(
            "CART uses the gini or entropy criterion; info_gain selects ID3".into(),
        ));
    }
    let root = grow_binary_tree(train, (0..train.len()).collect(), params, &mut AllFeatures);
    Ok(TreeModel {
        root,
        params: params.clone(),
        feature_names: train.feature_names.clone(),
        class_names: train.class_names.clone(),
    })
}

/// Interior cut points of `bins` equal-frequency bins over `values`.
///
/// Cut `q` is the order statistic at rank `ceil(q * n / bins)`; duplicate
/// cuts and cuts at the maximum (which would leave an empty top bin) are
/// dropped, so a constant feature has no cuts.
pub fn equal_frequency_edges(values: &[f64], bins: usize) -> Vec<f64> {
    if values.is_empty() || bins < 2 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let max = sorted[n - 1];
    let mut edges: Vec<f64> = Vec::with_capacity(bins - 1);
    for q in 1..bins {
        let rank = (q * n).div_ceil(bins);
        let cut = sorted[rank.max(1) - 1];
        if cut < max && edges.last().is_none_or(|&last| cut > last) {
            edges.push(cut);
        }
    }
    edges
}

struct Id3Grower<'a> {
    train: &'a Dataset,
    params: &'a TreeParams,
    edges: Vec<Vec<f64>>,
    /// `binned[f][r]` is the bin of row `r` for feature `f`.
    binned: Vec<Vec<usize>>,
}

impl Id3Grower<'_> {
    fn grow(&self, rows: &[usize], used: &mut Vec<bool>, depth: usize) -> TreeNode {
        let n_classes = self.train.n_classes();
        let dist = ClassDistribution::from_labels(rows.iter().map(|&r| self.train.labels[r]), n_classes);
        let impurity = Criterion::InfoGain.impurity(&dist.counts, rows.len());
        if dist.is_pure() || !self.params.depth_allows(depth) {
            return TreeNode::leaf(dist, impurity);
        }

        let mut best: Option<(usize, f64, Vec<ClassDistribution>)> = None;
        for f in 0..self.train.n_features() {
            if used[f] || self.edges[f].is_empty() {
                continue;
            }
            let n_bins = self.edges[f].len() + 1;
            let mut children = vec![ClassDistribution::zeros(n_classes); n_bins];
            for &r in rows {
                children[self.binned[f][r]].counts[self.train.labels[r]] += 1;
            }
            let non_empty: Vec<&ClassDistribution> = children.iter().filter(|c| c.total() > 0).collect();
            if non_empty.len() < 2 || non_empty.iter().any(|c| c.total() < self.params.min_leaf) {
                continue;
            }
            let gain = information_gain(&dist, &children).expect("child totals match parent");
            if gain > TIE_EPSILON && best.as_ref().is_none_or(|b| gain > b.1 + TIE_EPSILON) {
                best = Some((f, gain, children));
            }
        }
        let (feature, gain, bin_dists) = match best {
            Some(b) if b.1 > self.params.min_gain => b,
            _ => return TreeNode::leaf(dist, impurity),
        };

        // one child per non-empty bin, in bin order
        let occupied: Vec<usize> = (0..bin_dists.len()).filter(|&b| bin_dists[b].total() > 0).collect();
        let mut child_of_bin = vec![usize::MAX; bin_dists.len()];
        for (child, &b) in occupied.iter().enumerate() {
            child_of_bin[b] = child;
        }
        let largest = (0..occupied.len())
            .rev()
            .max_by_key(|&c| bin_dists[occupied[c]].total())
            .expect("at least two occupied bins");
        for c in child_of_bin.iter_mut().filter(|c| **c == usize::MAX) {
            *c = largest;
        }

        used[feature] = true;
        let children = occupied
            .iter()
            .map(|&b| {
                let subset: Vec<usize> = rows.iter().copied().filter(|&r| self.binned[feature][r] == b).collect();
                self.grow(&subset, used, depth + 1)
            })
            .collect();
        used[feature] = false;

        TreeNode {
            distribution: dist,
            impurity,
            kind: NodeKind::Internal {
                feature_index: feature,
                rule: SplitRule::Bins {
                    edges: self.edges[feature].clone(),
                    child_of_bin,
                },
                decrease: gain,
                children,
            },
        }
    }
}

/// ID3 over globally discretized features with multiway splits.
pub fn fit_id3(train: &Dataset, params: &TreeParams) -> Result<TreeModel, TreeError> {
    check_fit_inputs(train, params)?;
    if params.id3_bins < 2 {
        return Err(TreeError::InvalidParams(format!(
            "ID3 needs at least 2 bins, got {}",
            params.id3_bins
        )));
    }
    let n_features = train.n_features();
    let edges: Vec<Vec<f64>> = (0..n_features)
        .map(|f| {
            let column: Vec<f64> = train.rows.iter().map(|r| r[f]).collect();
            equal_frequency_edges(&column, params.id3_bins)
        })
        .collect();
    let binned = (0..n_features)
        .map(|f| train.rows.iter().map(|r| bin_of(&edges[f], r[f])).collect())
        .collect();
    let grower = Id3Grower {
        train,
        params,
        edges,
        binned,
    };
    let rows: Vec<usize> = (0..train.len()).collect();
    let root = grower.grow(&rows, &mut vec![false; n_features], 0);
    let mut params = params.clone();
    params.criterion = Criterion::InfoGain;
    Ok(TreeModel {
        root,
        params,
        feature_names: train.feature_names.clone(),
        class_names: train.class_names.clone(),
    })
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn fmt_bin(edges: &[f64], b: usize) -> String {
    let lo = if b == 0 { "-inf".to_string() } else { format!("{:.4}", edges[b - 1]) };
    let hi = if b == edges.len() { "+inf".to_string() } else { format!("{:.4}", edges[b]) };
    format!("({lo}, {hi}]")
}

/// Graphviz rendering. Each node shows its split rule, its impurity under the
/// model's criterion, the sample count and the majority class; edges carry
/// the branch condition.
pub fn export_dot(model: &TreeModel) -> String {
    let mut out = String::from(
        "digraph tree {\n    node [shape=box, fontname=\"helvetica\"];\n    edge [fontname=\"helvetica\"];\n",
    );
    let measure = model.params.criterion.measure_name();
    let mut next_id = 1usize;
    let mut stack: Vec<(&TreeNode, usize)> = vec![(&model.root, 0)];
    while let Some((node, id)) = stack.pop() {
        let mut label = String::new();
        if let NodeKind::Internal { feature_index, rule, .. } = &node.kind {
            let name = &model.feature_names[*feature_index];
            let _ = match rule {
                SplitRule::Threshold { threshold } => writeln!(label, "{name} <= {threshold:.6}"),
                SplitRule::Bins { edges, .. } => writeln!(label, "{name} ({} bins)", edges.len() + 1),
            };
        }
        let _ = write!(
            label,
            "{measure} = {:.3}\nsamples = {}\nclass = {}",
            node.impurity,
            node.n_samples(),
            model.class_names[node.distribution.majority()]
        );
        let _ = writeln!(out, "    n{id} [label=\"{}\"];", dot_escape(&label).replace('\n', "\\n"));

        if let NodeKind::Internal { rule, children, .. } = &node.kind {
            let first_child = next_id;
            next_id += children.len();
            for c in 0..children.len() {
                let condition = match rule {
                    SplitRule::Threshold { threshold } if c == 0 => format!("<= {threshold:.6}"),
                    SplitRule::Threshold { threshold } => format!("> {threshold:.6}"),
                    SplitRule::Bins { edges, child_of_bin } => child_of_bin
                        .iter()
                        .enumerate()
                        .filter(|(_, &owner)| owner == c)
                        .map(|(b, _)| fmt_bin(edges, b))
                        .collect::<Vec<_>>()
                        .join(" | "),
                };
                let _ = writeln!(out, "    n{id} -> n{} [label=\"{}\"];", first_child + c, dot_escape(&condition));
            }
            for (c, child) in children.iter().enumerate().rev() {
                stack.push((child, first_child + c));
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn d(counts: &[usize]) -> ClassDistribution {
        ClassDistribution::new(counts.to_vec())
    }

    fn table(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Dataset {
        let features = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
        let classes = (0..n_classes).map(|c| format!("c{c}")).collect();
        Dataset::new(features, classes, rows, labels).unwrap()
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy(&d(&[4, 4])).unwrap(), 1.0);
        assert_eq!(entropy(&d(&[8, 0])).unwrap(), 0.0);
        assert!((entropy(&d(&[5; 13])).unwrap() - 13f64.log2()).abs() < 1e-12);
        assert!((entropy(&d(&[5; 13])).unwrap() - 3.7004).abs() < 1e-4);
        assert!(matches!(entropy(&d(&[0, 0])), Err(TreeError::EmptyDistribution)));
    }

    #[test]
    fn gini_cases() {
        assert_eq!(gini_impurity(&d(&[0, 7, 0])).unwrap(), 0.0);
        assert_eq!(gini_impurity(&d(&[5, 5])).unwrap(), 0.5);
        assert!((gini_impurity(&d(&[3; 13])).unwrap() - 12.0 / 13.0).abs() < 1e-12);
        assert!(gini_impurity(&d(&[])).is_err());
    }

    #[test]
    fn information_gain_cases() {
        assert_eq!(information_gain(&d(&[2, 2]), &[d(&[2, 0]), d(&[0, 2])]).unwrap(), 1.0);
        assert_eq!(information_gain(&d(&[4, 2]), &[d(&[2, 1]), d(&[2, 1])]).unwrap(), 0.0);
        let h42 = -(4.0f64 / 6.0 * (4.0f64 / 6.0).log2() + 2.0 / 6.0 * (2.0f64 / 6.0).log2());
        let h12 = -(1.0f64 / 3.0 * (1.0f64 / 3.0).log2() + 2.0 / 3.0 * (2.0f64 / 3.0).log2());
        let g = information_gain(&d(&[4, 2]), &[d(&[3, 0]), d(&[1, 2])]).unwrap();
        assert!((g - (h42 - 0.5 * h12)).abs() < 1e-12);
        assert!((g - 0.4591).abs() < 1e-4);
        assert!(matches!(
            information_gain(&d(&[4, 2]), &[d(&[3, 0])]),
            Err(TreeError::TotalsMismatch { parent: 6, children: 3 })
        ));
    }

    #[test]
    fn split_on_two_rows() {
        let ds = table(vec![vec![1.0], vec![2.0]], vec![0, 1], 2);
        let s = best_binary_split(&ds, &[0, 1], &[0], Criterion::Gini).unwrap();
        assert_eq!((s.feature_index, s.threshold, s.decrease), (0, 1.5, 0.5));
        let s = best_binary_split(&ds, &[0, 1], &[0], Criterion::Entropy).unwrap();
        assert_eq!(s.decrease, 1.0);

        let same = table(vec![vec![3.0, 1.0]; 4], vec![0, 1, 0, 1], 2);
        assert_eq!(best_binary_split(&same, &[0, 1, 2, 3], &[0, 1], Criterion::Gini), None);
    }

    #[test]
    fn split_ties_prefer_lowest_feature_then_threshold() {
        // both features separate the classes perfectly
        let ds = table(
            vec![vec![0.0, 5.0], vec![1.0, 6.0], vec![2.0, 7.0], vec![3.0, 8.0]],
            vec![0, 0, 1, 1],
            2,
        );
        let s = best_binary_split(&ds, &[0, 1, 2, 3], &[1, 0], Criterion::Gini).unwrap();
        assert_eq!((s.feature_index, s.threshold), (0, 1.5));

        // two equally good thresholds on one feature
        let ds = table(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 0], 2);
        let s = best_binary_split(&ds, &[0, 1, 2], &[0], Criterion::Gini).unwrap();
        assert_eq!(s.threshold, 0.5);
    }

    fn random_table(rng: &mut ChaCha8Rng) -> Dataset {
        let n_rows = rng.gen_range(2..=50);
        let n_features = rng.gen_range(1..=5);
        let n_classes = rng.gen_range(2..=4);
        let rows = (0..n_rows)
            .map(|_| (0..n_features).map(|_| rng.gen_range(0..8) as f64 * 0.5).collect())
            .collect();
        let labels = (0..n_rows).map(|_| rng.gen_range(0..n_classes)).collect();
        table(rows, labels, n_classes)
    }

    #[test]
    fn cart_separable_and_stumps() {
        let ds = table(
            vec![vec![0.1, 3.0], vec![0.4, 1.0], vec![0.9, 2.0], vec![1.3, 0.5], vec![2.0, 9.0]],
            vec![0, 0, 1, 1, 1],
            2,
        );
        let model = fit_cart(&ds, &TreeParams::default()).unwrap();
        assert_eq!(model.accuracy(&ds).unwrap(), 1.0);

        let stump = fit_cart(&ds, &TreeParams { max_depth: Some(0), ..Default::default() }).unwrap();
        assert!(stump.root.is_leaf());
        assert_eq!(stump.predict(&[0.0, 0.0]).unwrap().label, 1);

        assert!(matches!(
            fit_cart(&ds.subset(&[]), &TreeParams::default()),
            Err(TreeError::EmptyTrainingSet)
        ));
        assert!(fit_cart(&ds, &TreeParams { criterion: Criterion::InfoGain, ..Default::default() }).is_err());
    }

    #[test]
    fn min_leaf_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = random_table(&mut rng);
        let params = TreeParams { min_leaf: 3, ..Default::default() };
        let model = fit_cart(&ds, &params).unwrap();
        fn check(node: &TreeNode, min: usize, is_root: bool) {
            if !is_root {
                assert!(node.n_samples() >= min);
            }
            if let NodeKind::Internal { children, .. } = &node.kind {
                children.iter().for_each(|c| check(c, min, false));
            }
        }
        check(&model.root, 3, true);
    }

    #[test]
    fn single_leaf_prediction() {
        let model = TreeModel {
            root: TreeNode::leaf(d(&[3, 1]), 0.375),
            params: TreeParams::default(),
            feature_names: vec!["x".into()],
            class_names: vec!["a".into(), "b".into()],
        };
        let p = model.predict(&[42.0]).unwrap();
        assert_eq!(p.label, 0);
        assert_eq!(p.scores, vec![0.75, 0.25]);
        assert!(matches!(model.predict(&[1.0, 2.0]), Err(TreeError::Arity { expected: 1, found: 2 })));

        let tie = TreeNode::leaf(d(&[2, 2]), 0.5);
        assert_eq!(tie.distribution.majority(), 0);
    }

    #[test]
    fn id3_cases() {
        // feature 1 encodes the class, feature 0 is noise
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![((i * 7) % 5) as f64, (i % 2) as f64]).collect();
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let ds = table(rows, labels, 2);
        let model = fit_id3(&ds, &TreeParams::default()).unwrap();
        assert_eq!(model.root.depth(), 1);
        assert!(matches!(model.root.kind, NodeKind::Internal { feature_index: 1, .. }));
        assert_eq!(model.accuracy(&ds).unwrap(), 1.0);

        let flat = table(vec![vec![1.0, 2.0]; 5], vec![0, 1, 1, 0, 1], 2);
        let model = fit_id3(&flat, &TreeParams::default()).unwrap();
        assert!(model.root.is_leaf());
        assert_eq!(model.predict(&[1.0, 2.0]).unwrap().label, 1);

        assert!(fit_id3(&ds, &TreeParams { id3_bins: 1, ..Default::default() }).is_err());
    }

    #[test]
    fn id3_root_matches_hand_computed_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..24).map(|_| (0..4).map(|_| rng.gen_range(0..3) as f64).collect()).collect();
        let labels: Vec<usize> = rows.iter().map(|r| usize::from(r[2] + r[1] * 0.3 > 1.2)).collect();
        let ds = table(rows.clone(), labels.clone(), 2);
        let params = TreeParams { id3_bins: 3, ..Default::default() };
        let model = fit_id3(&ds, &params).unwrap();

        // direct oracle: group rows by the binned value, score each feature
        let h = |ls: &[usize]| {
            let n = ls.len() as f64;
            let p1 = ls.iter().filter(|&&l| l == 1).count() as f64 / n;
            [p1, 1.0 - p1].iter().filter(|&&p| p > 0.0).map(|p| -p * p.log2()).sum::<f64>()
        };
        let mut gains = Vec::new();
        for f in 0..4 {
            let edges = equal_frequency_edges(&rows.iter().map(|r| r[f]).collect::<Vec<_>>(), 3);
            let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for (r, &l) in rows.iter().zip(&labels) {
                groups.entry(edges.iter().filter(|&&e| e < r[f]).count()).or_default().push(l);
            }
            let weighted: f64 = groups.values().map(|g| g.len() as f64 / 24.0 * h(g)).sum();
            gains.push(h(&labels) - weighted);
        }
        let best = (0..4).fold(0, |b, f| if gains[f] > gains[b] + 1e-12 { f } else { b });
        match &model.root.kind {
            NodeKind::Internal { feature_index, decrease, .. } => {
                assert_eq!(*feature_index, best, "gains {gains:?}");
                assert!((decrease - gains[best]).abs() < 1e-12);
            }
            NodeKind::Leaf => panic!("expected a split"),
        }
    }

    #[test]
    fn id3_never_reuses_a_feature_on_a_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = random_table(&mut rng);
        let model = fit_id3(&ds, &TreeParams::default()).unwrap();
        fn walk(node: &TreeNode, path: &mut Vec<usize>) {
            if let NodeKind::Internal { feature_index, children, .. } = &node.kind {
                assert!(!path.contains(feature_index));
                path.push(*feature_index);
                children.iter().for_each(|c| walk(c, path));
                path.pop();
            }
        }
        walk(&model.root, &mut Vec::new());
    }

    #[test]
    fn bins_clamp_out_of_range_values() {
        let rule = SplitRule::Bins {
            edges: vec![0.5],
            child_of_bin: vec![0, 1],
        };
        assert_eq!(rule.route(-1e300), 0);
        assert_eq!(rule.route(f64::NEG_INFINITY), 0);
        assert_eq!(rule.route(0.5), 0);
        assert_eq!(rule.route(0.6), 1);
        assert_eq!(rule.route(1e300), 1);

        let model = TreeModel {
            root: TreeNode {
                distribution: d(&[2, 2]),
                impurity: 1.0,
                kind: NodeKind::Internal {
                    feature_index: 0,
                    rule,
                    decrease: 1.0,
                    children: vec![TreeNode::leaf(d(&[2, 0]), 0.0), TreeNode::leaf(d(&[0, 2]), 0.0)],
                },
            },
            params: TreeParams { criterion: Criterion::InfoGain, ..Default::default() },
            feature_names: vec!["x".into()],
            class_names: vec!["a".into(), "b".into()],
        };
        assert_eq!(model.predict(&[-1e300]).unwrap().label, 0);
    }

    #[test]
    fn empty_bins_route_to_the_largest_sibling() {
        // values cluster at the extremes, leaving middle bins empty at the child level
        let rows: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64, (i % 4) as f64]).collect();
        let labels: Vec<usize> = (0..16).map(|i| usize::from(i >= 12)).collect();
        let ds = table(rows, labels, 2);
        let model = fit_id3(&ds, &TreeParams { id3_bins: 4, ..Default::default() }).unwrap();
        if let NodeKind::Internal { rule: SplitRule::Bins { child_of_bin, .. }, children, .. } = &model.root.kind {
            assert!(child_of_bin.iter().all(|&c| c < children.len()));
        } else {
            panic!("expected a bin split");
        }
        assert_eq!(model.accuracy(&ds).unwrap(), 1.0);
    }

    #[test]
    fn equal_frequency_edge_cases() {
        assert_eq!(equal_frequency_edges(&[1.0, 2.0, 3.0, 4.0], 2), vec![2.0]);
        assert_eq!(equal_frequency_edges(&[1.0, 2.0, 3.0, 4.0], 4), vec![1.0, 2.0, 3.0]);
        assert!(equal_frequency_edges(&[7.0; 10], 8).is_empty());
        assert_eq!(equal_frequency_edges(&[0.0, 0.0, 0.0, 1.0], 4), vec![0.0]);
    }

    #[test]
    fn dot_shapes() {
        let leaf_model = TreeModel {
            root: TreeNode::leaf(d(&[3, 1]), 0.375),
            params: TreeParams::default(),
            feature_names: vec!["x".into()],
            class_names: vec!["a".into(), "b".into()],
        };
        let dot = export_dot(&leaf_model);
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("[label=").count(), 1);
        assert_eq!(dot.matches("->").count(), 0);

        let ds = table(vec![vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 1], 2);
        let dot = export_dot(&fit_cart(&ds, &TreeParams::default()).unwrap());
        assert_eq!(dot.matches("->").count(), 2);
        assert_eq!(dot.lines().filter(|l| l.contains("[label=") && !l.contains("->")).count(), 3);
        let root_line = dot.lines().find(|l| l.trim_start().starts_with("n0 [")).unwrap();
        assert!(root_line.contains("f0 <= 1.5"), "{root_line}");
        assert!(root_line.contains("gini = 0.444"), "{root_line}");
    }

    #[test]
    fn dot_root_for_balanced_thirteen_classes() {
        let rows: Vec<Vec<f64>> = (0..130).map(|i| vec![(i / 10) as f64, (i % 10) as f64]).collect();
        let labels: Vec<usize> = (0..130).map(|i| i / 10).collect();
        let ds = table(rows, labels, 13);
        let dot = export_dot(&fit_cart(&ds, &TreeParams::default()).unwrap());
        let root_line = dot.lines().find(|l| l.trim_start().starts_with("n0 [")).unwrap();
        assert!(root_line.contains("gini = 0.923"), "{root_line}");
    }

    proptest! {
        #[test]
        fn impurities_are_bounded(counts in prop::collection::vec(0usize..50, 2..8)) {
            prop_assume!(counts.iter().sum::<usize>() > 0);
            let dist = d(&counts);
            let c = counts.len() as f64;
            let h = entropy(&dist).unwrap();
            let g = gini_impurity(&dist).unwrap();
            prop_assert!(h >= 0.0 && h <= c.log2() + 1e-12);
            prop_assert!(g >= 0.0 && g <= 1.0 - 1.0 / c + 1e-12);
            prop_assert_eq!(h == 0.0, dist.is_pure());
            prop_assert_eq!(g == 0.0, dist.is_pure());
        }

        #[test]
        fn monotone_rescaling_keeps_training_predictions(seed: u64, feature in 0usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ds = random_table(&mut rng);
            let f = feature % ds.n_features();
            let mut scaled = ds.clone();
            for row in &mut scaled.rows {
                row[f] = (row[f] * 3.0 + 1.0).exp();
            }
            let a = fit_cart(&ds, &TreeParams::default()).unwrap();
            let b = fit_cart(&scaled, &TreeParams::default()).unwrap();
            for i in 0..ds.len() {
                prop_assert_eq!(a.predict_label(&ds.rows[i]).unwrap(), b.predict_label(&scaled.rows[i]).unwrap());
            }
        }

        #[test]
        fn fully_grown_cart_memorizes_consistent_tables(seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..40);
            // distinct rows guarantee no conflicting duplicates
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![rng.gen_range(0..4) as f64, i as f64 * 0.25]).collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let ds = table(rows, labels, 3);
            for criterion in [Criterion::Gini, Criterion::Entropy] {
                let model = fit_cart(&ds, &TreeParams { criterion, ..Default::default() }).unwrap();
                prop_assert_eq!(model.accuracy(&ds).unwrap(), 1.0);
            }
        }

        #[test]
        fn predict_is_total(seed: u64, probe in prop::collection::vec(-1e6f64..1e6, 3)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
            let labels: Vec<usize> = (0..30).map(|_| rng.gen_range(0..3)).collect();
            let ds = table(rows, labels, 3);
            for model in [fit_cart(&ds, &TreeParams::default()).unwrap(), fit_id3(&ds, &TreeParams::default()).unwrap()] {
                let p = model.predict(&probe).unwrap();
                prop_assert!(p.label < 3);
                prop_assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert_eq!(p.clone(), model.predict(&probe).unwrap());
            }
        }
    }
}
