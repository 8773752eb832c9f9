use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::BinaryLabel;
use crate::distribution::ProbabilityDistribution;
use crate::error::{Error, Result};
use crate::features::SparseCountVector;
use crate::rng::rng_for;

use super::check_training_set;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// ceil(sqrt(|V|)) candidates per node.
    Sqrt,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub seed: u64,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            seed: 0,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Bootstrap-weighted class counts of the samples reaching the leaf.
    Leaf { counts: [u64; 2] },
}

/// CART tree over count features; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
    pub dimension: usize,
}

/// Column-major view of the training matrix: for each feature, the
/// `(document, count)` pairs with non-zero count.
struct Columns {
    columns: Vec<Vec<(u32, u32)>>,
}

impl Columns {
    fn new(x: &[SparseCountVector], dimension: usize) -> Self {
        let mut columns = vec![Vec::new(); dimension];
        for (doc, v) in x.iter().enumerate() {
            for &(f, c) in v.entries() {
                columns[f].push((doc as u32, c));
            }
        }
        Columns { columns }
    }
}

/// Weighted Gini impurity of a split, up to the common factor 1/n, as an
/// exact fraction `num / den` of `sum_k A_k / n_k` with
/// `A_k = n_k^2 - sum_c n_kc^2`.
#[derive(Debug, Clone, Copy)]
struct Impurity {
    num: u128,
    den: u128,
}

impl Impurity {
    fn node(counts: [u64; 2]) -> Self {
        let n = (counts[0] + counts[1]) as u128;
        let a = n * n - (counts[0] as u128).pow(2) - (counts[1] as u128).pow(2);
        Impurity { num: a, den: n }
    }

    fn split(left: [u64; 2], right: [u64; 2]) -> Self {
        let l = Impurity::node(left);
        let r = Impurity::node(right);
        Impurity {
            num: l.num * r.den + r.num * l.den,
            den: l.den * r.den,
        }
    }

    fn cmp(&self, other: &Impurity) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: Impurity,
}

fn sub(a: [u64; 2], b: [u64; 2]) -> [u64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn add(a: [u64; 2], b: [u64; 2]) -> [u64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

struct TreeBuilder<'a> {
    columns: &'a Columns,
    labels: &'a [usize],
    weights: &'a [u64],
    in_node: Vec<bool>,
    values: Vec<(u32, u64, usize)>,
}

impl TreeBuilder<'_> {
    fn counts(&self, docs: &[u32]) -> [u64; 2] {
        let mut counts = [0u64; 2];
        for &d in docs {
            counts[self.labels[d as usize]] += self.weights[d as usize];
        }
        counts
    }

    /// Non-zero values of `feature` among the marked documents, sorted by
    /// value then document.
    fn gather(&mut self, feature: usize) {
        self.values.clear();
        for &(doc, count) in &self.columns.columns[feature] {
            if self.in_node[doc as usize] {
                self.values.push((count, self.weights[doc as usize], self.labels[doc as usize]));
            }
        }
        self.values.sort_unstable_by_key(|&(count, _, _)| count);
    }

    /// Best threshold of one feature. Thresholds are midpoints between
    /// consecutive distinct values, scanned in ascending order; the first
    /// strictly best one wins.
    fn best_threshold(&mut self, feature: usize, node_counts: [u64; 2]) -> Option<Candidate> {
        self.gather(feature);
        if self.values.is_empty() {
            return None;
        }
        let nonzero: [u64; 2] = self.values.iter().fold([0, 0], |mut acc, &(_, w, c)| {
            acc[c] += w;
            acc
        });
        let mut left = sub(node_counts, nonzero);
        let mut prev_value = 0u32;
        let mut best: Option<Candidate> = None;
        let mut i = 0;
        while i < self.values.len() {
            let value = self.values[i].0;
            if left[0] + left[1] > 0 {
                let right = sub(node_counts, left);
                let impurity = Impurity::split(left, right);
                if best.as_ref().is_none_or(|b| impurity.cmp(&b.impurity) == Ordering::Less) {
                    best = Some(Candidate {
                        feature,
                        threshold: (prev_value as f64 + value as f64) / 2.0,
                        impurity,
                    });
                }
            }
            while i < self.values.len() && self.values[i].0 == value {
                let (_, w, c) = self.values[i];
                left[c] += w;
                i += 1;
            }
            prev_value = value;
        }
        best
    }

    fn grow(mut self, root: Vec<u32>, max_features: usize, rng: &mut impl Rng) -> DecisionTree {
        let dimension = self.columns.columns.len();
        let mut nodes = vec![Node::Leaf { counts: [0, 0] }];
        let mut stack = vec![(0usize, root)];
        while let Some((slot, docs)) = stack.pop() {
            let counts = self.counts(&docs);
            if counts[0] == 0 || counts[1] == 0 || dimension == 0 {
                nodes[slot] = Node::Leaf { counts };
                continue;
            }
            let candidates: Vec<usize> = if max_features >= dimension {
                (0..dimension).collect()
            } else {
                sample(rng, dimension, max_features).into_vec()
            };

            for &d in &docs {
                self.in_node[d as usize] = true;
            }
            let mut best: Option<Candidate> = None;
            for &feature in &candidates {
                if let Some(c) = self.best_threshold(feature, counts) {
                    if best.as_ref().is_none_or(|b| c.impurity.cmp(&b.impurity) == Ordering::Less) {
                        best = Some(c);
                    }
                }
            }
            let parent = Impurity::node(counts);
            let split = best.filter(|b| b.impurity.cmp(&parent) == Ordering::Less);

            let Some(split) = split else {
                for &d in &docs {
                    self.in_node[d as usize] = false;
                }
                nodes[slot] = Node::Leaf { counts };
                continue;
            };
            let mut goes_right = Vec::new();
            for &(doc, count) in &self.columns.columns[split.feature] {
                if self.in_node[doc as usize] && count as f64 > split.threshold {
                    goes_right.push(doc);
                }
            }
            for &d in &docs {
                self.in_node[d as usize] = false;
            }
            goes_right.sort_unstable();
            let (left_docs, right_docs): (Vec<u32>, Vec<u32>) =
                docs.into_iter().partition(|d| goes_right.binary_search(d).is_err());

            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf { counts: [0, 0] });
            nodes.push(Node::Leaf { counts: [0, 0] });
            nodes[slot] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            debug_assert_eq!(add(self.counts(&left_docs), self.counts(&right_docs)), counts);
            stack.push((right, right_docs));
            stack.push((left, left_docs));
        }
        DecisionTree { nodes }
    }
}

impl DecisionTree {
    /// Grow one tree on weighted samples (weights are bootstrap multiplicities;
    /// zero-weight documents are ignored).
    pub fn fit(
        x: &[SparseCountVector],
        y: &[BinaryLabel],
        weights: &[u64],
        max_features: usize,
        rng: &mut impl Rng,
    ) -> Result<DecisionTree> {
        let dimension = check_training_set(x, y)?;
        if weights.len() != x.len() {
            return Err(Error::InvalidArgument("one weight per document required".into()));
        }
        let columns = Columns::new(x, dimension);
        let labels: Vec<usize> = y.iter().map(|l| l.index()).collect();
        Ok(grow_tree(&columns, &labels, weights, max_features, rng))
    }

    pub fn leaf_counts(&self, x: &SparseCountVector) -> [u64; 2] {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x.get(*feature) as f64 <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_proba(&self, x: &SparseCountVector) -> ProbabilityDistribution {
        ProbabilityDistribution::from_weights(self.leaf_counts(x).map(|c| c as f64))
    }

    pub fn depth(&self) -> usize {
        fn depth(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + depth(nodes, *left).max(depth(nodes, *right)),
            }
        }
        depth(&self.nodes, 0)
    }
}

fn grow_tree(columns: &Columns, labels: &[usize], weights: &[u64], max_features: usize, rng: &mut impl Rng) -> DecisionTree {
    let root: Vec<u32> = (0..labels.len() as u32).filter(|&d| weights[d as usize] > 0).collect();
    let builder = TreeBuilder {
        columns,
        labels,
        weights,
        in_node: vec![false; labels.len()],
        values: Vec::new(),
    };
    builder.grow(root, max_features, rng)
}

fn max_features_for(params: &ForestParams, dimension: usize) -> usize {
    match params.max_features {
        MaxFeatures::All => dimension,
        MaxFeatures::Sqrt => (dimension as f64).sqrt().ceil() as usize,
    }
}

/// Each tree draws its bootstrap sample and candidate features from its own
/// generator keyed by `(seed, tree index)`, so trees can be grown in any
/// order or in parallel with identical results.
pub fn train_random_forest(x: &[SparseCountVector], y: &[BinaryLabel], params: ForestParams) -> Result<RfModel> {
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
    }
    let dimension = check_training_set(x, y)?;
    let columns = Columns::new(x, dimension);
    let labels: Vec<usize> = y.iter().map(|l| l.index()).collect();
    let max_features = max_features_for(&params, dimension);
    let n = x.len();

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(params.seed, &[0xF0E57, t as u64]);
            let mut weights = vec![0u64; n];
            if params.bootstrap {
                for _ in 0..n {
                    weights[rng.random_range(0..n)] += 1;
                }
            } else {
                weights.fill(1);
            }
            grow_tree(&columns, &labels, &weights, max_features, &mut rng)
        })
        .collect();
    Ok(RfModel {
        trees,
        params,
        dimension,
    })
}

/// Mean of per-tree leaf class frequencies.
pub fn predict_rf(model: &RfModel, x: &SparseCountVector) -> Result<ProbabilityDistribution> {
    x.check_dimension(model.dimension)?;
    let mut sum = [0.0f64; 2];
    for tree in &model.trees {
        let p = tree.predict_proba(x);
        sum[0] += p.probs()[0];
        sum[1] += p.probs()[1];
    }
    Ok(ProbabilityDistribution::from_weights(sum))
}
