//! Random forest of Gini-split decision trees on bootstrap resamples.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::logreg::validate_training;
use crate::error::{check_width, Result};
use crate::seed::{self, Part, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        m.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_features: MaxFeatures,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

/// Nodes in creation order; index 0 is the root and children always follow their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub classes: usize,
    pub width: usize,
    pub config: ForestConfig,
    /// Out-of-bag accuracy; `None` without bootstrap or when no row was ever left out.
    pub oob_accuracy: Option<f64>,
}

/// Gini impurity `1 - sum p_k^2` of a class histogram.
pub fn gini(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn sum_sq(counts: &[u32]) -> f64 {
    counts.iter().map(|&c| (c as f64) * (c as f64)).sum()
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [usize],
    classes: usize,
    mtry: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn histogram(&self, rows: &[usize]) -> Vec<u32> {
        let mut h = vec![0u32; self.classes];
        for &r in rows {
            h[self.y[r]] += 1;
        }
        h
    }

    /// Best (feature, threshold, left size) over a random feature subset.
    /// Maximizes `sum_k L_k^2 / |L| + sum_k R_k^2 / |R|`, which is equivalent to the
    /// largest weighted Gini decrease; ties keep the first candidate found.
    fn best_split(&self, rows: &mut [usize], counts: &[u32], rng: &mut Rng) -> Option<(usize, f64)> {
        let n = rows.len();
        let parent = sum_sq(counts) / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut features = sample(rng, self.x.ncols(), self.mtry).into_vec();
        features.sort_unstable();
        for f in features {
            let col = self.x.column(f);
            rows.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut left = vec![0u32; self.classes];
            let mut right = counts.to_vec();
            for i in 0..n - 1 {
                let c = self.y[rows[i]];
                left[c] += 1;
                right[c] -= 1;
                let (lo, hi) = (col[rows[i]], col[rows[i + 1]]);
                let nl = i + 1;
                if lo == hi || nl < self.min_leaf || n - nl < self.min_leaf {
                    continue;
                }
                let score = sum_sq(&left) / nl as f64 + sum_sq(&right) / (n - nl) as f64;
                if best.is_none_or(|(s, _, _)| score > s) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((score, f, threshold));
                }
            }
        }
        best.filter(|(s, _, _)| *s > parent * (1.0 + 1e-12))
            .map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, rows: &mut [usize], rng: &mut Rng) -> usize {
        let counts = self.histogram(rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: counts.clone() });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || rows.len() < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, &counts, rng) else {
            return id;
        };
        let col = self.x.column(feature);
        rows.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        let cut = rows.partition_point(|&r| col[r] <= threshold);
        let (l, r) = rows.split_at_mut(cut);
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl Tree {
    pub fn leaf(&self, row: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax_counts(self.leaf(row))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn argmax_counts(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

fn fit_tree(x: &DMatrix<f64>, y: &[usize], classes: usize, cfg: &ForestConfig, index: usize) -> (Tree, Vec<bool>) {
    let n = x.nrows();
    let mut rng = seed::stream(cfg.seed, &[Part::Tag("forest/tree"), Part::Num(index as u64)]);
    let mut rows: Vec<usize> = if cfg.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut in_bag = vec![false; n];
    rows.iter().for_each(|&r| in_bag[r] = true);
    let mut builder = Builder {
        x,
        y,
        classes,
        mtry: cfg.max_features.resolve(x.ncols()),
        min_leaf: cfg.min_leaf.max(1),
        nodes: Vec::new(),
    };
    builder.grow(&mut rows, &mut rng);
    (Tree { nodes: builder.nodes }, in_bag)
}

pub fn forest_fit(x: &DMatrix<f64>, y: &[usize], classes: usize, cfg: &ForestConfig) -> Result<ForestModel> {
    validate_training(x, y, classes)?;
    if cfg.trees == 0 {
        return Err(crate::error::config("a forest needs at least one tree"));
    }
    let n = x.nrows();
    let mut trees = Vec::with_capacity(cfg.trees);
    let mut oob_votes = vec![vec![0u32; classes]; n];
    for t in 0..cfg.trees {
        let (tree, in_bag) = fit_tree(x, y, classes, cfg, t);
        if cfg.bootstrap {
            for i in (0..n).filter(|&i| !in_bag[i]) {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                oob_votes[i][tree.predict_row(&row)] += 1;
            }
        }
        trees.push(tree);
    }
    let voted: Vec<(usize, usize)> = oob_votes
        .iter()
        .enumerate()
        .filter(|(_, v)| v.iter().any(|&c| c > 0))
        .map(|(i, v)| (argmax_counts(v), y[i]))
        .collect();
    let oob_accuracy = (!voted.is_empty())
        .then(|| voted.iter().filter(|(p, t)| p == t).count() as f64 / voted.len() as f64);
    Ok(ForestModel {
        trees,
        classes,
        width: x.ncols(),
        config: cfg.clone(),
        oob_accuracy,
    })
}

/// Majority vote of the trees' leaf argmaxes; ties go to the lowest class.
pub fn forest_predict(model: &ForestModel, x: &DMatrix<f64>) -> Result<Vec<usize>> {
    check_width(model.width, x.ncols())?;
    let mut row = vec![0.0; x.ncols()];
    let mut out = Vec::with_capacity(x.nrows());
    for i in 0..x.nrows() {
        row.iter_mut().zip(x.row(i).iter()).for_each(|(r, v)| *r = *v);
        let mut votes = vec![0u32; model.classes];
        for tree in &model.trees {
            votes[tree.predict_row(&row)] += 1;
        }
        out.push(argmax_counts(&votes));
    }
    Ok(out)
}

/// Indented text rendering of every tree.
pub fn dump_trees(model: &ForestModel) -> String {
    fn node(out: &mut String, nodes: &[Node], i: usize, depth: usize) {
        let pad = "  ".repeat(depth);
        match &nodes[i] {
            Node::Leaf { counts } => {
                let _ = writeln!(out, "{pad}leaf {counts:?} -> {}", argmax_counts(counts));
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let _ = writeln!(out, "{pad}x[{feature}] <= {threshold}");
                node(out, nodes, *left, depth + 1);
                let _ = writeln!(out, "{pad}x[{feature}] > {threshold}");
                node(out, nodes, *right, depth + 1);
            }
        }
    }
    let mut out = String::new();
    for (t, tree) in model.trees.iter().enumerate() {
        let _ = writeln!(out, "tree {t} ({} nodes, depth {})", tree.nodes.len(), tree.depth());
        node(&mut out, &tree.nodes, 0, 1);
    }
    out
}
