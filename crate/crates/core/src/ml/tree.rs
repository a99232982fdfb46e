//! CART with exhaustive threshold search.
//!
//! Splits send `x <= threshold` left. Thresholds are midpoints between
//! adjacent distinct values. Candidates are scanned by feature index, then
//! by threshold, and a later candidate replaces the incumbent only when its
//! gain is larger by more than `1e-10 * max(1, parent impurity)`, so ties go
//! to the lowest feature and threshold. A node splits only when the best
//! gain exceeds that same margin.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Task;

pub type TreeRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 12, min_samples_split: 2, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Regression: mean target (or boosting step). Classification: share
    /// of class 1, with the class counts.
    Leaf {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        counts: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub task: Task,
    pub n_features: usize,
    /// Preorder; node 0 is the root.
    pub nodes: Vec<Node>,
}

pub(crate) fn split_tolerance(parent: f64) -> f64 {
    1e-10 * parent.max(1.0)
}

/// Midpoint that always separates `lo < hi` under the `<=` rule.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

struct Impurity {
    task: Task,
    shift: f64,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    n: f64,
    sum: f64,
    sq: f64,
}

impl Stats {
    fn add(&mut self, z: f64) {
        self.n += 1.0;
        self.sum += z;
        self.sq += z * z;
    }

    fn minus(self, o: Stats) -> Stats {
        Stats { n: self.n - o.n, sum: self.sum - o.sum, sq: self.sq - o.sq }
    }
}

impl Impurity {
    /// Total impurity of a node: SSE for regression, `n * gini` for
    /// classification (where `sum` counts class 1).
    fn total(&self, s: Stats) -> f64 {
        if s.n == 0.0 {
            return 0.0;
        }
        match self.task {
            Task::Regression => (s.sq - s.sum * s.sum / s.n).max(0.0),
            Task::Classification => {
                let ones = s.sum;
                let zeros = s.n - ones;
                s.n - (ones * ones + zeros * zeros) / s.n
            }
        }
    }

    fn value(&self, y: f64) -> f64 {
        match self.task {
            Task::Regression => y - self.shift,
            Task::Classification => y,
        }
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    task: Task,
    params: TreeParams,
    max_features: Option<usize>,
    rng: Option<&'a mut TreeRng>,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let n = rows.len() as f64;
        match self.task {
            Task::Regression => Node::Leaf { value: rows.iter().map(|&i| self.y[i]).sum::<f64>() / n, counts: None },
            Task::Classification => {
                let ones = rows.iter().filter(|&&i| self.y[i] == 1.0).count() as f64;
                Node::Leaf { value: ones / n, counts: Some([n - ones, ones]) }
            }
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x[0].len();
        match (self.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < d => {
                let mut f = sample(rng, d, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64)> {
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        let imp = Impurity { task: self.task, shift: mean };
        let mut all = Stats::default();
        for &i in rows {
            all.add(imp.value(self.y[i]));
        }
        let parent = imp.total(all);
        let tol = split_tolerance(parent);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = rows.to_vec();
        for f in self.candidate_features() {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = Stats::default();
            for k in 1..sorted.len() {
                left.add(imp.value(self.y[sorted[k - 1]]));
                let (lo, hi) = (self.x[sorted[k - 1]][f], self.x[sorted[k]][f]);
                if lo == hi || k < min_leaf || sorted.len() - k < min_leaf {
                    continue;
                }
                let gain = parent - imp.total(left) - imp.total(all.minus(left));
                let better = match best {
                    None => gain > tol,
                    Some((_, _, g)) => gain > g + tol,
                };
                if better {
                    best = Some((f, midpoint(lo, hi), gain));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, rows: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(self.leaf(rows));
        if depth >= self.params.max_depth || rows.len() < self.params.min_samples_split.max(2) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

/// Fits one tree on all rows and all features.
pub fn fit_cart(x: &[Vec<f64>], y: &[f64], task: Task, params: &TreeParams) -> DecisionTree {
    fit_tree(x, y, task, params, None, None)
}

/// Fits one tree; with `max_features` and an rng, each split considers a
/// random subset of that many features.
pub fn fit_tree(
    x: &[Vec<f64>],
    y: &[f64],
    task: Task,
    params: &TreeParams,
    max_features: Option<usize>,
    rng: Option<&mut TreeRng>,
) -> DecisionTree {
    assert!(!x.is_empty() && x.len() == y.len(), "fit_tree needs matching non-empty inputs");
    let mut b = Builder { x, y, task, params: *params, max_features, rng, nodes: Vec::new() };
    let rows: Vec<usize> = (0..x.len()).collect();
    b.grow(&rows, 0);
    DecisionTree { task, n_features: x[0].len(), nodes: b.nodes }
}

impl DecisionTree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right }
                }
                Node::Leaf { .. } => return i,
            }
        }
    }

    /// Leaf value: regression estimate or class-1 share.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Majority class of the leaf, ties to class 0.
    pub fn predict_class(&self, row: &[f64]) -> f64 {
        if self.predict_row(row) > 0.5 {
            1.0
        } else {
            0.0
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Replaces leaf values, used by boosting for Newton steps.
    pub(crate) fn set_leaf_value(&mut self, leaf: usize, v: f64) {
        if let Node::Leaf { value, .. } = &mut self.nodes[leaf] {
            *value = v;
        }
    }
}
