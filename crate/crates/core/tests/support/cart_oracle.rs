//! Brute-force best-split reference tree, written without the engine's
//! sorted sweep or running sums.

use cellmine_core::ml::{DecisionTree, Node, Task, TreeParams};

#[derive(Debug, Clone, PartialEq)]
pub enum OracleNode {
    Split { feature: usize, threshold: f64, left: Box<OracleNode>, right: Box<OracleNode> },
    Leaf(f64),
}

fn impurity(ys: &[f64], task: Task) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    let n = ys.len() as f64;
    match task {
        Task::Regression => {
            let mean = ys.iter().sum::<f64>() / n;
            ys.iter().map(|y| (y - mean) * (y - mean)).sum()
        }
        Task::Classification => {
            let p1 = ys.iter().filter(|y| **y == 1.0).count() as f64 / n;
            n * (1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1))
        }
    }
}

fn leaf_value(ys: &[f64]) -> f64 {
    ys.iter().sum::<f64>() / ys.len() as f64
}

pub fn oracle_tree(x: &[Vec<f64>], y: &[f64], task: Task, p: &TreeParams, depth: usize) -> OracleNode {
    let leaf = OracleNode::Leaf(leaf_value(y));
    if depth >= p.max_depth || x.len() < p.min_samples_split.max(2) {
        return leaf;
    }
    let parent = impurity(y, task);
    let tol = 1e-10 * parent.max(1.0);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut values: Vec<f64> = x.iter().map(|r| r[f]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let t = if t < w[1] { t } else { w[0] };
            let left: Vec<f64> = x.iter().zip(y).filter(|(r, _)| r[f] <= t).map(|(_, v)| *v).collect();
            let right: Vec<f64> = x.iter().zip(y).filter(|(r, _)| r[f] > t).map(|(_, v)| *v).collect();
            if left.len() < p.min_samples_leaf || right.len() < p.min_samples_leaf {
                continue;
            }
            let gain = parent - impurity(&left, task) - impurity(&right, task);
            let take = match best {
                None => gain > tol,
                Some((_, _, g)) => gain > g + tol,
            };
            if take {
                best = Some((f, t, gain));
            }
        }
    }
    let Some((feature, threshold, _)) = best else { return leaf };
    let (mut lx, mut ly, mut rx, mut ry) = (vec![], vec![], vec![], vec![]);
    for (r, v) in x.iter().zip(y) {
        if r[feature] <= threshold {
            lx.push(r.clone());
            ly.push(*v);
        } else {
            rx.push(r.clone());
            ry.push(*v);
        }
    }
    OracleNode::Split {
        feature,
        threshold,
        left: Box::new(oracle_tree(&lx, &ly, task, p, depth + 1)),
        right: Box::new(oracle_tree(&rx, &ry, task, p, depth + 1)),
    }
}

/// Node-for-node comparison. Thresholds may differ in the last bits since
/// both lie strictly between the same pair of observed values.
pub fn same_tree(engine: &DecisionTree, i: usize, oracle: &OracleNode) -> Result<(), String> {
    match (&engine.nodes[i], oracle) {
        (Node::Leaf { value, .. }, OracleNode::Leaf(v)) => {
            if (value - v).abs() <= 1e-9 * v.abs().max(1.0) {
                Ok(())
            } else {
                Err(format!("node {i}: leaf {value} vs {v}"))
            }
        }
        (
            Node::Split { feature, threshold, left, right },
            OracleNode::Split { feature: f, threshold: t, left: l, right: r },
        ) => {
            if feature != f || (threshold - t).abs() > 1e-12 * t.abs().max(1.0) {
                return Err(format!("node {i}: split ({feature}, {threshold}) vs ({f}, {t})"));
            }
            same_tree(engine, *left, l)?;
            same_tree(engine, *right, r)
        }
        (a, b) => Err(format!("node {i}: {a:?} vs {b:?}")),
    }
}
