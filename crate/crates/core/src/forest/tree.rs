use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{check_training, ForestError, Matrix, TreeParams};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64, count: usize },
}

/// A CART regression tree stored as a flat node list, root first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
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

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, count } => Some((*value, *count)),
            Node::Split { .. } => None,
        })
    }

    /// Number of splits on each feature.
    pub fn split_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_features];
        for n in &self.nodes {
            if let Node::Split { feature, .. } = n {
                counts[*feature] += 1;
            }
        }
        counts
    }
}

/// Fits one tree on all rows of `x`.
pub fn fit_tree(x: &Matrix, y: &[f64], params: &TreeParams, seed: u64) -> Result<RegressionTree, ForestError> {
    check_training(x, y)?;
    params.check()?;
    let mut rows: Vec<usize> = (0..x.rows()).collect();
    Ok(fit_tree_on_rows(x, y, &mut rows, params, seed))
}

/// Fits a tree on `rows` (indices into `x`, repeats allowed). Inputs must
/// already be validated.
pub(crate) fn fit_tree_on_rows(
    x: &Matrix,
    y: &[f64],
    rows: &mut [usize],
    params: &TreeParams,
    seed: u64,
) -> RegressionTree {
    let mut b = Builder {
        x,
        y,
        params,
        seed,
        n_candidates: params.max_features.resolve(x.cols()),
        nodes: Vec::new(),
        buf: Vec::with_capacity(rows.len()),
    };
    b.build(rows, 0);
    RegressionTree { nodes: b.nodes, n_features: x.cols() }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: &'a TreeParams,
    seed: u64,
    n_candidates: usize,
    nodes: Vec<Node>,
    buf: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let idx = self.nodes.len();
        let n = rows.len();
        let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for &r in rows.iter() {
            let v = self.y[r];
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let leaf = Node::Leaf { value: (sum / n as f64).clamp(lo, hi), count: n };
        self.nodes.push(leaf);

        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf || lo == hi {
            return idx;
        }
        let mean = sum / n as f64;
        let Some(best) = self.find_split(rows, idx, mean) else {
            return idx;
        };

        let mut split = 0;
        for i in 0..n {
            if self.x.get(rows[i], best.feature) <= best.threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(split);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[idx] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        idx
    }

    /// Best variance-reducing split over a feature subset drawn from a
    /// generator seeded by `(tree seed, node index)`. Ties keep the lowest
    /// feature index, then the lowest threshold.
    fn find_split(&mut self, rows: &[usize], node_idx: usize, mean: f64) -> Option<BestSplit> {
        let d = self.x.cols();
        let mut features: Vec<usize> = if self.n_candidates >= d {
            (0..d).collect()
        } else {
            let mut rng = seed::child_rng(self.seed, node_idx as u64 + 1);
            sample(&mut rng, d, self.n_candidates).into_vec()
        };
        features.sort_unstable();

        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        let node_sse: f64 = rows.iter().map(|&r| (self.y[r] - mean).powi(2)).sum();
        let mut best: Option<BestSplit> = None;
        for &f in &features {
            self.buf.clear();
            self.buf.extend(rows.iter().map(|&r| (self.x.get(r, f), self.y[r] - mean)));
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let total: f64 = self.buf.iter().map(|p| p.1).sum();
            let mut left_sum = 0.0;
            for p in 0..n - 1 {
                left_sum += self.buf[p].1;
                let n_left = p + 1;
                let n_right = n - n_left;
                if n_left < min_leaf {
                    continue;
                }
                if n_right < min_leaf {
                    break;
                }
                let (a, b) = (self.buf[p].0, self.buf[p + 1].0);
                if !(a < b) {
                    continue;
                }
                let right_sum = total - left_sum;
                // SSE reduction of the split, with targets centered on the node mean.
                let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64
                    - total * total / n as f64;
                if gain > 1e-14 * node_sse && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = a + (b - a) / 2.0;
                    if !(threshold < b) {
                        threshold = a;
                    }
                    best = Some(BestSplit { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}
