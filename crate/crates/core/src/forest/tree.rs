//! Greedy CART regression trees (squared-error criterion).

use rand::seq::index;
use rand::Rng;

use super::N_INPUTS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: u8,
        threshold: f64,
        left: u32,
        right: u32,
        /// Reduction in summed squared error achieved by this split.
        gain: f64,
    },
}

/// Nodes stored flat in pre-order; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        Tree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64; N_INPUTS]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[feature as usize] <= threshold { left as usize } else { right as usize };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: usize,
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

struct Grower<'a, R> {
    x: &'a [[f64; N_INPUTS]],
    y: &'a [f64],
    params: &'a GrowParams,
    rng: R,
    nodes: Vec<Node>,
    // (feature value, target) scratch for the sweep
    scratch: Vec<(f64, f64)>,
}

/// Grows one tree over the sample indices `rows` (may contain repeats).
pub(crate) fn grow<R: Rng>(x: &[[f64; N_INPUTS]], y: &[f64], rows: Vec<usize>, params: &GrowParams, rng: R) -> Tree {
    let mut g = Grower { x, y, params, rng, nodes: Vec::new(), scratch: Vec::new() };
    g.build(rows, 0);
    Tree { nodes: g.nodes }
}

impl<R: Rng> Grower<'_, R> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let mean = sum / n;
        self.nodes.push(Node::Leaf { value: mean });

        if depth >= self.params.max_depth || rows.len() < self.params.min_samples_split {
            return id;
        }
        let first = self.y[rows[0]];
        if rows.iter().all(|&r| self.y[r] == first) {
            return id;
        }
        let parent_sse: f64 = rows.iter().map(|&r| (self.y[r] - mean).powi(2)).sum();
        let Some(best) = self.best_split(&rows, sum) else {
            return id;
        };
        let gain = best.score - sum * sum / n;
        if gain.is_nan() || gain <= parent_sse * 1e-12 {
            return id;
        }

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x[r][best.feature] <= best.threshold);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id as usize] =
            Node::Split { feature: best.feature as u8, threshold: best.threshold, left, right, gain };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        if self.params.max_features >= N_INPUTS {
            return (0..N_INPUTS).collect();
        }
        let mut picked = index::sample(&mut self.rng, N_INPUTS, self.params.max_features).into_vec();
        picked.sort_unstable();
        picked
    }

    /// Maximizes `S_l^2 / n_l + S_r^2 / n_r`, which is the SSE reduction plus
    /// the constant `S^2 / n`. Ties keep the lowest feature, then the lowest threshold.
    fn best_split(&mut self, rows: &[usize], total: f64) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<BestSplit> = None;
        for feature in self.candidate_features() {
            self.scratch.clear();
            self.scratch.extend(rows.iter().map(|&r| (self.x[r][feature], self.y[r])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

            let mut left_sum = 0.0;
            for i in 1..n {
                left_sum += self.scratch[i - 1].1;
                let (lo, hi) = (self.scratch[i - 1].0, self.scratch[i].0);
                if lo == hi || i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64;
                if best.map_or(true, |b| score > b.score) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit { feature, threshold, score });
                }
            }
        }
        best
    }
}
