//! Variance-reduction regression trees.
//!
//! Each feature's sample order is sorted once; nodes own a contiguous range
//! of every per-feature order buffer and children are produced by stable
//! in-place partitioning, so growing a tree never re-sorts.

use rand::seq::index::sample;
use rand::Rng;

use super::FeatureSubsample;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted binary tree. Rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl RegressionTree {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Root split as `(feature, threshold)`, if the tree is not a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }

    /// Leaf values in left-to-right order.
    pub fn leaf_values(&self) -> Vec<f64> {
        fn walk(nodes: &[Node], at: usize, out: &mut Vec<f64>) {
            match nodes[at] {
                Node::Leaf { value } => out.push(value),
                Node::Split { left, right, .. } => {
                    walk(nodes, left, out);
                    walk(nodes, right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, 0, &mut out);
        out
    }

    /// Assembles a tree by hand: `Split` children must index into `nodes`,
    /// with the root at position 0.
    pub fn from_split(feature: usize, threshold: f64, left_value: f64, right_value: f64, n_features: usize) -> Self {
        RegressionTree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: left_value },
                Node::Leaf { value: right_value },
            ],
            n_features,
        }
    }

    pub(crate) fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] < threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub feature_subsample: FeatureSubsample,
}

/// Column-major copy of a design matrix plus the per-feature sorted order.
pub(crate) struct SortedDesign {
    pub columns: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
    pub n_rows: usize,
}

impl SortedDesign {
    pub fn new(x: &[Vec<f64>]) -> Self {
        let n_rows = x.len();
        let n_features = x.first().map_or(0, Vec::len);
        let columns: Vec<Vec<f64>> = (0..n_features)
            .map(|f| x.iter().map(|row| row[f]).collect())
            .collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                idx.sort_by(|&a, &b| {
                    col[a as usize]
                        .total_cmp(&col[b as usize])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        SortedDesign {
            columns,
            order,
            n_rows,
        }
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

struct Grower<'a, R: Rng> {
    design: &'a SortedDesign,
    y: &'a [f64],
    weight: &'a [f64],
    params: TreeParams,
    features_per_split: usize,
    rng: &'a mut R,
    order: Vec<Vec<u32>>,
    scratch: Vec<u32>,
    goes_left: Vec<bool>,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<R: Rng> Grower<'_, R> {
    fn grow(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });

        let (mut w, mut s, mut q) = (0.0, 0.0, 0.0);
        for &i in &self.order[0][lo..hi] {
            let (wi, yi) = (self.weight[i as usize], self.y[i as usize]);
            w += wi;
            s += wi * yi;
            q += wi * yi * yi;
        }
        let mean = s / w;
        let parent_score = s * s / w;
        let sse = q - parent_score;
        let min_leaf = self.params.min_samples_leaf as f64;
        let pure = sse <= 1e-12 * q.abs();
        if depth >= self.params.max_depth || w < 2.0 * min_leaf || pure {
            self.nodes[at] = Node::Leaf { value: mean };
            return at;
        }

        let best = self.best_split(lo, hi, w, s, min_leaf);
        let Some(best) = best.filter(|b| b.score - parent_score > 1e-12 * sse.max(f64::MIN_POSITIVE)) else {
            self.nodes[at] = Node::Leaf { value: mean };
            return at;
        };

        let column = &self.design.columns[best.feature];
        for &i in &self.order[0][lo..hi] {
            self.goes_left[i as usize] = column[i as usize] < best.threshold;
        }
        let mut split_at = lo;
        for f in 0..self.order.len() {
            split_at = stable_partition(&mut self.order[f][lo..hi], &mut self.scratch, &self.goes_left) + lo;
        }

        let left = self.grow(lo, split_at, depth + 1);
        let right = self.grow(split_at, hi, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&mut self, lo: usize, hi: usize, w: f64, s: f64, min_leaf: f64) -> Option<Candidate> {
        let m = self.design.n_features();
        let features: Vec<usize> = if self.features_per_split >= m {
            (0..m).collect()
        } else {
            let mut picked = sample(self.rng, m, self.features_per_split).into_vec();
            picked.sort_unstable();
            picked
        };

        let mut best: Option<Candidate> = None;
        for f in features {
            let column = &self.design.columns[f];
            let idx = &self.order[f][lo..hi];
            let (mut wl, mut sl) = (0.0, 0.0);
            for k in 0..idx.len() - 1 {
                let i = idx[k] as usize;
                wl += self.weight[i];
                sl += self.weight[i] * self.y[i];
                let here = column[i];
                let next = column[idx[k + 1] as usize];
                if here == next || wl < min_leaf || w - wl < min_leaf {
                    continue;
                }
                let wr = w - wl;
                let sr = s - sl;
                let score = sl * sl / wl + sr * sr / wr;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = 0.5 * (here + next);
                    if threshold <= here {
                        threshold = next;
                    }
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Moves entries flagged left to the front, preserving relative order on
/// both sides. Returns the number of left entries.
fn stable_partition(slice: &mut [u32], scratch: &mut Vec<u32>, goes_left: &[bool]) -> usize {
    scratch.clear();
    let mut write = 0;
    for k in 0..slice.len() {
        let i = slice[k];
        if goes_left[i as usize] {
            slice[write] = i;
            write += 1;
        } else {
            scratch.push(i);
        }
    }
    slice[write..].copy_from_slice(scratch);
    write
}

pub(crate) fn features_per_split(subsample: FeatureSubsample, m: usize) -> usize {
    let k = match subsample {
        FeatureSubsample::All => m,
        FeatureSubsample::Sqrt => (m as f64).sqrt().ceil() as usize,
        FeatureSubsample::Fraction(f) => (f * m as f64).ceil() as usize,
    };
    k.clamp(1, m.max(1))
}

/// Grows one tree on `design` with per-row multiplicities `weight`
/// (rows with weight 0 are excluded).
pub(crate) fn grow_tree<R: Rng>(
    design: &SortedDesign,
    y: &[f64],
    weight: &[f64],
    params: TreeParams,
    rng: &mut R,
) -> RegressionTree {
    let order: Vec<Vec<u32>> = design
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&i| weight[i as usize] > 0.0).collect())
        .collect();
    let len = order[0].len();
    let mut grower = Grower {
        design,
        y,
        weight,
        params,
        features_per_split: features_per_split(params.feature_subsample, design.n_features()),
        rng,
        order,
        scratch: Vec::with_capacity(len),
        goes_left: vec![false; design.n_rows],
        nodes: Vec::new(),
    };
    grower.grow(0, len, 0);
    RegressionTree {
        nodes: grower.nodes,
        n_features: design.n_features(),
    }
}
