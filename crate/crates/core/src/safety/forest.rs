//! Bagged ensemble of depth-limited CART regression trees.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Bootstrap sample size as a fraction of the training rows.
    pub sample_frac: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 20,
            max_depth: 14,
            min_samples_leaf: 2,
            sample_frac: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn mean(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
    }

    /// Best (feature, threshold) over all features, if any split reduces the
    /// squared error. Equal-error splits go to the widest gap between
    /// neighbouring values, relative to the feature's spread in the node.
    fn best_split(&self, idx: &mut [usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total * total / n as f64;
        if parent_sse <= 1e-14 {
            return None;
        }
        let tie = 1e-9 * parent_sse;
        let n_features = self.x[idx[0]].len();
        // (feature, threshold, sse, relative gap)
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for f in 0..n_features {
            idx.sort_unstable_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let spread = self.x[idx[n - 1]][f] - self.x[idx[0]][f];
            if spread <= 0.0 {
                continue;
            }
            let (mut sum_l, mut sq_l) = (0.0, 0.0);
            for k in 1..n {
                let yi = self.y[idx[k - 1]];
                sum_l += yi;
                sq_l += yi * yi;
                if k < self.min_leaf || n - k < self.min_leaf {
                    continue;
                }
                let lo = self.x[idx[k - 1]][f];
                let hi = self.x[idx[k]][f];
                if hi <= lo {
                    continue;
                }
                let (nl, nr) = (k as f64, (n - k) as f64);
                let sum_r = total - sum_l;
                let sq_r = total_sq - sq_l;
                let sse = (sq_l - sum_l * sum_l / nl) + (sq_r - sum_r * sum_r / nr);
                let gap = (hi - lo) / spread;
                let better = match best {
                    None => true,
                    Some((_, _, b, g)) => sse < b - tie || (sse <= b + tie && gap > g),
                };
                if better {
                    best = Some((f, 0.5 * (lo + hi), sse, gap));
                }
            }
        }
        best.filter(|&(_, _, sse, _)| sse < parent_sse - 1e-14)
            .map(|(f, t, _, _)| (f, t))
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: self.mean(idx) });
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return id;
        };
        // partition in place: left = x <= threshold
        let mut split = 0;
        for k in 0..idx.len() {
            if self.x[idx[k]][feature] <= threshold {
                idx.swap(split, k);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl RegressionTree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], idx: &mut [usize], max_depth: usize, min_leaf: usize) -> Self {
        let mut b = Builder {
            x,
            y,
            max_depth,
            min_leaf: min_leaf.max(1),
            nodes: Vec::new(),
        };
        b.grow(idx, 0);
        RegressionTree { nodes: b.nodes }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    id = if features[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
}

impl RandomForest {
    /// Fits `params.n_trees` trees on bootstrap resamples of `(x, y)`.
    /// Panics if `x` is empty or rows and targets disagree in length.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams, rng: &mut ChaCha8Rng) -> Self {
        assert!(!x.is_empty() && x.len() == y.len());
        let n = x.len();
        let m = ((n as f64 * params.sample_frac).round() as usize).clamp(1, n);
        let trees = (0..params.n_trees.max(1))
            .map(|_| {
                let mut idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
                RegressionTree::fit(x, y, &mut idx, params.max_depth, params.min_samples_leaf)
            })
            .collect();
        RandomForest { trees }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(features)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
