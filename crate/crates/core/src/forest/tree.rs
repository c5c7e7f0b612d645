use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;

/// `1 − Σ p_c²`.
pub fn gini(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Class probabilities `[p0, p1]`.
        proba: [f64; 2],
        samples: usize,
    },
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        samples: usize,
        /// `(n_node / n_root) · (G − (n_l/n) G_l − (n_r/n) G_r)`.
        weighted_decrease: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub n_candidates: usize,
}

impl DecisionTree {
    pub fn single_leaf(proba: [f64; 2]) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf { proba, samples: 0 }],
        }
    }

    /// Class-1 probability for one feature row.
    pub fn predict_one(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { proba, .. } => return proba[1],
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Weighted impurity decrease per feature, unnormalized.
    pub fn impurity_decrease(&self, n_features: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_features];
        for n in &self.nodes {
            if let Node::Split {
                feature,
                weighted_decrease,
                ..
            } = n
            {
                out[*feature] += weighted_decrease;
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    /// Grow a CART tree on `samples` (row indices, repeats allowed).
    pub(crate) fn grow(data: &Dataset, samples: Vec<usize>, params: &TreeParams, rng: &mut impl Rng) -> Self {
        let mut tree = DecisionTree { nodes: Vec::new() };
        let n_root = samples.len().max(1) as f64;
        let mut features: Vec<usize> = (0..data.n_features()).collect();
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, samples, 0usize)];
        tree.nodes.push(Node::Leaf {
            proba: [0.5, 0.5],
            samples: 0,
        });
        while let Some((slot, idx, depth)) = stack.pop() {
            let counts = class_counts(data, &idx);
            let n = idx.len();
            let proba = if n == 0 {
                [0.5, 0.5]
            } else {
                [counts[0] / n as f64, counts[1] / n as f64]
            };
            let impurity = gini(&counts);
            let can_split = impurity > 1e-12
                && n >= 2 * params.min_samples_leaf
                && params.max_depth.is_none_or(|d| depth < d);
            let best = if can_split {
                // Partial Fisher–Yates: the first `n_candidates` entries are a
                // uniform random subset.
                let k = params.n_candidates.min(features.len());
                for i in 0..k {
                    let j = rng.random_range(i..features.len());
                    features.swap(i, j);
                }
                best_split(data, &idx, &features[..k], impurity, params.min_samples_leaf)
            } else {
                None
            };
            match best {
                None => tree.nodes[slot] = Node::Leaf { proba, samples: n },
                Some(split) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = idx
                        .iter()
                        .partition(|&&i| data.x[i][split.feature] <= split.threshold);
                    let left = tree.nodes.len();
                    let right = left + 1;
                    tree.nodes.push(Node::Leaf {
                        proba: [0.5, 0.5],
                        samples: 0,
                    });
                    tree.nodes.push(Node::Leaf {
                        proba: [0.5, 0.5],
                        samples: 0,
                    });
                    tree.nodes[slot] = Node::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        left,
                        right,
                        samples: n,
                        weighted_decrease: (n as f64 / n_root) * split.gain,
                    };
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        tree
    }
}

fn class_counts(data: &Dataset, idx: &[usize]) -> [f64; 2] {
    let mut c = [0.0; 2];
    for &i in idx {
        c[data.y[i] as usize] += 1.0;
    }
    c
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn best_split(data: &Dataset, idx: &[usize], features: &[usize], parent: f64, min_leaf: usize) -> Option<Split> {
    let n = idx.len();
    let total = class_counts(data, idx);
    let mut best: Option<Split> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| data.x[a][f].total_cmp(&data.x[b][f]));
        let mut left = [0.0; 2];
        for pos in 0..n - 1 {
            left[data.y[order[pos]] as usize] += 1.0;
            let (v, next) = (data.x[order[pos]][f], data.x[order[pos + 1]][f]);
            if v >= next {
                continue;
            }
            let nl = pos + 1;
            let nr = n - nl;
            if nl < min_leaf || nr < min_leaf {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let gain =
                parent - (nl as f64 / n as f64) * gini(&left) - (nr as f64 / n as f64) * gini(&right);
            // Ties go to the lower feature index so the result does not depend
            // on the order candidates were drawn in.
            if best
                .as_ref()
                .is_none_or(|b| gain > b.gain + 1e-15 || (gain >= b.gain - 1e-15 && f < b.feature))
            {
                let mut threshold = 0.5 * (v + next);
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}
