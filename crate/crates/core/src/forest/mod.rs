//! Random-forest classifier built from Gini CART trees.

mod search;
mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use search::{random_search_cv, stratified_folds, CvResult, SearchSpace};
pub use tree::{gini, DecisionTree, Node};

use tree::TreeParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("dataset is empty")]
    Empty,
    #[error("feature width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("targets must be 0 or 1, found {0}")]
    InvalidTarget(u8),
    #[error("{samples} samples cannot fill {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Feature matrix (row-major) with binary targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
    pub feature_names: Vec<String>,
    pub ids: Vec<String>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<u8>, feature_names: Vec<String>, ids: Vec<String>) -> Result<Self, ForestError> {
        if x.len() != y.len() {
            return Err(ForestError::LengthMismatch {
                rows: x.len(),
                targets: y.len(),
            });
        }
        let width = feature_names.len();
        for (r, row) in x.iter().enumerate() {
            if row.len() != width {
                return Err(ForestError::WidthMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(ForestError::NonFinite { row: r, col: c });
            }
        }
        if let Some(&t) = y.iter().find(|&&t| t > 1) {
            return Err(ForestError::InvalidTarget(t));
        }
        Ok(Dataset {
            x,
            y,
            feature_names,
            ids,
        })
    }

    /// Unnamed features `f0, f1, …` and ids `0, 1, …`.
    pub fn from_matrix(x: Vec<Vec<f64>>, y: Vec<u8>) -> Result<Self, ForestError> {
        let width = x.first().map_or(0, Vec::len);
        let names = (0..width).map(|i| format!("f{i}")).collect();
        let ids = (0..x.len()).map(|i| i.to_string()).collect();
        Dataset::new(x, y, names, ids)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            ids: rows.iter().filter_map(|&i| self.ids.get(i).cloned()).collect(),
        }
    }
}

/// Number of features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let p = n_features as f64;
        let k = match self {
            MaxFeatures::Sqrt => p.sqrt().ceil() as usize,
            MaxFeatures::Log2 => p.log2().ceil() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl HyperParams {
    fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidParameter("n_trees must be positive".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::InvalidParameter("min_samples_leaf must be positive".into()));
        }
        if self.max_depth == Some(0) {
            return Err(ForestError::InvalidParameter("max_depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub hyperparams: HyperParams,
    pub seed: u64,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub trees: Vec<DecisionTree>,
}

/// Per-feature importances summing to 1 (all zero if no tree ever split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

pub fn fit(data: &Dataset, hp: &HyperParams, seed: u64) -> Result<RandomForest, ForestError> {
    fit_with_oob(data, hp, seed).map(|(f, _)| f)
}

/// Fit and return out-of-bag class-1 probabilities (`None` for samples that
/// landed in every bootstrap).
pub fn fit_with_oob(data: &Dataset, hp: &HyperParams, seed: u64) -> Result<(RandomForest, Vec<Option<f64>>), ForestError> {
    hp.validate()?;
    if data.is_empty() {
        return Err(ForestError::Empty);
    }
    if !(data.y.contains(&0) && data.y.contains(&1)) {
        return Err(ForestError::SingleClass);
    }
    let n = data.len();
    let params = TreeParams {
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
        n_candidates: hp.max_features.resolve(data.n_features()),
    };
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let tree_seeds: Vec<u64> = (0..hp.n_trees).map(|_| master.random()).collect();

    let grown: Vec<(DecisionTree, Vec<bool>)> = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let samples: Vec<usize> = if hp.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut in_bag = vec![false; n];
            for &i in &samples {
                in_bag[i] = true;
            }
            (DecisionTree::grow(data, samples, &params, &mut rng), in_bag)
        })
        .collect();

    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0usize; n];
    for (tree, in_bag) in &grown {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            oob_sum[i] += tree.predict_one(&data.x[i]);
            oob_count[i] += 1;
        }
    }
    let oob = oob_sum
        .iter()
        .zip(&oob_count)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect();

    Ok((
        RandomForest {
            hyperparams: *hp,
            seed,
            n_features: data.n_features(),
            feature_names: data.feature_names.clone(),
            trees: grown.into_iter().map(|(t, _)| t).collect(),
        },
        oob,
    ))
}

impl RandomForest {
    /// Mean class-1 probability over trees, per row.
    pub fn predict_proba(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, ForestError> {
        if let Some(r) = rows.iter().find(|r| r.len() != self.n_features) {
            return Err(ForestError::WidthMismatch {
                expected: self.n_features,
                got: r.len(),
            });
        }
        let k = self.trees.len() as f64;
        Ok(rows
            .iter()
            .map(|r| self.trees.iter().map(|t| t.predict_one(r)).sum::<f64>() / k)
            .collect())
    }

    /// Mean decrease in impurity: weighted decreases summed per feature,
    /// averaged over trees, normalized to sum 1.
    pub fn mdi_importance(&self) -> FeatureImportance {
        let mut acc = vec![0.0; self.n_features];
        for t in &self.trees {
            for (a, d) in acc.iter_mut().zip(t.impurity_decrease(self.n_features)) {
                *a += d;
            }
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            acc.iter_mut().for_each(|a| *a /= total);
        }
        FeatureImportance {
            names: self.feature_names.clone(),
            values: acc,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
