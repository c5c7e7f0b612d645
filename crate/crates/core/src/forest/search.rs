use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, Dataset, ForestError, HyperParams, MaxFeatures};
use crate::stats::average_precision;

/// Ranges sampled uniformly by [`random_search_cv`]. Integer ranges are
/// inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub n_trees: [usize; 2],
    pub max_depth: [usize; 2],
    /// Adds unlimited depth as one more choice next to the depth range.
    pub unlimited_depth: bool,
    pub min_samples_leaf: [usize; 2],
    pub max_features: Vec<MaxFeatures>,
    pub bootstrap: bool,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            n_trees: [100, 500],
            max_depth: [3, 20],
            unlimited_depth: true,
            min_samples_leaf: [1, 10],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::Log2, MaxFeatures::All],
            bootstrap: true,
        }
    }
}

impl SearchSpace {
    /// A space containing exactly `hp`.
    pub fn point(hp: HyperParams) -> Self {
        let (depth, unlimited) = match hp.max_depth {
            Some(d) => ([d, d], false),
            None => ([1, 0], true),
        };
        SearchSpace {
            n_trees: [hp.n_trees, hp.n_trees],
            max_depth: depth,
            unlimited_depth: unlimited,
            min_samples_leaf: [hp.min_samples_leaf, hp.min_samples_leaf],
            max_features: vec![hp.max_features],
            bootstrap: hp.bootstrap,
        }
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        let bad = |what: &str| Err(ForestError::InvalidParameter(format!("search space: {what}")));
        if self.n_trees[0] == 0 || self.n_trees[0] > self.n_trees[1] {
            return bad("n_trees range");
        }
        let depth_empty = self.max_depth[0] > self.max_depth[1];
        if (depth_empty && !self.unlimited_depth) || (!depth_empty && self.max_depth[0] == 0) {
            return bad("max_depth range");
        }
        if self.min_samples_leaf[0] == 0 || self.min_samples_leaf[0] > self.min_samples_leaf[1] {
            return bad("min_samples_leaf range");
        }
        if self.max_features.is_empty() {
            return bad("max_features is empty");
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> HyperParams {
        let n_trees = rng.random_range(self.n_trees[0]..=self.n_trees[1]);
        let finite = if self.max_depth[0] <= self.max_depth[1] {
            self.max_depth[1] - self.max_depth[0] + 1
        } else {
            0
        };
        let pick = rng.random_range(0..finite + usize::from(self.unlimited_depth));
        let max_depth = (pick < finite).then(|| self.max_depth[0] + pick);
        let min_samples_leaf = rng.random_range(self.min_samples_leaf[0]..=self.min_samples_leaf[1]);
        let max_features = self.max_features[rng.random_range(0..self.max_features.len())];
        HyperParams {
            n_trees,
            max_depth,
            min_samples_leaf,
            max_features,
            bootstrap: self.bootstrap,
        }
    }
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(targets: &[u8], k: usize, seed: u64) -> Result<Vec<usize>, ForestError> {
    if k < 2 {
        return Err(ForestError::InvalidParameter("need at least two folds".into()));
    }
    if targets.len() < k {
        return Err(ForestError::TooFewSamples {
            samples: targets.len(),
            folds: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; targets.len()];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: HyperParams,
    pub best_score: f64,
    /// Every draw with its mean fold APS, in draw order.
    pub trials: Vec<(HyperParams, f64)>,
}

/// Randomized hyperparameter search scored by mean stratified k-fold APS.
/// Folds whose held-out part has no positive are skipped. Ties keep the
/// earliest draw.
pub fn random_search_cv(
    data: &Dataset,
    space: &SearchSpace,
    n_iter: usize,
    k_folds: usize,
    seed: u64,
) -> Result<CvResult, ForestError> {
    space.validate()?;
    if n_iter == 0 {
        return Err(ForestError::InvalidParameter("n_iter must be positive".into()));
    }
    if !(data.y.contains(&0) && data.y.contains(&1)) {
        return Err(ForestError::SingleClass);
    }
    let folds = stratified_folds(&data.y, k_folds, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let draws: Vec<(HyperParams, u64)> = (0..n_iter).map(|_| (space.sample(&mut rng), rng.random())).collect();

    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k_folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| folds[i] == f);
            (train, test)
        })
        .collect();

    let mut trials = Vec::with_capacity(n_iter);
    for (hp, fit_seed) in draws {
        let scores: Vec<Option<f64>> = splits
            .par_iter()
            .map(|(train, test)| -> Result<Option<f64>, ForestError> {
                let test_y: Vec<u8> = test.iter().map(|&i| data.y[i]).collect();
                if !test_y.contains(&1) {
                    return Ok(None);
                }
                let train_set = data.subset(train);
                if !(train_set.y.contains(&0) && train_set.y.contains(&1)) {
                    return Ok(None);
                }
                let forest = fit(&train_set, &hp, fit_seed)?;
                let rows: Vec<Vec<f64>> = test.iter().map(|&i| data.x[i].clone()).collect();
                let p = forest.predict_proba(&rows)?;
                Ok(average_precision(&p, &test_y).ok())
            })
            .collect::<Result<_, _>>()?;
        let valid: Vec<f64> = scores.into_iter().flatten().collect();
        let mean = if valid.is_empty() {
            0.0
        } else {
            valid.iter().sum::<f64>() / valid.len() as f64
        };
        trials.push((hp, mean));
    }
    let (best, best_score) = trials
        .iter()
        .fold(None::<(HyperParams, f64)>, |acc, &(hp, s)| match acc {
            Some((_, b)) if b >= s => acc,
            _ => Some((hp, s)),
        })
        .expect("n_iter > 0");
    Ok(CvResult {
        best,
        best_score,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::tests::blobs;

    #[test]
    fn single_point_space_returns_it() {
        let hp = HyperParams {
            n_trees: 7,
            max_depth: Some(4),
            min_samples_leaf: 2,
            max_features: MaxFeatures::All,
            bootstrap: true,
        };
        let data = blobs(20, 4.0, 1);
        let r = random_search_cv(&data, &SearchSpace::point(hp), 3, 10, 0).unwrap();
        assert_eq!(r.best, hp);
        let unlimited = HyperParams { max_depth: None, ..hp };
        let r = random_search_cv(&data, &SearchSpace::point(unlimited), 2, 5, 0).unwrap();
        assert_eq!(r.best, unlimited);
    }

    #[test]
    fn separable_data_scores_high() {
        let data = blobs(30, 10.0, 2);
        let space = SearchSpace {
            n_trees: [10, 30],
            ..SearchSpace::default()
        };
        let r = random_search_cv(&data, &space, 4, 10, 3).unwrap();
        assert!(r.best_score >= 0.95, "{}", r.best_score);
        assert_eq!(r.trials.len(), 4);
        assert_eq!(r, random_search_cv(&data, &space, 4, 10, 3).unwrap());
    }

    #[test]
    fn too_few_samples_for_folds() {
        let data = blobs(3, 4.0, 1);
        assert_eq!(
            random_search_cv(&data, &SearchSpace::default(), 1, 10, 0),
            Err(ForestError::TooFewSamples { samples: 6, folds: 10 })
        );
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<u8> = (0..100).map(|i| u8::from(i < 50)).collect();
        let f = stratified_folds(&y, 10, 4).unwrap();
        for k in 0..10 {
            let pos = (0..100).filter(|&i| f[i] == k && y[i] == 1).count();
            let neg = (0..100).filter(|&i| f[i] == k && y[i] == 0).count();
            assert_eq!((pos, neg), (5, 5));
        }
    }

    #[test]
    fn sampled_params_stay_in_space() {
        let space = SearchSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut saw_unlimited = false;
        for _ in 0..500 {
            let hp = space.sample(&mut rng);
            assert!((100..=500).contains(&hp.n_trees));
            assert!((1..=10).contains(&hp.min_samples_leaf));
            match hp.max_depth {
                Some(d) => assert!((3..=20).contains(&d)),
                None => saw_unlimited = true,
            }
        }
        assert!(saw_unlimited);
    }
}
