use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::{sample_interval_pair, FeatureExtractor, IntervalBounds, IntervalPair};
use crate::seed::{derive_seed, rng_from_seed};

/// Hyperparameters stored with a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_estimators: usize,
    pub segment_length: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub random_state: u64,
}

fn default_min_samples_leaf() -> usize {
    1
}

/// Everything `fit` needs. Tree limits only shape training and are not
/// written to the model file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub n_estimators: usize,
    pub segment_length: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub random_state: u64,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_samples_leaf")]
    pub min_samples_leaf: usize,
    /// Resample rows with replacement for every tree.
    #[serde(default)]
    pub bootstrap: bool,
}

impl TrainConfig {
    pub fn new(n_estimators: usize, segment_length: usize, bounds: IntervalBounds, random_state: u64) -> Self {
        TrainConfig {
            n_estimators,
            segment_length,
            min_len: bounds.min_len,
            max_len: bounds.max_len,
            random_state,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: false,
        }
    }

    pub fn bounds(&self) -> IntervalBounds {
        IntervalBounds::new(self.min_len, self.max_len)
    }

    pub fn with_seed(mut self, random_state: u64) -> Self {
        self.random_state = random_state;
        self
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            n_estimators: self.n_estimators,
            segment_length: self.segment_length,
            min_len: self.min_len,
            max_len: self.max_len,
            random_state: self.random_state,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
        }
    }
}

impl ModelConfig {
    pub fn bounds(&self) -> IntervalBounds {
        IntervalBounds::new(self.min_len, self.max_len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        self.bounds().validate(self.segment_length)
    }
}

/// One ensemble member: its interval pair and the tree over that pair's
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct SirecTree {
    pub pair: IntervalPair,
    pub tree: DecisionTree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirecModel {
    config: ModelConfig,
    classes: Vec<i32>,
    trees: Vec<SirecTree>,
}

fn tree_pair_check(pair: IntervalPair, cfg: &ModelConfig, index: usize) -> Result<()> {
    pair.check(cfg.segment_length)
        .map_err(|e| Error::Model(format!("tree {index}: {e}")))?;
    if pair.length < cfg.min_len || pair.length > cfg.max_len {
        return Err(Error::Model(format!(
            "tree {index}: interval length {} outside {}..={}",
            pair.length, cfg.min_len, cfg.max_len
        )));
    }
    Ok(())
}

impl SirecModel {
    /// Assembles and validates a model from its parts.
    pub fn from_parts(config: ModelConfig, classes: Vec<i32>, trees: Vec<SirecTree>) -> Result<Self> {
        config.validate().map_err(|e| Error::Model(e.to_string()))?;
        if classes.is_empty() {
            return Err(Error::Model("class list is empty".into()));
        }
        if classes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Model("classes must be strictly ascending".into()));
        }
        if trees.len() != config.n_estimators {
            return Err(Error::Model(format!(
                "config says {} estimators but {} trees are present",
                config.n_estimators,
                trees.len()
            )));
        }
        for (i, t) in trees.iter().enumerate() {
            tree_pair_check(t.pair, &config, i)?;
            if let Some(label) = t.tree.leaf_labels().find(|l| classes.binary_search(l).is_err()) {
                return Err(Error::Model(format!(
                    "tree {i}: leaf label {label} is not a declared class"
                )));
            }
        }
        Ok(SirecModel { config, classes, trees })
    }

    pub fn fit(dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if dataset.is_empty() {
            return Err(Error::Training("dataset is empty".into()));
        }
        let classes = dataset.present_classes();
        if classes.len() < 2 {
            return Err(Error::Training(format!(
                "need at least 2 distinct classes, found {}",
                classes.len()
            )));
        }
        for declared in &dataset.meta().classes {
            if classes.binary_search(declared).is_err() {
                log::warn!("class {declared} has no training rows");
            }
        }
        let seg = cfg.segment_length;
        if dataset.meta().samples < seg {
            return Err(Error::TooShort {
                needed: seg,
                actual: dataset.meta().samples,
            });
        }
        let labels = dataset.labels();
        let segments: Vec<&[f64]> = dataset.rows().iter().map(|r| &r.rir[..seg]).collect();

        // Seeds are fixed before the parallel section so scheduling cannot
        // change the result.
        let seeds: Vec<u64> = (0..cfg.n_estimators as u64)
            .map(|i| derive_seed(cfg.random_state, i))
            .collect();
        let trees = seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = rng_from_seed(seed);
                let pair = sample_interval_pair(&mut rng, seg, cfg.bounds())?;
                let extractor = FeatureExtractor::new(pair)?;
                let features = segments
                    .iter()
                    .map(|s| extractor.extract(s).map(|f| f.to_array()))
                    .collect::<Result<Vec<_>>>()?;
                let tree = DecisionTree::fit(
                    &features,
                    &labels,
                    &classes,
                    cfg.tree_params(),
                    cfg.bootstrap.then_some(&mut rng),
                )?;
                Ok(SirecTree { pair, tree })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(cfg.model_config(), classes, trees)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn classes(&self) -> &[i32] {
        &self.classes
    }

    pub fn trees(&self) -> &[SirecTree] {
        &self.trees
    }

    fn check_len(&self, rir: &[f64]) -> Result<()> {
        if rir.len() < self.config.segment_length {
            return Err(Error::TooShort {
                needed: self.config.segment_length,
                actual: rir.len(),
            });
        }
        Ok(())
    }

    /// Each tree's label for `rir`, in tree order.
    pub fn tree_votes(&self, rir: &[f64]) -> Result<Vec<i32>> {
        self.check_len(rir)?;
        self.trees
            .iter()
            .map(|t| {
                let x = FeatureExtractor::new(t.pair)?.extract(&rir[..self.config.segment_length])?;
                Ok(t.tree.predict(&x.to_array()))
            })
            .collect()
    }

    fn tally(&self, votes: impl IntoIterator<Item = i32>) -> i32 {
        let mut counts = vec![0usize; self.classes.len()];
        for v in votes {
            let idx = self
                .classes
                .binary_search(&v)
                .expect("leaf labels are declared classes");
            counts[idx] += 1;
        }
        // classes are ascending, so the first maximum is the smallest label
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        self.classes[best]
    }

    /// Plurality vote over all trees; ties go to the smallest label.
    pub fn predict(&self, rir: &[f64]) -> Result<i32> {
        Ok(self.tally(self.tree_votes(rir)?))
    }

    /// Predicts many rows, reusing each tree's transform plan.
    pub fn predict_batch<S: AsRef<[f64]> + Sync>(&self, rirs: &[S]) -> Result<Vec<i32>> {
        for r in rirs {
            self.check_len(r.as_ref())?;
        }
        let seg = self.config.segment_length;
        let per_tree = self
            .trees
            .par_iter()
            .map(|t| {
                let ex = FeatureExtractor::new(t.pair)?;
                rirs.iter()
                    .map(|r| Ok(t.tree.predict(&ex.extract(&r.as_ref()[..seg])?.to_array())))
                    .collect::<Result<Vec<i32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..rirs.len())
            .map(|row| self.tally(per_tree.iter().map(|votes| votes[row])))
            .collect())
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(|t| t.tree.nodes().len()).sum()
    }
}
