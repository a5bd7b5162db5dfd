//! Random search over ensemble hyperparameters.

use std::fmt::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::evaluation::f1_macro;
use crate::features::IntervalBounds;
use crate::seed::rng_from_seed;
use crate::sirec::{SirecModel, TrainConfig};

/// Inclusive ranges for every searched hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    pub segment_length: (usize, usize),
    pub n_estimators: (usize, usize),
    pub max_len: (usize, usize),
    pub min_len: (usize, usize),
    pub random_state: (u64, u64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            segment_length: (100, 500),
            n_estimators: (10, 200),
            max_len: (10, 200),
            min_len: (10, 200),
            random_state: (0, u32::MAX as u64),
        }
    }
}

const MAX_DRAWS_PER_CONFIG: usize = 1_000_000;

impl SearchSpace {
    /// Checks that every range is non-empty and that some draw satisfies
    /// `2 <= min_len <= max_len <= segment_length`.
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("segment_length", self.segment_length),
            ("n_estimators", self.n_estimators),
            ("max_len", self.max_len),
            ("min_len", self.min_len),
        ];
        for (name, (lo, hi)) in ranges {
            if lo > hi {
                return Err(Error::Config(format!("{name} range {lo}..={hi} is empty")));
            }
        }
        if self.random_state.0 > self.random_state.1 {
            return Err(Error::Config("random_state range is empty".into()));
        }
        if self.n_estimators.0 == 0 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        // Smallest feasible max_len, then check it fits under the largest segment.
        let m = self.min_len.0.max(2).max(self.max_len.0);
        if self.min_len.1 < 2 || m > self.max_len.1 || m > self.segment_length.1 {
            return Err(Error::Config(
                "search space is unsatisfiable: no draw has 2 <= min_len <= max_len <= segment_length".into(),
            ));
        }
        Ok(())
    }

    fn accepts(&self, cfg: &TrainConfig) -> bool {
        cfg.min_len >= 2 && cfg.min_len <= cfg.max_len && cfg.max_len <= cfg.segment_length
    }

    /// Draws `count` configurations, rejecting those that break the length
    /// constraints.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<TrainConfig>> {
        self.validate()?;
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let mut accepted = None;
            for _ in 0..MAX_DRAWS_PER_CONFIG {
                let cfg = TrainConfig::new(
                    rng.random_range(self.n_estimators.0..=self.n_estimators.1),
                    rng.random_range(self.segment_length.0..=self.segment_length.1),
                    IntervalBounds::new(
                        rng.random_range(self.min_len.0..=self.min_len.1),
                        rng.random_range(self.max_len.0..=self.max_len.1),
                    ),
                    rng.random_range(self.random_state.0..=self.random_state.1),
                );
                if self.accepts(&cfg) {
                    accepted = Some(cfg);
                    break;
                }
            }
            out.push(
                accepted
                    .ok_or_else(|| Error::Config(format!("no valid configuration in {MAX_DRAWS_PER_CONFIG} draws")))?,
            );
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub config: TrainConfig,
    pub f1: f64,
    /// 1 for the best result.
    pub rank: usize,
    /// Position in the sequence of draws.
    pub draw: usize,
}

/// One fit on `train` and the macro F1 on `test`.
pub fn evaluate_config(train: &LabeledDataset, test: &LabeledDataset, cfg: &TrainConfig) -> Result<f64> {
    let model = SirecModel::fit(train, cfg)?;
    let rirs: Vec<&[f64]> = test.rows().iter().map(|r| r.rir.as_slice()).collect();
    f1_macro(&test.labels(), &model.predict_batch(&rirs)?)
}

/// Draws `budget` configurations from `meta_seed`, scores each once and
/// returns them best first; equal scores keep draw order.
pub fn stochastic_search(
    train: &LabeledDataset,
    test: &LabeledDataset,
    space: &SearchSpace,
    budget: usize,
    meta_seed: u64,
) -> Result<Vec<SearchResult>> {
    if budget == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    let needed = train.meta().samples.min(test.meta().samples);
    if space.segment_length.0 > needed {
        return Err(Error::Config(format!(
            "smallest segment_length {} exceeds the {needed} samples per row",
            space.segment_length.0
        )));
    }
    let configs = space.draw(&mut rng_from_seed(meta_seed), budget)?;
    let scores = configs
        .par_iter()
        .map(|cfg| evaluate_config(train, test, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut results: Vec<SearchResult> = configs
        .into_iter()
        .zip(scores)
        .enumerate()
        .map(|(draw, (config, f1))| SearchResult {
            config,
            f1,
            rank: 0,
            draw,
        })
        .collect();
    results.sort_by(|a, b| b.f1.total_cmp(&a.f1));
    for (i, r) in results.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(results)
}

pub const SEARCH_CSV_HEADER: &str = "segment_length,n_estimators,max_len,min_len,random_state,f1";

/// Results as CSV; F1 is printed with enough digits to round-trip exactly.
pub fn results_csv(results: &[SearchResult]) -> String {
    let mut s = format!("{SEARCH_CSV_HEADER}\n");
    for r in results {
        let c = &r.config;
        writeln!(
            s,
            "{},{},{},{},{},{}",
            c.segment_length, c.n_estimators, c.max_len, c.min_len, c.random_state, r.f1
        )
        .unwrap();
    }
    s
}
