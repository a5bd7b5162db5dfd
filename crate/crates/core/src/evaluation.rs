//! Scores, confusion matrices and the repeated train/test protocol.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::marker::PhantomData;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::sirec::{SirecModel, TrainConfig};

fn check_lengths(y_true: &[i32], y_pred: &[i32]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::TooShort { needed: 1, actual: 0 });
    }
    Ok(())
}

/// Unweighted mean of per-class F1 over every label seen in either sequence.
/// A class whose precision and recall are both zero scores 0.
pub fn f1_macro(y_true: &[i32], y_pred: &[i32]) -> Result<f64> {
    check_lengths(y_true, y_pred)?;
    let labels: BTreeSet<i32> = y_true.iter().chain(y_pred).copied().collect();
    let mut total = 0.0;
    for &c in &labels {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        if precision + recall > 0.0 {
            total += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(total / labels.len() as f64)
}

/// Confusion matrix over an explicit class list; rows are true labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<i32>,
    pub counts: Vec<Vec<u64>>,
    /// Each row divided by its support.
    pub normalized: Vec<Vec<f64>>,
    /// Rows whose true class never occurs; they are all zero.
    pub zero_support: Vec<bool>,
}

impl ConfusionMatrix {
    pub fn from_counts(classes: Vec<i32>, counts: Vec<Vec<u64>>) -> Self {
        let mut normalized = Vec::with_capacity(counts.len());
        let mut zero_support = Vec::with_capacity(counts.len());
        for row in &counts {
            let support: u64 = row.iter().sum();
            zero_support.push(support == 0);
            normalized.push(
                row.iter()
                    .map(|&c| if support == 0 { 0.0 } else { c as f64 / support as f64 })
                    .collect(),
            );
        }
        ConfusionMatrix {
            classes,
            counts,
            normalized,
            zero_support,
        }
    }

    fn add(&mut self, other: &[Vec<u64>]) {
        for (row, o) in self.counts.iter_mut().zip(other) {
            for (c, v) in row.iter_mut().zip(o) {
                *c += v;
            }
        }
        *self = ConfusionMatrix::from_counts(std::mem::take(&mut self.classes), std::mem::take(&mut self.counts));
    }
}

pub fn confusion_counts(y_true: &[i32], y_pred: &[i32], classes: &[i32]) -> Result<Vec<Vec<u64>>> {
    check_lengths(y_true, y_pred)?;
    let index = |l: i32| classes.iter().position(|&c| c == l).ok_or(Error::UnknownLabel(l));
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[index(t)?][index(p)?] += 1;
    }
    Ok(counts)
}

pub fn confusion_matrix_normalized(y_true: &[i32], y_pred: &[i32], classes: &[i32]) -> Result<ConfusionMatrix> {
    let counts = confusion_counts(y_true, y_pred, classes)?;
    Ok(ConfusionMatrix::from_counts(classes.to_vec(), counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Quantile with linear interpolation between closest ranks.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Summary {
    /// Panics on an empty slice.
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "summary of no values");
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Summary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: quantile(&sorted, 0.5),
            q1: quantile(&sorted, 0.25),
            q3: quantile(&sorted, 0.75),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub fit_seconds: Vec<f64>,
    pub predict_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Model seed used in each iteration.
    pub seeds: Vec<u64>,
    pub scores: Vec<f64>,
    pub summary: Summary,
    /// Pooled over all iterations.
    pub confusion: ConfusionMatrix,
    pub timing: Timing,
}

impl EvalReport {
    /// Everything except wall-clock timings.
    pub fn same_results(&self, other: &EvalReport) -> bool {
        self.seeds == other.seeds
            && self.scores == other.scores
            && self.summary == other.summary
            && self.confusion == other.confusion
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `iteration,seed,f1,fit_seconds,predict_seconds` per iteration.
    pub fn scores_csv(&self) -> String {
        let mut s = String::from("iteration,seed,f1,fit_seconds,predict_seconds\n");
        for i in 0..self.scores.len() {
            writeln!(
                s,
                "{i},{},{},{},{}",
                self.seeds[i], self.scores[i], self.timing.fit_seconds[i], self.timing.predict_seconds[i]
            )
            .unwrap();
        }
        s
    }

    pub fn to_text(&self) -> String {
        let m = &self.summary;
        let mut s = String::new();
        writeln!(s, "iterations  {}", self.scores.len()).unwrap();
        writeln!(s, "macro F1    mean {:.4}  median {:.4}", m.mean, m.median).unwrap();
        writeln!(
            s,
            "            q1 {:.4}  q3 {:.4}  min {:.4}  max {:.4}",
            m.q1, m.q3, m.min, m.max
        )
        .unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        writeln!(
            s,
            "time [s]    fit {:.3}  predict {:.3}  (mean per iteration)",
            mean(&self.timing.fit_seconds),
            mean(&self.timing.predict_seconds)
        )
        .unwrap();
        s.push_str("\nconfusion (rows: true, normalized)\n");
        s.push_str("true\\pred");
        for c in &self.confusion.classes {
            write!(s, "{c:>8}").unwrap();
        }
        s.push('\n');
        for (i, row) in self.confusion.normalized.iter().enumerate() {
            write!(s, "{:>9}", self.confusion.classes[i]).unwrap();
            for v in row {
                write!(s, "{v:>8.3}").unwrap();
            }
            if self.confusion.zero_support[i] {
                s.push_str("  (no support)");
            }
            s.push('\n');
        }
        s
    }
}

/// A learner that `run_repeated_eval_with` can drive.
pub trait Classifier {
    type Model;
    fn fit(&self, train: &LabeledDataset, seed: u64) -> Result<Self::Model>;
    fn predict(&self, model: &Self::Model, test: &LabeledDataset) -> Result<Vec<i32>>;
}

/// The native ensemble with a fixed configuration; the seed replaces
/// `random_state`.
#[derive(Debug, Clone)]
pub struct SirecClassifier {
    pub config: TrainConfig,
}

impl Classifier for SirecClassifier {
    type Model = SirecModel;

    fn fit(&self, train: &LabeledDataset, seed: u64) -> Result<SirecModel> {
        SirecModel::fit(train, &self.config.with_seed(seed))
    }

    fn predict(&self, model: &SirecModel, test: &LabeledDataset) -> Result<Vec<i32>> {
        predict_rows(model, test)
    }
}

fn predict_rows(model: &SirecModel, test: &LabeledDataset) -> Result<Vec<i32>> {
    let rirs: Vec<&[f64]> = test.rows().iter().map(|r| r.rir.as_slice()).collect();
    model.predict_batch(&rirs)
}

/// Closure-backed classifier; see [`classifier_adapter`].
pub struct Adapter<M, F, P> {
    fit: F,
    predict: P,
    _model: PhantomData<fn() -> M>,
}

/// Wraps a pair of closures as a [`Classifier`].
pub fn classifier_adapter<M, F, P>(fit: F, predict: P) -> Adapter<M, F, P>
where
    F: Fn(&LabeledDataset, u64) -> Result<M>,
    P: Fn(&M, &LabeledDataset) -> Result<Vec<i32>>,
{
    Adapter {
        fit,
        predict,
        _model: PhantomData,
    }
}

impl<M, F, P> Classifier for Adapter<M, F, P>
where
    F: Fn(&LabeledDataset, u64) -> Result<M>,
    P: Fn(&M, &LabeledDataset) -> Result<Vec<i32>>,
{
    type Model = M;

    fn fit(&self, train: &LabeledDataset, seed: u64) -> Result<M> {
        (self.fit)(train, seed)
    }

    fn predict(&self, model: &M, test: &LabeledDataset) -> Result<Vec<i32>> {
        (self.predict)(model, test)
    }
}

/// Fits and scores `iterations` times on a fixed split. Iteration `i` seeds
/// the classifier with `derive_seed(base_seed, i)`.
pub fn run_repeated_eval_with<C: Classifier>(
    classifier: &C,
    train: &LabeledDataset,
    test: &LabeledDataset,
    iterations: usize,
    base_seed: u64,
) -> Result<EvalReport> {
    if iterations == 0 {
        return Err(Error::Config("iterations must be at least 1".into()));
    }
    if test.is_empty() {
        return Err(Error::Config("test set is empty".into()));
    }
    let y_true = test.labels();
    let classes = report_classes(&train.present_classes(), test);

    let mut seeds = Vec::with_capacity(iterations);
    let mut scores = Vec::with_capacity(iterations);
    let mut timing = Timing {
        fit_seconds: Vec::with_capacity(iterations),
        predict_seconds: Vec::with_capacity(iterations),
    };
    let mut pooled = ConfusionMatrix::from_counts(classes.clone(), vec![vec![0; classes.len()]; classes.len()]);
    for i in 0..iterations {
        let wrap = |e: Error| Error::Iteration {
            iteration: i,
            source: Box::new(e),
        };
        let seed = derive_seed(base_seed, i as u64);
        let t0 = Instant::now();
        let model = classifier.fit(train, seed).map_err(wrap)?;
        let t1 = Instant::now();
        let y_pred = classifier.predict(&model, test).map_err(wrap)?;
        let t2 = Instant::now();
        scores.push(f1_macro(&y_true, &y_pred).map_err(wrap)?);
        pooled.add(&confusion_counts(&y_true, &y_pred, &classes).map_err(wrap)?);
        seeds.push(seed);
        timing.fit_seconds.push((t1 - t0).as_secs_f64());
        timing.predict_seconds.push((t2 - t1).as_secs_f64());
        log::debug!("iteration {i}: seed {seed}, F1 {:.4}", scores[i]);
    }
    Ok(EvalReport {
        seeds,
        summary: Summary::of(&scores),
        scores,
        confusion: pooled,
        timing,
    })
}

fn report_classes(known: &[i32], test: &LabeledDataset) -> Vec<i32> {
    known
        .iter()
        .copied()
        .chain(test.present_classes())
        .chain(test.meta().classes.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Scores a stored model on `test` as a one-iteration report. The seed is the
/// model's `random_state` and the fit time is zero.
pub fn evaluate_model(model: &SirecModel, test: &LabeledDataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Config("test set is empty".into()));
    }
    let y_true = test.labels();
    let classes = report_classes(model.classes(), test);
    let t0 = Instant::now();
    let y_pred = predict_rows(model, test)?;
    let predict_seconds = t0.elapsed().as_secs_f64();
    let score = f1_macro(&y_true, &y_pred)?;
    Ok(EvalReport {
        seeds: vec![model.config().random_state],
        scores: vec![score],
        summary: Summary::of(&[score]),
        confusion: ConfusionMatrix::from_counts(classes.clone(), confusion_counts(&y_true, &y_pred, &classes)?),
        timing: Timing {
            fit_seconds: vec![0.0],
            predict_seconds: vec![predict_seconds],
        },
    })
}

pub fn run_repeated_eval(
    train: &LabeledDataset,
    test: &LabeledDataset,
    config: &TrainConfig,
    iterations: usize,
    base_seed: u64,
) -> Result<EvalReport> {
    run_repeated_eval_with(&SirecClassifier { config: *config }, train, test, iterations, base_seed)
}
