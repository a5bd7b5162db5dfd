//! Acoustic level sensing from sweep-excited impulse responses.
//!
//! The crate covers the full chain: a stepped sine sweep is played into a
//! container, the recording is denoised by spectral subtraction, an impulse
//! response is estimated by magnitude-ratio deconvolution, and a SIREC
//! ensemble (random-interval decision trees over three features per tree)
//! classifies the fill level. Trained models serialize to JSON and can be
//! exported as allocation-free C++ for microcontrollers.
//!
//! ```no_run
//! use sirec_core::synth::{generate_split, SceneConfig};
//! use sirec_core::{evaluation, IntervalBounds, SirecModel, TrainConfig};
//!
//! let (train, test) = generate_split(&SceneConfig::default(), 20, 10, 1)?;
//! let cfg = TrainConfig::new(100, 300, IntervalBounds::new(17, 153), 7);
//! let model = SirecModel::fit(&train, &cfg)?;
//! let predicted = model.predict_batch(&test.rows().iter().map(|r| r.rir.as_slice()).collect::<Vec<_>>())?;
//! println!("macro F1 {:.3}", evaluation::f1_macro(&test.labels(), &predicted)?);
//! # Ok::<(), sirec_core::Error>(())
//! ```

pub mod dataset;
pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod search;
pub mod seed;
pub mod signal_file;
pub mod sirec;
pub mod synth;

pub use dataset::{DatasetMeta, LabeledDataset, LabeledRow};
pub use dsp::{SampledSignal, Spectrum, SweepConfig, WindowKind};
pub use error::{Error, Result};
pub use evaluation::{EvalReport, Summary};
pub use features::{FeatureVector, IntervalBounds, IntervalPair};
pub use search::{SearchResult, SearchSpace};
pub use sirec::{ModelConfig, SirecModel, TrainConfig};
pub use synth::SceneConfig;
