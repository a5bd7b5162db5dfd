//! Recording ingestion: messages carrying raw frames are turned into RIR rows
//! and appended to a dataset file.

mod mqtt;

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetAppender, DatasetMeta, LabeledRow};
use crate::dsp::{RirPipeline, SampledSignal};
use crate::error::{Error, Result};
use crate::synth::SceneConfig;

pub use mqtt::{MqttClient, MqttOptions, Publish};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestPayload {
    pub device_id: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(default)]
    pub label: Option<i32>,
    #[serde(default)]
    pub fine_fill_percent: Option<f64>,
    #[serde(default)]
    pub material: Option<String>,
    /// One full recording frame.
    pub samples: Vec<f64>,
}

/// One line of a newline-delimited JSON stream; over MQTT the topic comes
/// from the PUBLISH packet and only the payload travels as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestMessage {
    pub topic: String,
    pub payload: IngestPayload,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub appended: usize,
    pub unlabeled: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Appended,
    Unlabeled,
}

/// Runs every incoming frame through the RIR pipeline and appends labeled
/// results, one flushed write per row.
pub struct Ingestor {
    pipeline: RirPipeline,
    appender: DatasetAppender,
    stats: IngestStats,
}

impl Ingestor {
    /// Uses the scene's sweep, subtraction and storage settings, so ingested
    /// rows line up with synthetic ones.
    pub fn open(path: impl AsRef<Path>, scene: &SceneConfig) -> Result<Self> {
        scene.validate()?;
        let pipeline = RirPipeline::new(&scene.sweep, scene.alpha, scene.window, scene.align)?;
        let appender = DatasetAppender::open(path, scene.dataset_meta())?;
        Ok(Ingestor {
            pipeline,
            appender,
            stats: IngestStats::default(),
        })
    }

    pub fn meta(&self) -> &DatasetMeta {
        self.appender.meta()
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    pub fn handle(&mut self, msg: &IngestMessage) -> Result<Outcome> {
        let p = &msg.payload;
        let frame_len = self.pipeline.sweep().frame_len;
        if p.samples.len() != frame_len {
            return Err(Error::LengthMismatch {
                expected: frame_len,
                actual: p.samples.len(),
            });
        }
        let Some(label) = p.label else {
            return Ok(Outcome::Unlabeled);
        };
        if self.meta().classes.binary_search(&label).is_err() {
            return Err(Error::UnknownLabel(label));
        }
        let recording = SampledSignal::new(p.samples.clone(), self.pipeline.sweep().sample_rate_hz)?;
        let mut rir = self.pipeline.measure(&recording)?;
        rir.truncate(self.meta().samples);
        self.appender.append(&LabeledRow {
            rir,
            label,
            fine_fill_percent: p.fine_fill_percent,
            material: p.material.clone().unwrap_or_default(),
        })?;
        Ok(Outcome::Appended)
    }

    /// Like [`Ingestor::handle`] but records the outcome; a bad message is
    /// logged and counted instead of stopping the loop.
    pub fn consume(&mut self, msg: &IngestMessage) {
        match self.handle(msg) {
            Ok(Outcome::Appended) => self.stats.appended += 1,
            Ok(Outcome::Unlabeled) => {
                log::info!("{}: unlabeled frame from {} skipped", msg.topic, msg.payload.device_id);
                self.stats.unlabeled += 1;
            }
            Err(e) => {
                log::warn!("{}: rejected frame from {}: {e}", msg.topic, msg.payload.device_id);
                self.stats.rejected += 1;
            }
        }
    }

    fn reject(&mut self, what: &str, e: impl std::fmt::Display) {
        log::warn!("{what}: {e}");
        self.stats.rejected += 1;
    }
}

/// Consumes a newline-delimited JSON stream of [`IngestMessage`]s until EOF.
/// Blank lines are ignored; unparsable lines count as rejected.
pub fn ingest_ndjson<R: BufRead>(input: R, ingestor: &mut Ingestor) -> Result<IngestStats> {
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<IngestMessage>(&line) {
            Ok(msg) => ingestor.consume(&msg),
            Err(e) => ingestor.reject(&format!("line {}", i + 1), e),
        }
    }
    Ok(ingestor.stats())
}

/// Consumes PUBLISH packets until the broker closes the connection or
/// `max_messages` have been seen.
pub fn ingest_mqtt(
    client: &mut MqttClient,
    ingestor: &mut Ingestor,
    max_messages: Option<usize>,
) -> Result<IngestStats> {
    let mut seen = 0;
    while max_messages.is_none_or(|m| seen < m) {
        let Some(publish) = client.next_publish()? else {
            break;
        };
        seen += 1;
        match serde_json::from_slice::<IngestPayload>(&publish.payload) {
            Ok(payload) => ingestor.consume(&IngestMessage {
                topic: publish.topic,
                payload,
            }),
            Err(e) => ingestor.reject(&publish.topic, e),
        }
    }
    Ok(ingestor.stats())
}
