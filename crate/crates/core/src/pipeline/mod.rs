//! Streaming control loop: window -> classifier -> FIFO -> command frame.
//!
//! File input runs as fast as possible and is fully deterministic. Live input
//! ([`run_live`]) splits ingestion and inference across two threads joined by
//! a single freshest-wins slot, so a slow frame drops stale windows instead
//! of queueing them.

mod bench;
mod live;

pub use bench::{bench_inference, BenchError};
pub use live::run_live;

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use crate::command::{class_to_command, encode_command_frame, FingerCommand, FRAME_LEN};
use crate::config::{ConfigError, KeyValues};
use crate::gesture::{predict_class, GestureClass};
use crate::nn::{infer, NetworkSpec, NnError, ParameterStore};
use crate::postprocess::{FifoMemory, PostprocessError};
use crate::signal::{window_count, EmgRecord, SignalError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
    #[error("stride {stride} at {rate} Hz does not match sample rate {sample_rate}")]
    RateMismatch {
        stride: usize,
        rate: u32,
        sample_rate: u32,
    },
    #[error("network expects {expected:?} windows, source gives {found:?}")]
    WindowShape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("classifier produced an invalid class: {0}")]
    Classifier(String),
    #[error("sink: {0}")]
    Sink(#[from] std::io::Error),
}

/// Anything that maps one raw window to a gesture class.
pub trait Classifier {
    /// `(window_len, channels)` accepted by [`classify`](Self::classify).
    fn input_shape(&self) -> (usize, usize);

    fn classify(&mut self, window: &[f32]) -> Result<GestureClass, PipelineError>;
}

/// CNN classifier running in inference mode.
#[derive(Debug, Clone)]
pub struct NetworkClassifier {
    pub spec: NetworkSpec,
    pub params: ParameterStore<f32>,
}

impl NetworkClassifier {
    pub fn new(spec: NetworkSpec, params: ParameterStore<f32>) -> Result<Self, PipelineError> {
        params.check(&spec)?;
        if !spec.is_classifier() {
            return Err(NnError::NotClassifier.into());
        }
        Ok(Self { spec, params })
    }
}

impl Classifier for NetworkClassifier {
    fn input_shape(&self) -> (usize, usize) {
        self.spec.input
    }

    fn classify(&mut self, window: &[f32]) -> Result<GestureClass, PipelineError> {
        let probs = infer(&self.spec, &self.params, window)?;
        predict_class(&probs).map_err(|e| PipelineError::Classifier(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub weights: Option<PathBuf>,
    pub window_len: usize,
    /// Samples between consecutive windows in deployment.
    pub stride: usize,
    pub fifo: usize,
    /// Control rate, Hz.
    pub rate: u32,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            weights: None,
            window_len: 200,
            stride: 200,
            fifo: 5,
            rate: 10,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        if let Some(w) = kv.take::<String>("weights")? {
            c.weights = Some(w.into());
        }
        kv.set("window_len", &mut c.window_len)?;
        kv.set("stride", &mut c.stride)?;
        kv.set("fifo", &mut c.fifo)?;
        kv.set("rate", &mut c.rate)?;
        kv.set("seed", &mut c.seed)?;
        kv.finish()?;
        Ok(c)
    }

    pub fn frame_period_us(&self) -> u64 {
        1_000_000 / u64::from(self.rate.max(1))
    }

    /// Stride must equal one control period worth of samples.
    pub fn check_rate(&self, sample_rate: u32) -> Result<(), PipelineError> {
        if self.stride == 0
            || self.rate == 0
            || self.stride as u64 * u64::from(self.rate) != u64::from(sample_rate)
        {
            return Err(PipelineError::RateMismatch {
                stride: self.stride,
                rate: self.rate,
                sample_rate,
            });
        }
        Ok(())
    }
}

/// Everything produced for one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameOutput {
    pub seq: u16,
    /// First sample of the window in the source.
    pub origin: usize,
    pub predicted: GestureClass,
    /// Output of the aggregation unit.
    pub decided: GestureClass,
    pub command: FingerCommand,
    pub frame: [u8; FRAME_LEN],
    pub latency_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamStats {
    pub frames: u64,
    pub p50_us: u64,
    pub p95_us: u64,
    pub max_us: u64,
    /// Frames whose latency exceeded the frame period.
    pub misses: u64,
    /// Changes of the emitted command between consecutive frames.
    pub transitions: u64,
    /// Windows dropped because a fresher one arrived first (live mode).
    pub skipped: u64,
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl StreamStats {
    pub fn from_latencies(latencies_us: &[u64], period_us: u64) -> Self {
        let mut sorted = latencies_us.to_vec();
        sorted.sort_unstable();
        Self {
            frames: sorted.len() as u64,
            p50_us: percentile(&sorted, 0.50),
            p95_us: percentile(&sorted, 0.95),
            max_us: sorted.last().copied().unwrap_or(0),
            misses: sorted.iter().filter(|&&l| l > period_us).count() as u64,
            transitions: 0,
            skipped: 0,
        }
    }
}

impl fmt::Display for StreamStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stats,frames,{},p50us,{},p95us,{},maxus,{},misses,{}",
            self.frames, self.p50_us, self.p95_us, self.max_us, self.misses
        )
    }
}

/// Per-frame stage shared by file and live modes.
pub(crate) struct Stage<'a, C> {
    classifier: &'a mut C,
    fifo: FifoMemory,
    seq: u16,
    latencies: Vec<u64>,
    last_command: Option<FingerCommand>,
    transitions: u64,
}

impl<'a, C: Classifier> Stage<'a, C> {
    pub(crate) fn new(classifier: &'a mut C, fifo: usize) -> Result<Self, PipelineError> {
        Ok(Self {
            classifier,
            fifo: FifoMemory::new(fifo)?,
            seq: 0,
            latencies: Vec::new(),
            last_command: None,
            transitions: 0,
        })
    }

    pub(crate) fn process(
        &mut self,
        origin: usize,
        window: &[f32],
    ) -> Result<FrameOutput, PipelineError> {
        let start = Instant::now();
        let predicted = self.classifier.classify(window)?;
        let decided = self.fifo.push_and_aggregate(predicted);
        let command = class_to_command(decided);
        let frame = encode_command_frame(command, self.seq);
        let latency_us = start.elapsed().as_micros() as u64;
        let out = FrameOutput {
            seq: self.seq,
            origin,
            predicted,
            decided,
            command,
            frame,
            latency_us,
        };
        self.seq = self.seq.wrapping_add(1);
        self.latencies.push(latency_us);
        if self.last_command.is_some_and(|c| c != command) {
            self.transitions += 1;
        }
        self.last_command = Some(command);
        Ok(out)
    }

    pub(crate) fn stats(&self, period_us: u64) -> StreamStats {
        StreamStats {
            transitions: self.transitions,
            ..StreamStats::from_latencies(&self.latencies, period_us)
        }
    }
}

fn check_shape<C: Classifier>(
    classifier: &C,
    config: &PipelineConfig,
    channels: usize,
) -> Result<(), PipelineError> {
    let found = (config.window_len, channels);
    if classifier.input_shape() != found {
        return Err(PipelineError::WindowShape {
            expected: classifier.input_shape(),
            found,
        });
    }
    Ok(())
}

/// Runs the control loop over a whole record (file mode). One command per
/// window; `sink` sees each frame as it is produced.
pub fn run_stream<C: Classifier>(
    record: &EmgRecord,
    config: &PipelineConfig,
    classifier: &mut C,
    mut sink: impl FnMut(&FrameOutput) -> std::io::Result<()>,
) -> Result<(Vec<FrameOutput>, StreamStats), PipelineError> {
    config.check_rate(record.sample_rate())?;
    check_shape(classifier, config, record.channels())?;
    crate::signal::check_window_args(record.num_samples(), config.window_len, config.stride)?;
    let count = window_count(record.num_samples(), config.window_len, config.stride);
    let mut stage = Stage::new(classifier, config.fifo)?;
    let mut outputs = Vec::with_capacity(count);
    for k in 0..count {
        let origin = k * config.stride;
        let out = stage.process(origin, record.window_slice(origin, config.window_len))?;
        sink(&out)?;
        outputs.push(out);
    }
    let stats = stage.stats(config.frame_period_us());
    Ok((outputs, stats))
}
