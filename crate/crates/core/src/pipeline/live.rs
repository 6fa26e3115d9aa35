use std::collections::VecDeque;
use std::io::Read;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{
    check_shape, Classifier, FrameOutput, PipelineConfig, PipelineError, Stage, StreamStats,
};
use crate::signal::{RecordStreamReader, SignalError};

#[derive(Default)]
struct Slot {
    pending: Option<(usize, Vec<f32>)>,
    closed: bool,
    skipped: u64,
    error: Option<SignalError>,
}

/// Holds at most one window; a new window overwrites an unconsumed one.
#[derive(Default)]
struct Handoff {
    slot: Mutex<Slot>,
    ready: Condvar,
}

impl Handoff {
    fn publish(&self, origin: usize, window: Vec<f32>) {
        let mut s = self.slot.lock().unwrap();
        if s.pending.replace((origin, window)).is_some() {
            s.skipped += 1;
        }
        self.ready.notify_one();
    }

    fn close(&self, error: Option<SignalError>) {
        let mut s = self.slot.lock().unwrap();
        s.closed = true;
        s.error = error;
        self.ready.notify_one();
    }

    /// Next window, or `None` once the producer is done and nothing is pending.
    fn take(&self) -> Option<(usize, Vec<f32>)> {
        let mut s = self.slot.lock().unwrap();
        loop {
            if let Some(w) = s.pending.take() {
                return Some(w);
            }
            if s.closed {
                return None;
            }
            s = self.ready.wait(s).unwrap();
        }
    }
}

fn produce<R: Read>(
    mut reader: RecordStreamReader<R>,
    window_len: usize,
    stride: usize,
    pace: bool,
    stop: &AtomicBool,
    handoff: &Handoff,
) -> Result<(), SignalError> {
    let channels = reader.channels();
    let rate = f64::from(reader.sample_rate());
    let mut ring: VecDeque<f32> = VecDeque::with_capacity(window_len * channels);
    let mut sample = Vec::with_capacity(channels);
    let mut total = 0usize;
    let start = Instant::now();
    while !stop.load(Ordering::Relaxed) {
        sample.clear();
        if !reader.next_sample(&mut sample)? {
            break;
        }
        if ring.len() == window_len * channels {
            ring.drain(..channels);
        }
        ring.extend(&sample);
        total += 1;
        if pace {
            let due = Duration::from_secs_f64(total as f64 / rate);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
        if total >= window_len && (total - window_len).is_multiple_of(stride) {
            handoff.publish(total - window_len, ring.iter().copied().collect());
        }
    }
    Ok(())
}

/// Live mode: a producer thread ingests samples and publishes every
/// `stride`-th window; this thread classifies the freshest one available.
/// With `pace` set the producer replays samples at the stream's sample rate.
pub fn run_live<R, C>(
    reader: RecordStreamReader<R>,
    config: &PipelineConfig,
    classifier: &mut C,
    pace: bool,
    mut sink: impl FnMut(&FrameOutput) -> std::io::Result<()>,
) -> Result<(Vec<FrameOutput>, StreamStats), PipelineError>
where
    R: Read + Send,
    C: Classifier,
{
    config.check_rate(reader.sample_rate())?;
    check_shape(classifier, config, reader.channels())?;
    if config.window_len == 0 {
        return Err(SignalError::ZeroWindow.into());
    }
    let handoff = Handoff::default();
    let stop = AtomicBool::new(false);
    let mut stage = Stage::new(classifier, config.fifo)?;
    let mut outputs = Vec::new();
    let consumed: Result<(), PipelineError> = std::thread::scope(|scope| {
        let (window_len, stride) = (config.window_len, config.stride);
        let (h, s) = (&handoff, &stop);
        scope.spawn(move || {
            let result = produce(reader, window_len, stride, pace, s, h);
            h.close(result.err());
        });
        while let Some((origin, window)) = handoff.take() {
            let step = stage.process(origin, &window).and_then(|out| {
                sink(&out)?;
                outputs.push(out);
                Ok(())
            });
            if let Err(e) = step {
                stop.store(true, Ordering::Relaxed);
                return Err(e);
            }
        }
        Ok(())
    });
    consumed?;
    let slot = handoff.slot.into_inner().unwrap();
    if let Some(e) = slot.error {
        return Err(e.into());
    }
    if outputs.is_empty() {
        return Err(SignalError::TooShort {
            samples: 0,
            window: config.window_len,
        }
        .into());
    }
    let stats = StreamStats {
        skipped: slot.skipped,
        ..stage.stats(config.frame_period_us())
    };
    Ok((outputs, stats))
}
