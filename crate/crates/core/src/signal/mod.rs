//! EMG records, windowing and datasets.
//!
//! Samples are stored row-major (`[sample][channel]`), so every window of
//! consecutive samples is one contiguous slice of the record buffer. Values
//! are raw millivolts; nothing in this module filters, rectifies or
//! normalises a signal.

mod format;
mod split;
mod synth;

pub use format::{load_record, save_record, stream_header, RecordStreamReader, UNBOUNDED};
pub use split::{
    split_paper, DatasetSplit, OwnedWindows, SplitConfig, WindowRef, WindowSet, WindowSplit,
};
pub use synth::{synth_dataset, ClassRecipe, SynthSpec};

use std::collections::BTreeMap;

use crate::gesture::GestureClass;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("bad magic: not an EMG1 or emgcsv record")]
    BadMagic,
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("channel count must be positive")]
    ZeroChannels,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("sample buffer holds {len} values, not a multiple of {channels} channels")]
    RaggedSamples { len: usize, channels: usize },
    #[error("invalid gesture id {0}")]
    InvalidGesture(u16),
    #[error("malformed csv at line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("downsampling factor must be at least 1")]
    ZeroFactor,
    #[error("factor {factor} does not divide sample rate {rate}")]
    FactorDoesNotDivide { factor: u32, rate: u32 },
    #[error("record has {samples} samples, shorter than window of {window}")]
    TooShort { samples: usize, window: usize },
    #[error("window length and stride must be at least 1")]
    ZeroWindow,
    #[error("synthetic spec invalid: {0}")]
    InvalidSynthSpec(&'static str),
    #[error("duplicate record key (subject {0}, gesture {1}, repetition {2})")]
    DuplicateKey(u16, u16, u16),
    #[error("records disagree on {0}")]
    MixedRecords(&'static str),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

/// Identity of a record inside a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RecordMeta {
    pub subject_id: u16,
    pub gesture: GestureClass,
    pub repetition: u16,
}

/// Multi-channel raw EMG time series in millivolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EmgRecord {
    channels: usize,
    sample_rate: u32,
    samples: Vec<f32>,
    pub meta: RecordMeta,
}

impl EmgRecord {
    /// Builds a record from a row-major `[num_samples x channels]` buffer.
    pub fn new(
        channels: usize,
        sample_rate: u32,
        samples: Vec<f32>,
        meta: RecordMeta,
    ) -> Result<Self, SignalError> {
        if channels == 0 {
            return Err(SignalError::ZeroChannels);
        }
        if sample_rate == 0 {
            return Err(SignalError::ZeroSampleRate);
        }
        if !samples.len().is_multiple_of(channels) {
            return Err(SignalError::RaggedSamples {
                len: samples.len(),
                channels,
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self {
            channels,
            sample_rate,
            samples,
            meta,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len() / self.channels
    }

    /// Row-major sample buffer.
    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample(&self, index: usize) -> &[f32] {
        &self.samples[index * self.channels..(index + 1) * self.channels]
    }

    /// Contiguous `[len x channels]` slice starting at sample `origin`.
    pub fn window_slice(&self, origin: usize, len: usize) -> &[f32] {
        &self.samples[origin * self.channels..(origin + len) * self.channels]
    }

    pub fn duration_secs(&self) -> f64 {
        self.num_samples() as f64 / f64::from(self.sample_rate)
    }
}

/// Keeps samples `0, factor, 2*factor, ...` with no anti-alias filtering.
pub fn downsample_by_jumping(record: &EmgRecord, factor: u32) -> Result<EmgRecord, SignalError> {
    if factor == 0 {
        return Err(SignalError::ZeroFactor);
    }
    if !record.sample_rate.is_multiple_of(factor) {
        return Err(SignalError::FactorDoesNotDivide {
            factor,
            rate: record.sample_rate,
        });
    }
    let c = record.channels;
    let samples: Vec<f32> = record
        .samples
        .chunks_exact(c)
        .step_by(factor as usize)
        .flatten()
        .copied()
        .collect();
    Ok(EmgRecord {
        channels: c,
        sample_rate: record.sample_rate / factor,
        samples,
        meta: record.meta,
    })
}

/// A verbatim `[window_len x channels]` slice of a record.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTensor {
    pub values: Vec<f32>,
    pub len: usize,
    pub channels: usize,
    /// Index of the first sample in the source record.
    pub origin: usize,
}

/// Number of windows of `window_len` with step `stride` that fit in `num_samples`.
pub fn window_count(num_samples: usize, window_len: usize, stride: usize) -> usize {
    if window_len == 0 || stride == 0 || num_samples < window_len {
        0
    } else {
        (num_samples - window_len) / stride + 1
    }
}

pub(crate) fn check_window_args(
    num_samples: usize,
    window_len: usize,
    stride: usize,
) -> Result<(), SignalError> {
    if window_len == 0 || stride == 0 {
        return Err(SignalError::ZeroWindow);
    }
    if num_samples < window_len {
        return Err(SignalError::TooShort {
            samples: num_samples,
            window: window_len,
        });
    }
    Ok(())
}

/// Cuts `record` into windows starting at `k * stride`.
pub fn slide_windows(
    record: &EmgRecord,
    window_len: usize,
    stride: usize,
) -> Result<Vec<WindowTensor>, SignalError> {
    check_window_args(record.num_samples(), window_len, stride)?;
    let count = window_count(record.num_samples(), window_len, stride);
    Ok((0..count)
        .map(|k| {
            let origin = k * stride;
            WindowTensor {
                values: record.window_slice(origin, window_len).to_vec(),
                len: window_len,
                channels: record.channels,
                origin,
            }
        })
        .collect())
}

/// Records keyed by (subject, gesture, repetition).
///
/// All records share one channel count and sample rate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetIndex {
    records: Vec<EmgRecord>,
    keys: BTreeMap<(u16, u16, u16), usize>,
}

impl DatasetIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = EmgRecord>) -> Result<Self, SignalError> {
        let mut index = Self::new();
        for r in records {
            index.insert(r)?;
        }
        Ok(index)
    }

    pub fn insert(&mut self, record: EmgRecord) -> Result<(), SignalError> {
        if let Some(first) = self.records.first() {
            if first.channels != record.channels {
                return Err(SignalError::MixedRecords("channel count"));
            }
            if first.sample_rate != record.sample_rate {
                return Err(SignalError::MixedRecords("sample rate"));
            }
        }
        let m = record.meta;
        let key = (m.subject_id, m.gesture.index() as u16, m.repetition);
        if self.keys.contains_key(&key) {
            return Err(SignalError::DuplicateKey(key.0, key.1, key.2));
        }
        self.keys.insert(key, self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmgRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &EmgRecord {
        &self.records[i]
    }

    pub fn get(&self, subject: u16, gesture: GestureClass, repetition: u16) -> Option<&EmgRecord> {
        self.keys
            .get(&(subject, gesture.index() as u16, repetition))
            .map(|&i| &self.records[i])
    }

    pub fn channels(&self) -> Option<usize> {
        self.records.first().map(EmgRecord::channels)
    }

    pub fn sample_rate(&self) -> Option<u32> {
        self.records.first().map(EmgRecord::sample_rate)
    }

    pub fn subjects(&self) -> Vec<u16> {
        let mut s: Vec<u16> = self.records.iter().map(|r| r.meta.subject_id).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn repetitions(&self) -> Vec<u16> {
        let mut s: Vec<u16> = self.records.iter().map(|r| r.meta.repetition).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mono(values: &[f32], rate: u32) -> EmgRecord {
        EmgRecord::new(1, rate, values.to_vec(), RecordMeta::default()).unwrap()
    }

    #[test]
    fn downsample_identity_and_jump() {
        let r = mono(&[1., 2., 3., 4., 5.], 4);
        assert_eq!(downsample_by_jumping(&r, 1).unwrap(), r);
        let d = downsample_by_jumping(&r, 2).unwrap();
        assert_eq!(d.samples(), &[1., 3., 5.]);
        assert_eq!(d.sample_rate(), 2);
    }

    #[test]
    fn downsample_twenty_seconds() {
        let r = EmgRecord::new(8, 4000, vec![0.0; 80_000 * 8], RecordMeta::default()).unwrap();
        let d = downsample_by_jumping(&r, 2).unwrap();
        assert_eq!(d.num_samples(), 40_000);
        assert_eq!(d.sample_rate(), 2000);
    }

    #[test]
    fn downsample_rejects_bad_factor() {
        let r = mono(&[1., 2., 3.], 3);
        assert_eq!(downsample_by_jumping(&r, 0), Err(SignalError::ZeroFactor));
        assert!(matches!(
            downsample_by_jumping(&r, 2),
            Err(SignalError::FactorDoesNotDivide { factor: 2, rate: 3 })
        ));
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_count(40_000, 200, 20), 1991);
        assert_eq!(window_count(200, 200, 20), 1);
        assert_eq!(window_count(239, 200, 20), 2);
        let r = mono(&vec![0.0; 239], 2000);
        assert_eq!(slide_windows(&r, 200, 20).unwrap().len(), 2);
        assert!(matches!(
            slide_windows(&r, 240, 20),
            Err(SignalError::TooShort {
                samples: 239,
                window: 240
            })
        ));
    }

    #[test]
    fn record_validation() {
        assert_eq!(
            EmgRecord::new(0, 1, vec![], RecordMeta::default()),
            Err(SignalError::ZeroChannels)
        );
        assert_eq!(
            EmgRecord::new(1, 0, vec![], RecordMeta::default()),
            Err(SignalError::ZeroSampleRate)
        );
        assert_eq!(
            EmgRecord::new(1, 1, vec![f32::NAN], RecordMeta::default()),
            Err(SignalError::NonFinite(0))
        );
    }

    #[test]
    fn dataset_rejects_duplicates_and_mixed_rates() {
        let a = mono(&[0.0; 4], 4);
        let mut ds = DatasetIndex::new();
        ds.insert(a.clone()).unwrap();
        assert!(matches!(
            ds.insert(a),
            Err(SignalError::DuplicateKey(0, 0, 0))
        ));
        let mut b = mono(&[0.0; 4], 8);
        b.meta.subject_id = 1;
        assert_eq!(ds.insert(b), Err(SignalError::MixedRecords("sample rate")));
    }

    fn brute_windows(n: usize, w: usize, s: usize) -> Vec<usize> {
        let mut starts = Vec::new();
        let mut k = 0;
        while k + w <= n {
            starts.push(k);
            k += s;
        }
        starts
    }

    proptest! {
        #[test]
        fn window_formula_matches_brute_force(n in 1usize..400, w in 1usize..200, s in 1usize..50) {
            prop_assume!(w <= n);
            let starts = brute_windows(n, w, s);
            prop_assert_eq!(window_count(n, w, s), starts.len());
            let values: Vec<f32> = (0..n * 2).map(|i| i as f32).collect();
            let r = EmgRecord::new(2, 1000, values, RecordMeta::default()).unwrap();
            let windows = slide_windows(&r, w, s).unwrap();
            prop_assert_eq!(windows.len(), starts.len());
            for (win, &start) in windows.iter().zip(&starts) {
                prop_assert_eq!(win.origin, start);
                for t in 0..w {
                    for c in 0..2 {
                        prop_assert_eq!(win.values[t * 2 + c], r.sample(start + t)[c]);
                    }
                }
            }
        }

        #[test]
        fn downsample_composes(len in 1usize..300, a in 1u32..5, b in 1u32..5) {
            let values: Vec<f32> = (0..len).map(|i| i as f32 * 0.5).collect();
            let r = mono(&values, 3600);
            let direct = downsample_by_jumping(&r, a * b).unwrap();
            let chained = downsample_by_jumping(&downsample_by_jumping(&r, a).unwrap(), b).unwrap();
            prop_assert_eq!(direct, chained);
        }
    }
}
