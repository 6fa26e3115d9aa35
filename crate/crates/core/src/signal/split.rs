//! Labeled window sets and the subject/repetition split.

use std::sync::Arc;

use super::{check_window_args, window_count, DatasetIndex, SignalError};
use crate::config::{ConfigError, KeyValues};
use crate::gesture::GestureClass;

/// Random-access collection of labeled `[len x channels]` windows.
pub trait WindowSet: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major window values.
    fn window(&self, i: usize) -> &[f32];

    fn label(&self, i: usize) -> GestureClass;

    /// `(window_len, channels)`
    fn shape(&self) -> (usize, usize);
}

/// Position of one window inside a [`DatasetIndex`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowRef {
    pub record: usize,
    pub origin: usize,
}

/// Windows referencing records of a shared dataset (no copies).
#[derive(Debug, Clone)]
pub struct WindowSplit {
    dataset: Arc<DatasetIndex>,
    window_len: usize,
    refs: Vec<WindowRef>,
}

impl WindowSplit {
    pub fn new(dataset: Arc<DatasetIndex>, window_len: usize, refs: Vec<WindowRef>) -> Self {
        Self {
            dataset,
            window_len,
            refs,
        }
    }

    /// All windows of every record, in record order.
    pub fn all(dataset: Arc<DatasetIndex>, window_len: usize, stride: usize) -> Self {
        let refs = dataset
            .records()
            .iter()
            .enumerate()
            .flat_map(|(ri, r)| {
                (0..window_count(r.num_samples(), window_len, stride)).map(move |k| WindowRef {
                    record: ri,
                    origin: k * stride,
                })
            })
            .collect();
        Self::new(dataset, window_len, refs)
    }

    pub fn refs(&self) -> &[WindowRef] {
        &self.refs
    }

    pub fn dataset(&self) -> &Arc<DatasetIndex> {
        &self.dataset
    }
}

impl WindowSet for WindowSplit {
    fn len(&self) -> usize {
        self.refs.len()
    }

    fn window(&self, i: usize) -> &[f32] {
        let r = self.refs[i];
        self.dataset
            .record(r.record)
            .window_slice(r.origin, self.window_len)
    }

    fn label(&self, i: usize) -> GestureClass {
        self.dataset.record(self.refs[i].record).meta.gesture
    }

    fn shape(&self) -> (usize, usize) {
        (self.window_len, self.dataset.channels().unwrap_or(0))
    }
}

/// In-memory labeled windows, mostly for tests and toy problems.
#[derive(Debug, Clone, Default)]
pub struct OwnedWindows {
    pub len: usize,
    pub channels: usize,
    pub data: Vec<Vec<f32>>,
    pub labels: Vec<GestureClass>,
}

impl WindowSet for OwnedWindows {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn window(&self, i: usize) -> &[f32] {
        &self.data[i]
    }

    fn label(&self, i: usize) -> GestureClass {
        self.labels[i]
    }

    fn shape(&self) -> (usize, usize) {
        (self.len, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitConfig {
    /// Subjects held out for testing; `None` picks the two highest ids.
    pub test_subjects: Option<Vec<u16>>,
    pub val_repetition: u16,
    pub window_len: usize,
    pub stride: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_subjects: None,
            val_repetition: 2,
            window_len: 200,
            stride: 20,
        }
    }
}

impl SplitConfig {
    /// Reads `window_len`, `stride`, `val_repetition` and `test_subjects`
    /// (comma separated ids) from `kv`.
    pub fn take_from(kv: &mut KeyValues) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        kv.set("window_len", &mut c.window_len)?;
        kv.set("stride", &mut c.stride)?;
        kv.set("val_repetition", &mut c.val_repetition)?;
        if let Some(ids) = kv.take_list("test_subjects")? {
            c.test_subjects = Some(ids);
        }
        Ok(c)
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: WindowSplit,
    pub validation: WindowSplit,
    pub test: WindowSplit,
}

/// Test = every window of the test subjects; validation = the held-out
/// repetition of the remaining subjects; train = everything else.
pub fn split_paper(
    dataset: Arc<DatasetIndex>,
    config: &SplitConfig,
) -> Result<DatasetSplit, SignalError> {
    if dataset.is_empty() {
        return Err(SignalError::EmptyDataset);
    }
    let subjects = dataset.subjects();
    let test_subjects = match &config.test_subjects {
        Some(t) => t.clone(),
        None => subjects.iter().rev().take(2).copied().collect(),
    };
    if let Some(s) = test_subjects.iter().find(|s| !subjects.contains(s)) {
        return Err(SignalError::InvalidSplit(format!(
            "unknown test subject {s}"
        )));
    }
    if subjects.iter().all(|s| test_subjects.contains(s)) {
        return Err(SignalError::InvalidSplit(
            "test subjects cover every subject".into(),
        ));
    }
    if !dataset.repetitions().contains(&config.val_repetition) {
        return Err(SignalError::InvalidSplit(format!(
            "unknown validation repetition {}",
            config.val_repetition
        )));
    }
    let (w, s) = (config.window_len, config.stride);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (ri, record) in dataset.records().iter().enumerate() {
        check_window_args(record.num_samples(), w, s)?;
        let target = if test_subjects.contains(&record.meta.subject_id) {
            &mut test
        } else if record.meta.repetition == config.val_repetition {
            &mut val
        } else {
            &mut train
        };
        let n = window_count(record.num_samples(), w, s);
        target.extend((0..n).map(|k| WindowRef {
            record: ri,
            origin: k * s,
        }));
    }
    Ok(DatasetSplit {
        train: WindowSplit::new(dataset.clone(), w, train),
        validation: WindowSplit::new(dataset.clone(), w, val),
        test: WindowSplit::new(dataset, w, test),
    })
}
