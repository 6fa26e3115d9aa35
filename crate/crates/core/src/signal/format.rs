//! EMG1 binary records and the `emgcsv` text alternative.
//!
//! EMG1 layout, little-endian:
//!
//! | bytes | field                      |
//! |-------|----------------------------|
//! | 4     | magic `EMG1`               |
//! | 2     | version (1)                |
//! | 2     | channels                   |
//! | 4     | sample rate, Hz            |
//! | 2     | subject id                 |
//! | 2     | gesture id                 |
//! | 2     | repetition                 |
//! | 8     | number of samples          |
//! | 4·n·c | f32 samples, sample-major  |

use std::io::Read;

use super::{EmgRecord, RecordMeta, SignalError};
use crate::gesture::GestureClass;

pub(crate) const MAGIC: [u8; 4] = *b"EMG1";
const VERSION: u16 = 1;
pub(crate) const HEADER_LEN: usize = 26;
const CSV_PREFIX: &str = "# emgcsv";

/// Header value of `num_samples` marking an unbounded stream payload.
pub const UNBOUNDED: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Header {
    pub channels: u16,
    pub sample_rate: u32,
    pub meta: RecordMeta,
    pub num_samples: u64,
}

pub(crate) fn encode_header(h: &Header, out: &mut Vec<u8>) {
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&h.channels.to_le_bytes());
    out.extend_from_slice(&h.sample_rate.to_le_bytes());
    out.extend_from_slice(&h.meta.subject_id.to_le_bytes());
    out.extend_from_slice(&(h.meta.gesture.index() as u16).to_le_bytes());
    out.extend_from_slice(&h.meta.repetition.to_le_bytes());
    out.extend_from_slice(&h.num_samples.to_le_bytes());
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

pub(crate) fn decode_header(b: &[u8]) -> Result<Header, SignalError> {
    if b.len() < 4 || b[..4] != MAGIC {
        return Err(SignalError::BadMagic);
    }
    if b.len() < HEADER_LEN {
        return Err(SignalError::Truncated {
            expected: HEADER_LEN,
            found: b.len(),
        });
    }
    let version = u16_at(b, 4);
    if version != VERSION {
        return Err(SignalError::UnsupportedVersion(version));
    }
    let channels = u16_at(b, 6);
    let sample_rate = u32::from_le_bytes(b[8..12].try_into().unwrap());
    let subject_id = u16_at(b, 12);
    let gesture_id = u16_at(b, 14);
    let repetition = u16_at(b, 16);
    let num_samples = u64::from_le_bytes(b[18..26].try_into().unwrap());
    if channels == 0 {
        return Err(SignalError::ZeroChannels);
    }
    if sample_rate == 0 {
        return Err(SignalError::ZeroSampleRate);
    }
    let gesture = GestureClass::new(gesture_id as usize)
        .map_err(|_| SignalError::InvalidGesture(gesture_id))?;
    Ok(Header {
        channels,
        sample_rate,
        meta: RecordMeta {
            subject_id,
            gesture,
            repetition,
        },
        num_samples,
    })
}

/// Serialises a record to EMG1 bytes.
pub fn save_record(record: &EmgRecord) -> Vec<u8> {
    let header = Header {
        channels: record.channels() as u16,
        sample_rate: record.sample_rate(),
        meta: record.meta,
        num_samples: record.num_samples() as u64,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + record.samples().len() * 4);
    encode_header(&header, &mut out);
    for v in record.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses an EMG1 binary record or an `emgcsv v1` text record.
pub fn load_record(bytes: &[u8]) -> Result<EmgRecord, SignalError> {
    if bytes.starts_with(CSV_PREFIX.as_bytes()) {
        return load_csv(bytes);
    }
    let h = decode_header(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let expected = (h.num_samples as u128) * (h.channels as u128) * 4;
    if (payload.len() as u128) < expected {
        return Err(SignalError::Truncated {
            expected: HEADER_LEN.saturating_add(expected.min(usize::MAX as u128) as usize),
            found: bytes.len(),
        });
    }
    let samples = payload[..expected as usize]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EmgRecord::new(h.channels as usize, h.sample_rate, samples, h.meta)
}

fn load_csv(bytes: &[u8]) -> Result<EmgRecord, SignalError> {
    let text = std::str::from_utf8(bytes).map_err(|_| SignalError::Csv {
        line: 1,
        reason: "not utf-8".into(),
    })?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let mut channels = None;
    let mut rate = None;
    let mut version_ok = false;
    for tok in header.trim_start_matches(CSV_PREFIX).split_whitespace() {
        if tok == "v1" {
            version_ok = true;
        } else if let Some(v) = tok.strip_prefix("channels=") {
            channels = v.parse::<usize>().ok();
        } else if let Some(v) = tok.strip_prefix("rate=") {
            rate = v.parse::<u32>().ok();
        }
    }
    let bad = |reason: &str| SignalError::Csv {
        line: 1,
        reason: reason.into(),
    };
    if !version_ok {
        return Err(bad("missing v1 version tag"));
    }
    let channels = channels.ok_or_else(|| bad("missing channels="))?;
    let rate = rate.ok_or_else(|| bad("missing rate="))?;
    if channels == 0 {
        return Err(SignalError::ZeroChannels);
    }
    if rate == 0 {
        return Err(SignalError::ZeroSampleRate);
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = samples.len();
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| SignalError::Csv {
                line: i + 2,
                reason: format!("bad value {field:?}"),
            })?;
            samples.push(v);
        }
        if samples.len() - before != channels {
            return Err(SignalError::Csv {
                line: i + 2,
                reason: format!("expected {channels} values, got {}", samples.len() - before),
            });
        }
    }
    EmgRecord::new(channels, rate, samples, RecordMeta::default())
}

/// Incremental reader for an EMG1 header followed by a (possibly unbounded)
/// sample payload. Used for live input.
pub struct RecordStreamReader<R> {
    inner: R,
    channels: usize,
    sample_rate: u32,
    meta: RecordMeta,
    remaining: Option<u64>,
    buf: Vec<u8>,
}

impl<R: Read> RecordStreamReader<R> {
    pub fn new(mut inner: R) -> Result<Self, SignalError> {
        let mut head = [0u8; HEADER_LEN];
        let got = read_full(&mut inner, &mut head)?;
        if got < 4 || head[..4] != MAGIC {
            return Err(SignalError::BadMagic);
        }
        if got < HEADER_LEN {
            return Err(SignalError::Truncated {
                expected: HEADER_LEN,
                found: got,
            });
        }
        let h = decode_header(&head)?;
        let channels = h.channels as usize;
        Ok(Self {
            inner,
            channels,
            sample_rate: h.sample_rate,
            meta: h.meta,
            remaining: (h.num_samples != UNBOUNDED).then_some(h.num_samples),
            buf: vec![0; channels * 4],
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn meta(&self) -> RecordMeta {
        self.meta
    }

    /// Reads the next sample into `out`. Returns `Ok(false)` at end of stream.
    pub fn next_sample(&mut self, out: &mut Vec<f32>) -> Result<bool, SignalError> {
        if self.remaining == Some(0) {
            return Ok(false);
        }
        let got = read_full(&mut self.inner, &mut self.buf)?;
        if got == 0 {
            return match self.remaining {
                None => Ok(false),
                Some(_) => Err(SignalError::Truncated {
                    expected: self.buf.len(),
                    found: 0,
                }),
            };
        }
        if got < self.buf.len() {
            return Err(SignalError::Truncated {
                expected: self.buf.len(),
                found: got,
            });
        }
        for c in self.buf.chunks_exact(4) {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(SignalError::NonFinite(out.len()));
            }
            out.push(v);
        }
        if let Some(r) = self.remaining.as_mut() {
            *r -= 1;
        }
        Ok(true)
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, SignalError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(_) => break,
        }
    }
    Ok(filled)
}

/// Encodes a stream header whose payload length is unbounded.
pub fn stream_header(channels: u16, sample_rate: u32, meta: RecordMeta) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    encode_header(
        &Header {
            channels,
            sample_rate,
            meta,
            num_samples: UNBOUNDED,
        },
        &mut out,
    );
    out
}
