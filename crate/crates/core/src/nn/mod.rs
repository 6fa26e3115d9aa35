//! From-scratch 1D CNN: layers, manual backpropagation, Adam and the EMGW
//! weight format.
//!
//! Activations are row-major `[len x channels]` buffers for sequence layers
//! and flat vectors after `Flatten`. Everything is generic over [`Scalar`] so
//! the production path runs in `f32` and gradient checks run in `f64`.

mod adam;
mod gradcheck;
mod layers;
mod network;
mod params;
mod spec;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{gradient_check, relative_error};
pub use layers::{
    conv1d_apply, conv1d_backward, conv1d_reference, dense_apply, dense_backward, log_sum_exp,
    relu, softmax,
};
pub use network::{
    backward, forward, infer, loss_and_grads, sample_loss, BatchResult, ForwardTrace, MaskKey,
    Mode, Sample,
};
pub use params::{
    load_params, peek_fingerprint, save_params, LayerKind, LayerParams, ParameterStore,
};
pub use spec::{
    fingerprint, fnv1a64, parameter_count, same_pad, LayerSpec, NetworkSpec, ParamCounts, Shape,
};

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign};

/// Floating-point element type of activations and parameters.
pub trait Scalar:
    num_traits::Float + AddAssign + MulAssign + Send + Sync + Debug + Default + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("layer {index}: {reason}")]
    InvalidLayer { index: usize, reason: String },
    #[error("layer {layer}: expected input {expected}, got {found}")]
    ShapeMismatch {
        layer: usize,
        expected: String,
        found: String,
    },
    #[error("input has {found} values, network expects {expected}")]
    InputShape { expected: usize, found: usize },
    #[error("layer {layer}: parameters do not match the layer ({reason})")]
    ParamMismatch { layer: usize, reason: String },
    #[error("network must end with a single softmax layer")]
    NotClassifier,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),
    #[error("finite-difference step must be positive")]
    ZeroStep,
    #[error("bad magic: not an EMGW weights file")]
    BadMagic,
    #[error("unsupported weights version {0}")]
    UnsupportedVersion(u16),
    #[error("wrong architecture: file fingerprint {found:016x}, expected {expected:016x}")]
    WrongArchitecture { expected: u64, found: u64 },
    #[error("truncated weights file at byte {0}")]
    Truncated(usize),
}
