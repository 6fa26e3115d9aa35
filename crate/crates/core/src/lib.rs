//! Prosthetic hand control from raw surface EMG.
//!
//! The crate covers the whole control stack:
//!
//! ```text
//! raw EMG (mV) -> 200x8 window -> 1D CNN -> FIFO + majority vote -> finger command
//! ```
//!
//! * [`signal`]: records, the EMG1 file format, downsampling, windowing,
//!   synthetic datasets and the subject/repetition split.
//! * [`nn`]: a small from-scratch tensor library (1D convolution, dense,
//!   ReLU, dropout, softmax) with manual backpropagation and Adam.
//! * [`gesture`]: the 15 gesture classes, the reference network, training
//!   and evaluation.
//! * [`postprocess`]: the FIFO aggregation unit and its error model.
//! * [`command`]: the gesture to finger lookup table and command frames.
//! * [`pipeline`]: the streaming orchestrator and latency benchmark.
//!
//! Data-parallel loops (batch gradients, evaluation, Monte Carlo) run on
//! rayon when the `parallel` feature is enabled (the default) and on plain
//! iterators otherwise. Results are bit-identical either way.

pub mod command;
pub mod config;
pub mod exec;
pub mod gesture;
pub mod nn;
pub mod pipeline;
pub mod postprocess;
pub mod signal;

pub use command::{class_to_command, FingerCommand};
pub use gesture::GestureClass;
pub use nn::{NetworkSpec, ParameterStore};
pub use postprocess::FifoMemory;
pub use signal::EmgRecord;
