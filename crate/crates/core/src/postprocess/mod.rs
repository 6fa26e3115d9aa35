//! FIFO memory with majority-vote aggregation, and its error model.

mod error_model;
mod fifo;

pub use error_model::{
    exact_majority_error, paper_error_bound, simulate_stream_error, sweep, ErrorModelParams,
    SimEstimate, SweepRow,
};
pub use fifo::{FifoMemory, PostprocessError};
