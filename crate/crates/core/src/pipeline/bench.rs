use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::StreamStats;
use crate::exec;
use crate::nn::{infer, NetworkSpec, NnError, ParameterStore};

/// Untimed iterations run before measuring.
pub const WARMUP_ITERATIONS: usize = 10;

/// Frame period of the 10 Hz control loop.
const FRAME_PERIOD_US: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("iterations must be at least 1")]
    ZeroIterations,
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Times `iterations` inference-mode forward passes on one fixed random
/// window using at most `threads` workers.
pub fn bench_inference(
    spec: &NetworkSpec,
    params: &ParameterStore<f32>,
    iterations: usize,
    threads: usize,
) -> Result<StreamStats, BenchError> {
    if iterations == 0 {
        return Err(BenchError::ZeroIterations);
    }
    params.check(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xBE7C);
    let window: Vec<f32> = (0..spec.input.0 * spec.input.1)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    exec::with_threads(threads, || {
        for _ in 0..WARMUP_ITERATIONS {
            std::hint::black_box(infer(spec, params, &window)?);
        }
        let mut latencies = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let t = Instant::now();
            std::hint::black_box(infer(spec, params, std::hint::black_box(&window))?);
            latencies.push(t.elapsed().as_micros() as u64);
        }
        Ok(StreamStats::from_latencies(&latencies, FRAME_PERIOD_US))
    })
}
