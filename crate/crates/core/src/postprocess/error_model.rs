//! Misclassification probability after majority voting.
//!
//! Three routes: the closed-form monomial `rho^((n+1)/2)`, the exact binomial
//! tail for iid frame errors, and a Monte Carlo run of the real
//! [`FifoMemory`] over a simulated stream.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fifo::{FifoMemory, PostprocessError};
use crate::exec;
use crate::gesture::GestureClass;

/// Independent stream segments simulated by [`simulate_stream_error`].
const SEGMENTS: u64 = 32;

fn check(rho: f64, n: usize) -> Result<(), PostprocessError> {
    if n.is_multiple_of(2) {
        return Err(PostprocessError::EvenCapacity(n));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(PostprocessError::InvalidProbability(rho));
    }
    Ok(())
}

/// `rho^((n+1)/2)`.
pub fn paper_error_bound(rho: f64, n: usize) -> Result<f64, PostprocessError> {
    check(rho, n)?;
    Ok(rho.powi(n.div_ceil(2) as i32))
}

/// `sum_{k=(n+1)/2}^{n} C(n,k) rho^k (1-rho)^(n-k)`: probability that a full
/// FIFO of iid frames holds a wrong majority when every error lands on the
/// same wrong class.
pub fn exact_majority_error(rho: f64, n: usize) -> Result<f64, PostprocessError> {
    check(rho, n)?;
    let mut binom = 1.0f64;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            binom = binom * (n - k + 1) as f64 / k as f64;
        }
        if 2 * k > n {
            total += binom * rho.powi(k as i32) * (1.0 - rho).powi((n - k) as i32);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModelParams {
    /// Per-frame misclassification probability.
    pub rho: f64,
    /// FIFO capacity.
    pub n: usize,
    /// Simulated frames.
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    /// Fraction of wrong aggregated outputs after warm-up.
    pub rate: f64,
    /// Standard error from the spread of independent segment means.
    pub stderr: f64,
    /// Frames counted after discarding warm-up outputs.
    pub counted: u64,
}

/// Simulates a two-class stream (correct class 0, all errors on class 1),
/// feeds it through a [`FifoMemory`] and measures the wrong-output rate.
///
/// The stream is cut into fixed independent segments, each discarding its
/// first `n` outputs, so the estimate does not depend on the worker count.
pub fn simulate_stream_error(model: ErrorModelParams) -> Result<SimEstimate, PostprocessError> {
    check(model.rho, model.n)?;
    let min_segment = 4 * (model.n as u64 + 1);
    let segments = (model.trials / min_segment).clamp(1, SEGMENTS) as usize;
    if model.trials <= model.n as u64 * segments as u64 {
        return Err(PostprocessError::TooFewTrials {
            trials: model.trials,
            warmup: model.n,
        });
    }
    let ranges = exec::split_ranges(model.trials as usize, segments);
    let correct = GestureClass::new(0).unwrap();
    let wrong = GestureClass::new(1).unwrap();
    let results = exec::map_indexed(segments, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(exec::derive_key(&[model.seed, s as u64]));
        let mut fifo = FifoMemory::new(model.n).expect("checked odd");
        let (mut errors, mut counted) = (0u64, 0u64);
        for i in 0..ranges[s].len() {
            let frame = if rng.random::<f64>() < model.rho {
                wrong
            } else {
                correct
            };
            let out = fifo.push_and_aggregate(frame);
            if i >= model.n {
                counted += 1;
                errors += u64::from(out != correct);
            }
        }
        (errors, counted)
    });
    let errors: u64 = results.iter().map(|r| r.0).sum();
    let counted: u64 = results.iter().map(|r| r.1).sum();
    let rate = errors as f64 / counted as f64;
    let stderr = if segments > 1 {
        // weighted batch means
        let var = results
            .iter()
            .map(|&(e, c)| {
                let d = e as f64 / c as f64 - rate;
                c as f64 * d * d
            })
            .sum::<f64>()
            / (segments - 1) as f64;
        (var / counted as f64).sqrt()
    } else {
        (rate * (1.0 - rate) / counted as f64).sqrt()
    };
    Ok(SimEstimate {
        rate,
        stderr,
        counted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub rho: f64,
    pub n: usize,
    pub paper_bound: f64,
    pub exact: f64,
    pub monte_carlo: SimEstimate,
}

impl fmt::Display for SweepRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rho,{},n,{},paper_bound,{:.8},exact,{:.8},monte_carlo,{:.8},stderr,{:.8}",
            self.rho,
            self.n,
            self.paper_bound,
            self.exact,
            self.monte_carlo.rate,
            self.monte_carlo.stderr
        )
    }
}

/// Rows for every odd FIFO size from 1 to `n_max`.
pub fn sweep(
    rho: f64,
    n_max: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<SweepRow>, PostprocessError> {
    check(rho, n_max)?;
    (1..=n_max)
        .step_by(2)
        .map(|n| {
            Ok(SweepRow {
                rho,
                n,
                paper_bound: paper_error_bound(rho, n)?,
                exact: exact_majority_error(rho, n)?,
                monte_carlo: simulate_stream_error(ErrorModelParams {
                    rho,
                    n,
                    trials,
                    seed,
                })?,
            })
        })
        .collect()
}
