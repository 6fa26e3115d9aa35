//! Finite-difference verification of the analytic gradients.

use super::network::{loss_and_grads, sample_loss, Mode, Sample};
use super::params::ParameterStore;
use super::spec::NetworkSpec;
use super::NnError;

/// Below this magnitude both gradients are compared on an absolute scale.
const DENOMINATOR_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, 1e-6)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(DENOMINATOR_FLOOR)
}

/// Largest relative error between backpropagated gradients and central
/// differences `(L(p + h) - L(p - h)) / 2h`, taken over every parameter.
/// Runs in `f64` with dropout disabled.
pub fn gradient_check(
    spec: &NetworkSpec,
    params: &ParameterStore<f64>,
    input: &[f64],
    label: usize,
    step: f64,
) -> Result<f64, NnError> {
    if step.is_nan() || step <= 0.0 {
        return Err(NnError::ZeroStep);
    }
    let sample = Sample { input, label };
    let analytic = loss_and_grads(spec, params, &[sample], |_| Mode::Infer)?.grads;
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for (i, &g) in analytic.values().enumerate() {
        let original = *probe.get_mut(i).expect("index in range");
        *probe.get_mut(i).unwrap() = original + step;
        let up = sample_loss(spec, &probe, sample)?;
        *probe.get_mut(i).unwrap() = original - step;
        let down = sample_loss(spec, &probe, sample)?;
        *probe.get_mut(i).unwrap() = original;
        worst = worst.max(relative_error(g, (up - down) / (2.0 * step)));
    }
    Ok(worst)
}
