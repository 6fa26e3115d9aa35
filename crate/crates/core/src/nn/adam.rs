use super::params::ParameterStore;
use super::{NnError, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: ParameterStore<T>,
    pub v: ParameterStore<T>,
    pub t: u64,
    pub config: AdamConfig,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParameterStore<T>, config: AdamConfig) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update. Nothing is modified when a gradient is
/// not finite.
pub fn adam_step<T: Scalar>(
    params: &mut ParameterStore<T>,
    grads: &ParameterStore<T>,
    state: &mut AdamState<T>,
) -> Result<(), NnError> {
    if let Some(i) = grads.values().position(|g| !g.is_finite()) {
        return Err(NnError::NonFiniteGradient(i));
    }
    if grads.num_params() != params.num_params() || state.m.num_params() != params.num_params() {
        return Err(NnError::ParamMismatch {
            layer: 0,
            reason: "adam shapes disagree".into(),
        });
    }
    let c = state.config;
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::from_f64(c.beta1);
    let b2 = T::from_f64(c.beta2);
    let one_minus_b1 = T::from_f64(1.0 - c.beta1);
    let one_minus_b2 = T::from_f64(1.0 - c.beta2);
    let corr1 = T::from_f64(1.0 - c.beta1.powi(t));
    let corr2 = T::from_f64(1.0 - c.beta2.powi(t));
    let lr = T::from_f64(c.learning_rate);
    let eps = T::from_f64(c.epsilon);
    let moments = state.m.values_mut().zip(state.v.values_mut());
    for ((p, &g), (m, v)) in params.values_mut().zip(grads.values()).zip(moments) {
        *m = b1 * *m + one_minus_b1 * g;
        *v = b2 * *v + one_minus_b2 * g * g;
        let m_hat = *m / corr1;
        let v_hat = *v / corr2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
