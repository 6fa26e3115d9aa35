//! Whole-network forward pass, backpropagation and the cross-entropy loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    conv1d_apply, conv1d_backward, dense_apply, dense_backward, log_sum_exp, relu, softmax,
};
use super::params::ParameterStore;
use super::spec::{LayerSpec, NetworkSpec, Shape};
use super::{NnError, Scalar};
use crate::exec;

/// Samples per gradient chunk. Chunk boundaries depend only on the batch
/// size, so the reduction order is fixed for any worker count.
const GRAD_CHUNK: usize = 8;

/// Key of the counter-based dropout mask generator for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MaskKey(pub u64);

impl MaskKey {
    pub fn new(seed: u64, epoch: u64, batch: u64, sample: u64) -> Self {
        Self(exec::derive_key(&[seed, epoch, batch, sample]))
    }

    fn layer_rng(self, layer: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(exec::derive_key(&[self.0, layer as u64]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout is the identity.
    Infer,
    /// Dropout samples its masks from the given key.
    Train(MaskKey),
}

/// Cached activations for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    /// `activations[i]` is the input of layer `i`; the last entry is the
    /// network output.
    pub activations: Vec<Vec<T>>,
    /// Input shape of every layer followed by the output shape.
    pub shapes: Vec<Shape>,
    /// Per-layer dropout scale factors (0 or `1/(1-rate)`), train mode only.
    pub masks: Vec<Option<Vec<T>>>,
}

impl<T> ForwardTrace<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// One labeled input.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, T> {
    pub input: &'a [T],
    pub label: usize,
}

fn param_slots(spec: &NetworkSpec) -> Vec<Option<usize>> {
    let mut next = 0;
    spec.layers
        .iter()
        .map(|l| {
            l.is_trainable().then(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Runs every layer in order and keeps the trace needed by [`backward`].
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    input: &[T],
    mode: Mode,
) -> Result<(Vec<T>, ForwardTrace<T>), NnError> {
    params.check(spec)?;
    let expected = spec.input.0 * spec.input.1;
    if input.len() != expected {
        return Err(NnError::InputShape {
            expected,
            found: input.len(),
        });
    }
    let mut shapes = spec.input_shapes()?;
    shapes.push(spec.output_shape()?);
    let slots = param_slots(spec);
    let mut activations = Vec::with_capacity(spec.layers.len() + 1);
    let mut masks = Vec::with_capacity(spec.layers.len());
    activations.push(input.to_vec());
    for (i, layer) in spec.layers.iter().enumerate() {
        let x = activations.last().expect("input pushed");
        let mut mask = None;
        let y = match *layer {
            LayerSpec::Conv1d { stride, .. } => {
                let Shape::Seq { len, .. } = shapes[i] else {
                    unreachable!("validated shape")
                };
                conv1d_apply(x, len, &params.layers[slots[i].unwrap()], stride)?
            }
            LayerSpec::Dense { .. } => dense_apply(x, &params.layers[slots[i].unwrap()])?,
            LayerSpec::Relu => {
                let mut y = x.clone();
                relu(&mut y);
                y
            }
            LayerSpec::Dropout { rate } => match mode {
                Mode::Train(key) if rate > 0.0 => {
                    let mut rng = key.layer_rng(i);
                    let keep = T::from_f64(1.0 / (1.0 - f64::from(rate)));
                    let m: Vec<T> = (0..x.len())
                        .map(|_| {
                            if rng.random::<f64>() < f64::from(rate) {
                                T::zero()
                            } else {
                                keep
                            }
                        })
                        .collect();
                    let y = x.iter().zip(&m).map(|(&a, &s)| a * s).collect();
                    mask = Some(m);
                    y
                }
                _ => x.clone(),
            },
            LayerSpec::Flatten => x.clone(),
            LayerSpec::Softmax => softmax(x),
        };
        masks.push(mask);
        activations.push(y);
    }
    let out = activations.last().cloned().unwrap_or_default();
    Ok((
        out,
        ForwardTrace {
            activations,
            shapes,
            masks,
        },
    ))
}

/// Inference-mode forward pass returning only the output.
pub fn infer<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    input: &[T],
) -> Result<Vec<T>, NnError> {
    Ok(forward(spec, params, input, Mode::Infer)?.0)
}

/// Backpropagates `upstream`, the gradient with respect to the output of
/// layer `from`, down to the input. Parameter gradients are added to `grads`.
pub fn backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    trace: &ForwardTrace<T>,
    from: usize,
    upstream: Vec<T>,
    grads: &mut ParameterStore<T>,
) -> Result<(), NnError> {
    let slots = param_slots(spec);
    let mut g = upstream;
    for i in (0..=from).rev() {
        let x = &trace.activations[i];
        let want_input = i > 0;
        g = match spec.layers[i] {
            LayerSpec::Conv1d { stride, .. } => {
                let Shape::Seq { len, .. } = trace.shapes[i] else {
                    unreachable!("validated shape")
                };
                let s = slots[i].unwrap();
                match conv1d_backward(
                    x,
                    len,
                    &params.layers[s],
                    stride,
                    &g,
                    &mut grads.layers[s],
                    want_input,
                )? {
                    Some(dx) => dx,
                    None => break,
                }
            }
            LayerSpec::Dense { .. } => {
                let s = slots[i].unwrap();
                match dense_backward(x, &params.layers[s], &g, &mut grads.layers[s], want_input)? {
                    Some(dx) => dx,
                    None => break,
                }
            }
            LayerSpec::Relu => {
                let y = &trace.activations[i + 1];
                g.iter()
                    .zip(y)
                    .map(|(&d, &v)| if v > T::zero() { d } else { T::zero() })
                    .collect()
            }
            LayerSpec::Dropout { .. } => match &trace.masks[i] {
                Some(m) => g.iter().zip(m).map(|(&d, &s)| d * s).collect(),
                None => g,
            },
            LayerSpec::Flatten => g,
            LayerSpec::Softmax => {
                // Jacobian-vector product of softmax: p * (g - <g, p>).
                let p = &trace.activations[i + 1];
                let dot = g.iter().zip(p).fold(T::zero(), |a, (&d, &q)| a + d * q);
                g.iter().zip(p).map(|(&d, &q)| q * (d - dot)).collect()
            }
        };
    }
    Ok(())
}

fn check_classifier(spec: &NetworkSpec) -> Result<usize, NnError> {
    if !spec.is_classifier() || spec.layers.len() < 2 {
        return Err(NnError::NotClassifier);
    }
    spec.num_outputs()
}

/// Cross-entropy of a single sample, computed from the logits with
/// log-sum-exp. Dropout off.
pub fn sample_loss<T: Scalar>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    sample: Sample<'_, T>,
) -> Result<T, NnError> {
    let classes = check_classifier(spec)?;
    if sample.label >= classes {
        return Err(NnError::LabelOutOfRange {
            label: sample.label,
            classes,
        });
    }
    let (_, trace) = forward(spec, params, sample.input, Mode::Infer)?;
    let logits = &trace.activations[spec.layers.len() - 1];
    Ok(log_sum_exp(logits) - logits[sample.label])
}

/// Mean loss, summed-then-averaged gradients and the number of correct
/// argmax predictions over a batch.
#[derive(Debug, Clone)]
pub struct BatchResult<T> {
    pub loss: f64,
    pub grads: ParameterStore<T>,
    pub correct: usize,
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

/// Loss and exact gradient of the mean cross-entropy over `batch`.
///
/// `mode_for(i)` selects the dropout mode of sample `i`. Samples are processed
/// in fixed chunks (in parallel when enabled) and reduced in order.
pub fn loss_and_grads<T, M>(
    spec: &NetworkSpec,
    params: &ParameterStore<T>,
    batch: &[Sample<'_, T>],
    mode_for: M,
) -> Result<BatchResult<T>, NnError>
where
    T: Scalar,
    M: Fn(usize) -> Mode + Sync + Send,
{
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let classes = check_classifier(spec)?;
    if let Some(s) = batch.iter().find(|s| s.label >= classes) {
        return Err(NnError::LabelOutOfRange {
            label: s.label,
            classes,
        });
    }
    let last = spec.layers.len() - 1;
    let chunks = batch.len().div_ceil(GRAD_CHUNK);
    let partials = exec::map_indexed(
        chunks,
        |c| -> Result<(f64, ParameterStore<T>, usize), NnError> {
            let mut grads = params.zeros_like();
            let mut loss = 0.0;
            let mut correct = 0;
            let end = ((c + 1) * GRAD_CHUNK).min(batch.len());
            for (i, &s) in batch.iter().enumerate().take(end).skip(c * GRAD_CHUNK) {
                let (probs, trace) = forward(spec, params, s.input, mode_for(i))?;
                let logits = &trace.activations[last];
                loss += (log_sum_exp(logits) - logits[s.label]).as_f64();
                if argmax(&probs) == s.label {
                    correct += 1;
                }
                // d(-ln p_y)/dz = p - onehot(y)
                let mut upstream = probs;
                upstream[s.label] = upstream[s.label] - T::one();
                backward(spec, params, &trace, last - 1, upstream, &mut grads)?;
            }
            Ok((loss, grads, correct))
        },
    );
    let mut total = BatchResult {
        loss: 0.0,
        grads: params.zeros_like(),
        correct: 0,
    };
    for part in partials {
        let (loss, grads, correct) = part?;
        total.loss += loss;
        total.grads.add_assign(&grads);
        total.correct += correct;
    }
    let n = batch.len() as f64;
    total.loss /= n;
    total.grads.scale(T::from_f64(1.0 / n));
    Ok(total)
}
