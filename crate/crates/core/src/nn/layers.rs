//! Layer kernels.
//!
//! The convolution accumulates every output element in a fixed order:
//! kernel position ascending, then input channel ascending, then the bias.
//! Blocking, unrolling and threading never change that order, so results are
//! bit-identical across strategies and worker counts.

use super::params::{LayerKind, LayerParams};
use super::spec::same_pad;
use super::{NnError, Scalar};
use crate::exec;

/// Multiply-accumulate count above which the conv forward pass is split
/// across workers.
const PARALLEL_MACS: usize = 1 << 22;

fn conv_dims<T>(params: &LayerParams<T>) -> Result<(usize, usize, usize), NnError> {
    match params.kind {
        LayerKind::Conv1d {
            kernel,
            in_channels,
            filters,
        } => Ok((kernel, in_channels, filters)),
        LayerKind::Dense { .. } => Err(NnError::ParamMismatch {
            layer: params.layer,
            reason: "expected conv1d parameters".into(),
        }),
    }
}

fn dense_dims<T>(params: &LayerParams<T>) -> Result<(usize, usize), NnError> {
    match params.kind {
        LayerKind::Dense { inputs, outputs } => Ok((inputs, outputs)),
        LayerKind::Conv1d { .. } => Err(NnError::ParamMismatch {
            layer: params.layer,
            reason: "expected dense parameters".into(),
        }),
    }
}

/// Input position read by output `t` at kernel offset `k`, if not padding.
#[inline]
fn source_pos(t: usize, k: usize, stride: usize, pad_left: usize, in_len: usize) -> Option<usize> {
    (t * stride + k)
        .checked_sub(pad_left)
        .filter(|&p| p < in_len)
}

#[allow(clippy::too_many_arguments)]
fn conv_rows<T: Scalar>(
    input: &[T],
    in_len: usize,
    weights: &[T],
    biases: &[T],
    (kernel, cin, filters): (usize, usize, usize),
    stride: usize,
    pad_left: usize,
    first_row: usize,
    out: &mut [T],
) {
    let rows = out.len() / filters;
    out.fill(T::zero());
    for k in 0..kernel {
        let mut c = 0;
        while c + 4 <= cin {
            let base = (k * cin + c) * filters;
            let w0 = &weights[base..base + filters];
            let w1 = &weights[base + filters..base + 2 * filters];
            let w2 = &weights[base + 2 * filters..base + 3 * filters];
            let w3 = &weights[base + 3 * filters..base + 4 * filters];
            for r in 0..rows {
                let Some(p) = source_pos(first_row + r, k, stride, pad_left, in_len) else {
                    continue;
                };
                let x = &input[p * cin + c..p * cin + c + 4];
                let (x0, x1, x2, x3) = (x[0], x[1], x[2], x[3]);
                let o = &mut out[r * filters..(r + 1) * filters];
                for j in 0..filters {
                    o[j] = o[j] + x0 * w0[j] + x1 * w1[j] + x2 * w2[j] + x3 * w3[j];
                }
            }
            c += 4;
        }
        while c < cin {
            let base = (k * cin + c) * filters;
            let w0 = &weights[base..base + filters];
            for r in 0..rows {
                let Some(p) = source_pos(first_row + r, k, stride, pad_left, in_len) else {
                    continue;
                };
                let x0 = input[p * cin + c];
                let o = &mut out[r * filters..(r + 1) * filters];
                for j in 0..filters {
                    o[j] += x0 * w0[j];
                }
            }
            c += 1;
        }
    }
    for o in out.chunks_exact_mut(filters) {
        for (v, &b) in o.iter_mut().zip(biases) {
            *v += b;
        }
    }
}

/// 1D convolution with ceil-division SAME padding.
///
/// `input` is `[in_len x in_channels]`; the result is `[out_len x filters]`.
pub fn conv1d_apply<T: Scalar>(
    input: &[T],
    in_len: usize,
    params: &LayerParams<T>,
    stride: usize,
) -> Result<Vec<T>, NnError> {
    let (kernel, cin, filters) = conv_dims(params)?;
    if input.len() != in_len * cin || in_len == 0 {
        return Err(NnError::ShapeMismatch {
            layer: params.layer,
            expected: format!("{in_len} x {cin}"),
            found: format!("{} values", input.len()),
        });
    }
    if stride == 0 {
        return Err(NnError::InvalidLayer {
            index: params.layer,
            reason: "stride 0".into(),
        });
    }
    let (pad_left, _, out_len) = same_pad(in_len, kernel, stride);
    let mut out = vec![T::zero(); out_len * filters];
    let dims = (kernel, cin, filters);
    let macs = out_len * kernel * cin * filters;
    let threads = exec::current_threads();
    if macs >= PARALLEL_MACS && threads > 1 {
        let rows = out_len.div_ceil(threads * 2).max(1);
        exec::for_each_chunk_mut(&mut out, rows * filters, |i, chunk| {
            conv_rows(
                input,
                in_len,
                &params.weights,
                &params.biases,
                dims,
                stride,
                pad_left,
                i * rows,
                chunk,
            )
        });
    } else {
        conv_rows(
            input,
            in_len,
            &params.weights,
            &params.biases,
            dims,
            stride,
            pad_left,
            0,
            &mut out,
        );
    }
    Ok(out)
}

/// Direct per-element evaluation over an explicitly zero-padded input.
///
/// Independent of the blocked kernel; used to cross-check it.
pub fn conv1d_reference<T: Scalar>(
    input: &[T],
    in_len: usize,
    params: &LayerParams<T>,
    stride: usize,
) -> Result<Vec<T>, NnError> {
    let (kernel, cin, filters) = conv_dims(params)?;
    let (left, right, out_len) = same_pad(in_len, kernel, stride);
    let mut padded = vec![T::zero(); (left + in_len + right) * cin];
    padded[left * cin..(left + in_len) * cin].copy_from_slice(input);
    let mut out = vec![T::zero(); out_len * filters];
    for t in 0..out_len {
        for f in 0..filters {
            let mut acc = T::zero();
            for k in 0..kernel {
                for c in 0..cin {
                    acc += padded[(t * stride + k) * cin + c]
                        * params.weights[(k * cin + c) * filters + f];
                }
            }
            out[t * filters + f] = acc + params.biases[f];
        }
    }
    Ok(out)
}

/// Accumulates parameter gradients of a conv layer into `grads` and returns
/// the gradient with respect to its input when `want_input` is set.
pub fn conv1d_backward<T: Scalar>(
    input: &[T],
    in_len: usize,
    params: &LayerParams<T>,
    stride: usize,
    grad_out: &[T],
    grads: &mut LayerParams<T>,
    want_input: bool,
) -> Result<Option<Vec<T>>, NnError> {
    let (kernel, cin, filters) = conv_dims(params)?;
    let (pad_left, _, out_len) = same_pad(in_len, kernel, stride);
    if grad_out.len() != out_len * filters || input.len() != in_len * cin {
        return Err(NnError::ShapeMismatch {
            layer: params.layer,
            expected: format!("{out_len} x {filters}"),
            found: format!("{} values", grad_out.len()),
        });
    }
    for dy in grad_out.chunks_exact(filters) {
        for (b, &g) in grads.biases.iter_mut().zip(dy) {
            *b += g;
        }
    }
    for k in 0..kernel {
        for c in 0..cin {
            let base = (k * cin + c) * filters;
            let gw = &mut grads.weights[base..base + filters];
            for t in 0..out_len {
                let Some(p) = source_pos(t, k, stride, pad_left, in_len) else {
                    continue;
                };
                let x = input[p * cin + c];
                let dy = &grad_out[t * filters..(t + 1) * filters];
                for j in 0..filters {
                    gw[j] += x * dy[j];
                }
            }
        }
    }
    if !want_input {
        return Ok(None);
    }
    let mut dx = vec![T::zero(); in_len * cin];
    for t in 0..out_len {
        let dy = &grad_out[t * filters..(t + 1) * filters];
        for k in 0..kernel {
            let Some(p) = source_pos(t, k, stride, pad_left, in_len) else {
                continue;
            };
            for c in 0..cin {
                let base = (k * cin + c) * filters;
                let w = &params.weights[base..base + filters];
                let mut s = T::zero();
                for j in 0..filters {
                    s += w[j] * dy[j];
                }
                dx[p * cin + c] += s;
            }
        }
    }
    Ok(Some(dx))
}

/// `out[j] = bias[j] + sum_i w[i][j] * in[i]`
pub fn dense_apply<T: Scalar>(input: &[T], params: &LayerParams<T>) -> Result<Vec<T>, NnError> {
    let (n_in, n_out) = dense_dims(params)?;
    if input.len() != n_in {
        return Err(NnError::ShapeMismatch {
            layer: params.layer,
            expected: n_in.to_string(),
            found: input.len().to_string(),
        });
    }
    let mut out = vec![T::zero(); n_out];
    for (i, &x) in input.iter().enumerate() {
        let w = &params.weights[i * n_out..(i + 1) * n_out];
        for j in 0..n_out {
            out[j] += x * w[j];
        }
    }
    for (o, &b) in out.iter_mut().zip(&params.biases) {
        *o += b;
    }
    Ok(out)
}

pub fn dense_backward<T: Scalar>(
    input: &[T],
    params: &LayerParams<T>,
    grad_out: &[T],
    grads: &mut LayerParams<T>,
    want_input: bool,
) -> Result<Option<Vec<T>>, NnError> {
    let (n_in, n_out) = dense_dims(params)?;
    if input.len() != n_in || grad_out.len() != n_out {
        return Err(NnError::ShapeMismatch {
            layer: params.layer,
            expected: format!("{n_in} -> {n_out}"),
            found: format!("{} -> {}", input.len(), grad_out.len()),
        });
    }
    for (b, &g) in grads.biases.iter_mut().zip(grad_out) {
        *b += g;
    }
    for (i, &x) in input.iter().enumerate() {
        let gw = &mut grads.weights[i * n_out..(i + 1) * n_out];
        for j in 0..n_out {
            gw[j] += x * grad_out[j];
        }
    }
    if !want_input {
        return Ok(None);
    }
    Ok(Some(
        (0..n_in)
            .map(|i| {
                let w = &params.weights[i * n_out..(i + 1) * n_out];
                let mut s = T::zero();
                for j in 0..n_out {
                    s += w[j] * grad_out[j];
                }
                s
            })
            .collect(),
    ))
}

pub fn relu<T: Scalar>(values: &mut [T]) {
    for v in values {
        if v.is_nan() || *v <= T::zero() {
            *v = T::zero();
        }
    }
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum = exps.iter().fold(T::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

/// `ln(sum_i exp(z_i))`, computed stably.
pub fn log_sum_exp<T: Scalar>(logits: &[T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = logits.iter().fold(T::zero(), |a, &z| a + (z - max).exp());
    max + sum.ln()
}
