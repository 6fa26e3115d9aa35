//! Trainable parameters and the EMGW weights format.
//!
//! Layout per layer: conv weights `[kernel_pos][in_channel][filter]`, dense
//! weights `[in][out]`, both row-major, followed by biases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{fingerprint, LayerSpec, NetworkSpec, Shape};
use super::{NnError, Scalar};
use crate::exec;

const MAGIC: [u8; 4] = *b"EMGW";
const VERSION: u16 = 1;
const KIND_CONV: u8 = 1;
const KIND_DENSE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv1d {
        kernel: usize,
        in_channels: usize,
        filters: usize,
    },
    Dense {
        inputs: usize,
        outputs: usize,
    },
}

impl LayerKind {
    pub fn weight_len(&self) -> usize {
        match *self {
            Self::Conv1d {
                kernel,
                in_channels,
                filters,
            } => kernel * in_channels * filters,
            Self::Dense { inputs, outputs } => inputs * outputs,
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            Self::Conv1d { filters, .. } => filters,
            Self::Dense { outputs, .. } => outputs,
        }
    }

    fn fans(&self) -> (usize, usize) {
        match *self {
            Self::Conv1d {
                kernel,
                in_channels,
                filters,
            } => (kernel * in_channels, kernel * filters),
            Self::Dense { inputs, outputs } => (inputs, outputs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    /// Index of the owning layer in the network spec.
    pub layer: usize,
    pub kind: LayerKind,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

/// Parameters of every trainable layer, in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore<T> {
    pub layers: Vec<LayerParams<T>>,
}

fn trainable_kinds(spec: &NetworkSpec) -> Result<Vec<(usize, LayerKind)>, NnError> {
    let inputs = spec.input_shapes()?;
    Ok(spec
        .layers
        .iter()
        .zip(inputs)
        .enumerate()
        .filter_map(|(i, (layer, input))| match (*layer, input) {
            (
                LayerSpec::Conv1d {
                    filters, kernel, ..
                },
                Shape::Seq { channels, .. },
            ) => Some((
                i,
                LayerKind::Conv1d {
                    kernel,
                    in_channels: channels,
                    filters,
                },
            )),
            (LayerSpec::Dense { units }, Shape::Flat(n)) => Some((
                i,
                LayerKind::Dense {
                    inputs: n,
                    outputs: units,
                },
            )),
            _ => None,
        })
        .collect())
}

impl<T: Scalar> ParameterStore<T> {
    /// All-zero parameters shaped for `spec`.
    pub fn zeros(spec: &NetworkSpec) -> Result<Self, NnError> {
        Ok(Self {
            layers: trainable_kinds(spec)?
                .into_iter()
                .map(|(layer, kind)| LayerParams {
                    layer,
                    kind,
                    weights: vec![T::zero(); kind.weight_len()],
                    biases: vec![T::zero(); kind.bias_len()],
                })
                .collect(),
        })
    }

    /// Glorot-uniform weights, zero biases; deterministic per seed.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self, NnError> {
        let mut store = Self::zeros(spec)?;
        for p in &mut store.layers {
            let (fan_in, fan_out) = p.kind.fans();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(exec::derive_key(&[seed, p.layer as u64]));
            for w in &mut p.weights {
                *w = T::from_f64(rng.random_range(-limit..limit));
            }
        }
        Ok(store)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|p| LayerParams {
                    layer: p.layer,
                    kind: p.kind,
                    weights: vec![T::zero(); p.weights.len()],
                    biases: vec![T::zero(); p.biases.len()],
                })
                .collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|p| p.weights.len() + p.biases.len())
            .sum()
    }

    /// Parameter store for the layer at spec index `layer`.
    pub fn for_layer(&self, layer: usize) -> Option<&LayerParams<T>> {
        self.layers.iter().find(|p| p.layer == layer)
    }

    /// Checks that the store matches `spec` exactly.
    pub fn check(&self, spec: &NetworkSpec) -> Result<(), NnError> {
        let kinds = trainable_kinds(spec)?;
        if kinds.len() != self.layers.len() {
            return Err(NnError::ParamMismatch {
                layer: 0,
                reason: format!(
                    "{} trainable layers, store has {}",
                    kinds.len(),
                    self.layers.len()
                ),
            });
        }
        for ((layer, kind), p) in kinds.iter().zip(&self.layers) {
            if p.layer != *layer || p.kind != *kind {
                return Err(NnError::ParamMismatch {
                    layer: *layer,
                    reason: "layer kind or dims".into(),
                });
            }
            if p.weights.len() != kind.weight_len() || p.biases.len() != kind.bias_len() {
                return Err(NnError::ParamMismatch {
                    layer: *layer,
                    reason: "array length".into(),
                });
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParameterStore<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.as_f64())).collect();
        ParameterStore {
            layers: self
                .layers
                .iter()
                .map(|p| LayerParams {
                    layer: p.layer,
                    kind: p.kind,
                    weights: conv(&p.weights),
                    biases: conv(&p.biases),
                })
                .collect(),
        }
    }

    /// Visits every scalar (weights then biases, layer by layer).
    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.layers
            .iter()
            .flat_map(|p| p.weights.iter().chain(p.biases.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|p| p.weights.iter_mut().chain(p.biases.iter_mut()))
    }

    /// Mutable access to the `i`-th scalar in [`values`](Self::values) order.
    pub fn get_mut(&mut self, mut i: usize) -> Option<&mut T> {
        for p in &mut self.layers {
            if i < p.weights.len() {
                return p.weights.get_mut(i);
            }
            i -= p.weights.len();
            if i < p.biases.len() {
                return p.biases.get_mut(i);
            }
            i -= p.biases.len();
        }
        None
    }

    /// `self += other`, element by element.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for a in self.values_mut() {
            *a *= factor;
        }
    }
}

/// Serialises `params` (as f32) with the fingerprint of `spec`.
pub fn save_params<T: Scalar>(spec: &NetworkSpec, params: &ParameterStore<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(18 + params.num_params() * 4 + params.layers.len() * 13);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&fingerprint(spec).to_le_bytes());
    out.extend_from_slice(&(params.layers.len() as u32).to_le_bytes());
    for p in &params.layers {
        let dims: &[usize] = match &p.kind {
            LayerKind::Conv1d {
                kernel,
                in_channels,
                filters,
            } => {
                out.push(KIND_CONV);
                &[*kernel, *in_channels, *filters]
            }
            LayerKind::Dense { inputs, outputs } => {
                out.push(KIND_DENSE);
                &[*inputs, *outputs]
            }
        };
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.weights.iter().chain(&p.biases) {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(NnError::Truncated(self.bytes.len())),
        }
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, NnError> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or(NnError::Truncated(self.bytes.len()))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Reads the fingerprint stored in an EMGW header without parsing the body.
pub fn peek_fingerprint(bytes: &[u8]) -> Result<u64, NnError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4).map_err(|_| NnError::BadMagic)? != MAGIC {
        return Err(NnError::BadMagic);
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(NnError::UnsupportedVersion(version));
    }
    c.u64()
}

/// Parses EMGW bytes, rejecting files written for a different architecture.
pub fn load_params(bytes: &[u8], spec: &NetworkSpec) -> Result<ParameterStore<f32>, NnError> {
    let found = peek_fingerprint(bytes)?;
    let expected = fingerprint(spec);
    if found != expected {
        return Err(NnError::WrongArchitecture { expected, found });
    }
    let mut c = Cursor { bytes, pos: 14 };
    let mut store = ParameterStore::<f32>::zeros(spec)?;
    let count = c.u32()? as usize;
    if count != store.layers.len() {
        return Err(NnError::ParamMismatch {
            layer: 0,
            reason: format!("file has {count} trainable layers"),
        });
    }
    for p in &mut store.layers {
        let kind = match c.u8()? {
            KIND_CONV => LayerKind::Conv1d {
                kernel: c.u32()? as usize,
                in_channels: c.u32()? as usize,
                filters: c.u32()? as usize,
            },
            KIND_DENSE => LayerKind::Dense {
                inputs: c.u32()? as usize,
                outputs: c.u32()? as usize,
            },
            other => {
                return Err(NnError::ParamMismatch {
                    layer: p.layer,
                    reason: format!("unknown layer kind {other}"),
                })
            }
        };
        if kind != p.kind {
            return Err(NnError::ParamMismatch {
                layer: p.layer,
                reason: "dims differ".into(),
            });
        }
        p.weights = c.f32s(kind.weight_len())?;
        p.biases = c.f32s(kind.bias_len())?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(units: usize) -> NetworkSpec {
        NetworkSpec::new(
            (12, 3),
            vec![
                LayerSpec::Conv1d {
                    filters: 4,
                    kernel: 3,
                    stride: 2,
                },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { units },
                LayerSpec::Softmax,
            ],
        )
        .unwrap()
    }

    #[test]
    fn init_shapes_and_limits() {
        let s = spec(5);
        let p = ParameterStore::<f32>::init(&s, 1).unwrap();
        p.check(&s).unwrap();
        assert_eq!(p.num_params(), 3 * 3 * 4 + 4 + 24 * 5 + 5);
        let limit = (6.0f32 / (9.0 + 12.0)).sqrt();
        assert!(p.layers[0].weights.iter().all(|w| w.abs() <= limit));
        assert!(p.layers[0].biases.iter().all(|&b| b == 0.0));
        assert_eq!(p, ParameterStore::<f32>::init(&s, 1).unwrap());
        assert_ne!(p, ParameterStore::<f32>::init(&s, 2).unwrap());
    }

    #[test]
    fn weights_round_trip_and_errors() {
        let s = spec(5);
        let p = ParameterStore::<f32>::init(&s, 9).unwrap();
        let bytes = save_params(&s, &p);
        assert_eq!(&bytes[..4], b"EMGW");
        assert_eq!(load_params(&bytes, &s).unwrap(), p);
        assert!(matches!(
            load_params(&bytes, &spec(6)),
            Err(NnError::WrongArchitecture { .. })
        ));
        assert!(matches!(
            load_params(&bytes[..bytes.len() - 3], &s),
            Err(NnError::Truncated(_))
        ));
        let mut bad = bytes.clone();
        bad[1] = 0;
        assert_eq!(load_params(&bad, &s), Err(NnError::BadMagic));
    }

    #[test]
    fn flat_indexing_matches_iteration() {
        let s = spec(2);
        let mut p = ParameterStore::<f64>::init(&s, 3).unwrap();
        let flat: Vec<f64> = p.values().copied().collect();
        for (i, v) in flat.iter().enumerate() {
            assert_eq!(*p.get_mut(i).unwrap(), *v);
        }
        assert!(p.get_mut(flat.len()).is_none());
    }
}
