use std::fmt;

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Conv1d {
        filters: usize,
        kernel: usize,
        stride: usize,
    },
    Dense {
        units: usize,
    },
    Relu,
    Dropout {
        rate: f32,
    },
    Flatten,
    Softmax,
}

impl LayerSpec {
    pub fn is_trainable(&self) -> bool {
        matches!(self, Self::Conv1d { .. } | Self::Dense { .. })
    }

    fn check(&self, index: usize) -> Result<(), NnError> {
        let bad = |reason: &str| {
            Err(NnError::InvalidLayer {
                index,
                reason: reason.into(),
            })
        };
        match *self {
            Self::Conv1d {
                filters,
                kernel,
                stride,
            } => {
                if filters == 0 || kernel == 0 || stride == 0 {
                    return bad("conv1d filters, kernel and stride must be at least 1");
                }
            }
            Self::Dense { units: 0 } => return bad("dense units must be at least 1"),
            Self::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                return bad("dropout rate must lie in [0, 1)");
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Conv1d {
                filters,
                kernel,
                stride,
            } => {
                write!(f, "conv1d({filters},{kernel},{stride})")
            }
            Self::Dense { units } => write!(f, "dense({units})"),
            Self::Relu => f.write_str("relu"),
            Self::Dropout { rate } => write!(f, "dropout({rate})"),
            Self::Flatten => f.write_str("flatten"),
            Self::Softmax => f.write_str("softmax"),
        }
    }
}

/// Activation shape between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Seq { len: usize, channels: usize },
    Flat(usize),
}

impl Shape {
    pub fn size(&self) -> usize {
        match *self {
            Self::Seq { len, channels } => len * channels,
            Self::Flat(n) => n,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Seq { len, channels } => write!(f, "{len} x {channels}"),
            Self::Flat(n) => write!(f, "{n}"),
        }
    }
}

/// SAME padding with ceil division: `(pad_left, pad_right, out_len)`.
///
/// The extra pad, when the total is odd, goes on the right.
pub fn same_pad(in_len: usize, kernel: usize, stride: usize) -> (usize, usize, usize) {
    let out_len = in_len.div_ceil(stride);
    let total = ((out_len - 1) * stride + kernel).saturating_sub(in_len);
    let left = total / 2;
    (left, total - left, out_len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// `(length, channels)` of one input window.
    pub input: (usize, usize),
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input: (usize, usize), layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        let spec = Self { input, layers };
        spec.shapes()?;
        Ok(spec)
    }

    pub fn input_shape(&self) -> Shape {
        Shape::Seq {
            len: self.input.0,
            channels: self.input.1,
        }
    }

    /// Output shape of every layer, in order.
    pub fn shapes(&self) -> Result<Vec<Shape>, NnError> {
        if self.input.0 == 0 || self.input.1 == 0 {
            return Err(NnError::InvalidLayer {
                index: 0,
                reason: "empty input shape".into(),
            });
        }
        let mut shape = self.input_shape();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            layer.check(i)?;
            let mismatch = |expected: &str| NnError::ShapeMismatch {
                layer: i,
                expected: expected.into(),
                found: shape.to_string(),
            };
            shape = match (*layer, shape) {
                (
                    LayerSpec::Conv1d {
                        filters,
                        kernel,
                        stride,
                    },
                    Shape::Seq { len, .. },
                ) => Shape::Seq {
                    len: same_pad(len, kernel, stride).2,
                    channels: filters,
                },
                (LayerSpec::Conv1d { .. }, _) => return Err(mismatch("sequence")),
                (LayerSpec::Dense { units }, Shape::Flat(_)) => Shape::Flat(units),
                (LayerSpec::Dense { .. }, _) => return Err(mismatch("flat vector")),
                (LayerSpec::Flatten, s) => Shape::Flat(s.size()),
                (LayerSpec::Softmax, Shape::Flat(n)) if i + 1 == self.layers.len() => {
                    Shape::Flat(n)
                }
                (LayerSpec::Softmax, Shape::Flat(_)) => {
                    return Err(NnError::InvalidLayer {
                        index: i,
                        reason: "softmax must be the last layer".into(),
                    })
                }
                (LayerSpec::Softmax, _) => return Err(mismatch("flat vector")),
                (LayerSpec::Relu | LayerSpec::Dropout { .. }, s) => s,
            };
            out.push(shape);
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<Shape, NnError> {
        Ok(self.shapes()?.last().copied().unwrap_or(self.input_shape()))
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self.layers.last(), Some(LayerSpec::Softmax))
    }

    pub fn num_outputs(&self) -> Result<usize, NnError> {
        Ok(self.output_shape()?.size())
    }

    /// Input shape seen by every layer.
    pub fn input_shapes(&self) -> Result<Vec<Shape>, NnError> {
        let shapes = self.shapes()?;
        Ok(std::iter::once(self.input_shape())
            .chain(shapes.iter().copied())
            .take(self.layers.len())
            .collect())
    }

    /// `conv1d(f,k,s);...;softmax;in=LxC`
    pub fn canonical_string(&self) -> String {
        let mut s: Vec<String> = self.layers.iter().map(ToString::to_string).collect();
        s.push(format!("in={}x{}", self.input.0, self.input.1));
        s.join(";")
    }
}

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn fingerprint(spec: &NetworkSpec) -> u64 {
    fnv1a64(spec.canonical_string().as_bytes())
}

/// Trainable parameter counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCounts {
    /// One entry per layer; zero for layers without parameters.
    pub per_layer: Vec<usize>,
    pub total: usize,
}

impl ParamCounts {
    /// Counts of trainable layers only, in order.
    pub fn trainable(&self) -> Vec<usize> {
        self.per_layer.iter().copied().filter(|&c| c > 0).collect()
    }
}

pub fn parameter_count(spec: &NetworkSpec) -> Result<ParamCounts, NnError> {
    let inputs = spec.input_shapes()?;
    let per_layer: Vec<usize> = spec
        .layers
        .iter()
        .zip(&inputs)
        .map(|(layer, input)| match (*layer, *input) {
            (
                LayerSpec::Conv1d {
                    filters, kernel, ..
                },
                Shape::Seq { channels, .. },
            ) => kernel * channels * filters + filters,
            (LayerSpec::Dense { units }, Shape::Flat(n)) => n * units + units,
            _ => 0,
        })
        .collect();
    let total = per_layer.iter().sum();
    Ok(ParamCounts { per_layer, total })
}
