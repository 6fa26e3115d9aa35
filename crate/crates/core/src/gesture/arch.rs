use crate::nn::{LayerSpec, NetworkSpec};

use super::NUM_GESTURES;

/// Width and regularisation knobs of the reference architecture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchVariant {
    pub conv_filters: usize,
    pub dense_units: usize,
    pub classes: usize,
    pub dropout_rate: f32,
}

impl Default for ArchVariant {
    fn default() -> Self {
        Self {
            conv_filters: 512,
            dense_units: 64,
            classes: NUM_GESTURES,
            dropout_rate: 0.5,
        }
    }
}

/// Six stride-2 convolutions with kernels 64, 32, 16, 8, 4, 2 over a
/// 200 x 8 window, then flatten, dropout, dense + ReLU, dropout, dense and
/// softmax.
pub fn variant_network(v: ArchVariant) -> NetworkSpec {
    let mut layers = Vec::new();
    for kernel in [64, 32, 16, 8, 4, 2] {
        layers.push(LayerSpec::Conv1d {
            filters: v.conv_filters,
            kernel,
            stride: 2,
        });
        layers.push(LayerSpec::Relu);
    }
    layers.extend([
        LayerSpec::Flatten,
        LayerSpec::Dropout {
            rate: v.dropout_rate,
        },
        LayerSpec::Dense {
            units: v.dense_units,
        },
        LayerSpec::Relu,
        LayerSpec::Dropout {
            rate: v.dropout_rate,
        },
        LayerSpec::Dense { units: v.classes },
        LayerSpec::Softmax,
    ]);
    NetworkSpec::new((200, 8), layers).expect("reference architecture is shape-valid")
}

/// The full-width 15-class network.
pub fn build_paper_network() -> NetworkSpec {
    variant_network(ArchVariant::default())
}
