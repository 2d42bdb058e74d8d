//! Exact per-layer parameter and FLOP accounting.
//!
//! The counting rule is pinned by [`FLOP_CONVENTION`] and echoed in every
//! report so cost figures stay comparable: one multiply-accumulate counts as
//! two FLOPs, the bias add counts once per output element, and activations
//! and pooling count one op per output element. Shape adapters are free.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::nn::graph::ModelGraph;
use crate::nn::layer::LayerSpec;
use crate::nn::NnError;
use crate::tensor::Scalar;

/// The counting rule used by [`count_cost`].
pub const FLOP_CONVENTION: &str =
    "1 MAC = 2 FLOPs; bias adds, activations, and pooling count 1 op per output element";

/// Cost of a single layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub index: usize,
    pub kind: String,
    pub output_shape: Vec<usize>,
    pub params: u64,
    pub flops: u64,
}

/// Per-layer and total parameter/FLOP counts under [`FLOP_CONVENTION`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub layers: Vec<LayerCost>,
    pub total_params: u64,
    pub total_flops: u64,
    pub convention: String,
}

/// Counts parameters and FLOPs for a layer stack applied to `input_shape`.
pub fn count_cost(
    layers: &[LayerSpec],
    input_shape: &[usize],
    aux_ports: &BTreeMap<String, usize>,
) -> Result<CostReport, NnError> {
    let mut shape = input_shape.to_vec();
    let mut out = Vec::with_capacity(layers.len());
    let mut total_params: u64 = 0;
    let mut total_flops: u64 = 0;
    for (index, spec) in layers.iter().enumerate() {
        let next = spec
            .output_shape(&shape, |p| aux_ports.get(p).copied())
            .map_err(|detail| NnError::Shape {
                index,
                kind: spec.kind_name().to_string(),
                detail,
            })?;
        let out_elems: u64 = next.iter().product::<usize>() as u64;
        let (params, flops) = match *spec {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                let lout = (next[1]) as u64;
                let k = kernel as u64;
                let cin = in_channels as u64;
                let cout = out_channels as u64;
                (
                    k * cin * cout + cout,
                    2 * k * cin * cout * lout + cout * lout,
                )
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                let spatial = (next[1] * next[2]) as u64;
                let k = (kernel[0] * kernel[1]) as u64;
                let cin = in_channels as u64;
                let cout = out_channels as u64;
                (k * cin * cout + cout, 2 * k * cin * cout * spatial + cout * spatial)
            }
            LayerSpec::Dense { inputs, outputs } => {
                let n = inputs as u64;
                let m = outputs as u64;
                (n * m + m, 2 * n * m + m)
            }
            LayerSpec::Relu | LayerSpec::Softmax => (0, out_elems),
            LayerSpec::MaxPool1d { .. } | LayerSpec::MaxPool2d { .. } => (0, out_elems),
            LayerSpec::Flatten | LayerSpec::Reshape { .. } | LayerSpec::Concat { .. } => (0, 0),
        };
        total_params += params;
        total_flops += flops;
        out.push(LayerCost {
            index,
            kind: spec.kind_name().to_string(),
            output_shape: next.clone(),
            params,
            flops,
        });
        shape = next;
    }
    Ok(CostReport {
        layers: out,
        total_params,
        total_flops,
        convention: FLOP_CONVENTION.to_string(),
    })
}

impl<F: Scalar> ModelGraph<F> {
    /// Cost report for this graph; infallible because the graph's shapes were
    /// validated at build time.
    pub fn cost(&self) -> CostReport {
        count_cost(self.layers(), self.input_shape(), self.aux_ports())
            .expect("graph shapes validated at build")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_10_to_5_hand_count() {
        // 55 params; 100 MAC-derived FLOPs plus 5 bias adds.
        let report = count_cost(
            &[LayerSpec::Dense {
                inputs: 10,
                outputs: 5,
            }],
            &[10],
            &BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(report.total_params, 55);
        assert_eq!(report.total_flops, 105);
    }

    #[test]
    fn relu_one_op_per_element() {
        let report = count_cost(&[LayerSpec::Relu], &[1, 220_500], &BTreeMap::new()).unwrap();
        assert_eq!(report.total_params, 0);
        assert_eq!(report.total_flops, 220_500);
    }

    #[test]
    fn conv1d_hand_count() {
        // k=3, cin=2, cout=4 on length 10 -> lout 8:
        // params 3*2*4 + 4 = 28; flops 2*3*2*4*8 + 4*8 = 384 + 32 = 416.
        let report = count_cost(
            &[LayerSpec::Conv1d {
                in_channels: 2,
                out_channels: 4,
                kernel: 3,
                stride: 1,
            }],
            &[2, 10],
            &BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(report.total_params, 28);
        assert_eq!(report.total_flops, 416);
    }

    #[test]
    fn conv2d_hand_count() {
        // 3x3 kernel, cin=1, cout=2 on 5x5 -> 3x3 out:
        // params 9*1*2 + 2 = 20; flops 2*9*1*2*9 + 2*9 = 324 + 18 = 342.
        let report = count_cost(
            &[LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 2,
                kernel: [3, 3],
                stride: [1, 1],
            }],
            &[1, 5, 5],
            &BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(report.total_params, 20);
        assert_eq!(report.total_flops, 342);
    }

    #[test]
    fn totals_are_additive_over_concatenation() {
        let a = [
            LayerSpec::Conv1d {
                in_channels: 1,
                out_channels: 3,
                kernel: 4,
                stride: 2,
            },
            LayerSpec::Relu,
        ];
        let b = [
            LayerSpec::max_pool1d(2),
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 3 * 7,
                outputs: 4,
            },
        ];
        let input = [1usize, 32];
        let cost_a = count_cost(&a, &input, &BTreeMap::new()).unwrap();
        let mid = cost_a.layers.last().unwrap().output_shape.clone();
        let cost_b = count_cost(&b, &mid, &BTreeMap::new()).unwrap();
        let joined: Vec<LayerSpec> = a.iter().cloned().chain(b.iter().cloned()).collect();
        let cost_ab = count_cost(&joined, &input, &BTreeMap::new()).unwrap();
        assert_eq!(
            cost_ab.total_params,
            cost_a.total_params + cost_b.total_params
        );
        assert_eq!(cost_ab.total_flops, cost_a.total_flops + cost_b.total_flops);
    }

    #[test]
    fn totals_equal_sums_of_layers() {
        let layers = [
            LayerSpec::Conv1d {
                in_channels: 1,
                out_channels: 2,
                kernel: 5,
                stride: 3,
            },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 20,
                outputs: 3,
            },
            LayerSpec::Softmax,
        ];
        let report = count_cost(&layers, &[1, 34], &BTreeMap::new()).unwrap();
        assert_eq!(
            report.total_params,
            report.layers.iter().map(|l| l.params).sum::<u64>()
        );
        assert_eq!(
            report.total_flops,
            report.layers.iter().map(|l| l.flops).sum::<u64>()
        );
    }
}
