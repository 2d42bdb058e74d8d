//! Sequential model graphs with auxiliary input ports and reverse-mode
//! gradients.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::layer::{self, LayerSpec};
use crate::nn::NnError;
use crate::tensor::{Scalar, Tensor};

/// Weight and bias tensors of one parameterized layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<F> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

/// Incrementally shape-checked builder for [`ModelGraph`].
///
/// Each `push` resolves the layer's output shape immediately, so a
/// configuration that collapses an intermediate length fails at the exact
/// layer instead of at inference time.
#[derive(Debug)]
pub struct GraphBuilder {
    input_shape: Vec<usize>,
    aux_ports: BTreeMap<String, usize>,
    layers: Vec<LayerSpec>,
    shapes: Vec<Vec<usize>>,
}

impl GraphBuilder {
    pub fn new(input_shape: &[usize]) -> Self {
        Self {
            input_shape: input_shape.to_vec(),
            aux_ports: BTreeMap::new(),
            layers: Vec::new(),
            shapes: Vec::new(),
        }
    }

    /// Declares a flat auxiliary input of dimension `dim`.
    pub fn aux_port(mut self, name: &str, dim: usize) -> Self {
        self.aux_ports.insert(name.to_string(), dim);
        self
    }

    /// Shape of the activation entering the next pushed layer.
    pub fn current_shape(&self) -> &[usize] {
        self.shapes.last().unwrap_or(&self.input_shape)
    }

    pub fn push(mut self, spec: LayerSpec) -> Result<Self, NnError> {
        let index = self.layers.len();
        let ports = &self.aux_ports;
        let out = spec
            .output_shape(self.current_shape(), |p| ports.get(p).copied())
            .map_err(|detail| NnError::Shape {
                index,
                kind: spec.kind_name().to_string(),
                detail,
            })?;
        self.layers.push(spec);
        self.shapes.push(out);
        Ok(self)
    }

    /// Finishes the graph with zeroed parameters.
    pub fn build(self) -> Result<ModelGraph<f64>, NnError> {
        self.build_as::<f64>()
    }

    /// Finishes the graph with zeroed parameters of scalar type `F`.
    pub fn build_as<F: Scalar>(self) -> Result<ModelGraph<F>, NnError> {
        if self.layers.is_empty() {
            return Err(NnError::Invalid("graph has no layers".to_string()));
        }
        let params = self
            .layers
            .iter()
            .map(|spec| {
                spec.param_shapes()
                    .map(|(w, b)| LayerParams {
                        weight: Tensor::zeros(&w),
                        bias: Tensor::zeros(&b),
                    })
            })
            .collect();
        Ok(ModelGraph {
            input_shape: self.input_shape,
            aux_ports: self.aux_ports,
            layers: self.layers,
            shapes: self.shapes,
            params,
        })
    }
}

/// Cached activations from one forward pass, consumed by
/// [`ModelGraph::backward`].
///
/// Holding a `Tape` is the proof that the forward pass ran; gradients cannot
/// be requested without one.
pub struct Tape<F> {
    /// `acts[0]` is the primary input; `acts[i + 1]` is the output of layer `i`.
    acts: Vec<Tensor<F>>,
    /// For pooling layers, the flat input index selected per output element.
    pool_choices: Vec<Option<Vec<usize>>>,
}

impl<F: Scalar> Tape<F> {
    pub fn output(&self) -> &Tensor<F> {
        self.acts.last().expect("tape holds at least the input")
    }
}

/// Gradients for every parameter tensor and every input of a graph.
#[derive(Clone, Debug)]
pub struct Gradients<F> {
    /// Keyed by layer index, mirroring the graph's parameter store.
    pub params: Vec<Option<LayerParams<F>>>,
    pub input: Tensor<F>,
    pub aux: BTreeMap<String, Tensor<F>>,
}

/// An ordered layer stack with one primary input, zero or more flat
/// auxiliary inputs, and a parameter store keyed by layer index.
#[derive(Clone, Debug)]
pub struct ModelGraph<F> {
    input_shape: Vec<usize>,
    aux_ports: BTreeMap<String, usize>,
    layers: Vec<LayerSpec>,
    shapes: Vec<Vec<usize>>,
    params: Vec<Option<LayerParams<F>>>,
}

impl<F: Scalar> ModelGraph<F> {
    /// Rebuilds a graph from its serialized parts, revalidating all shapes.
    pub fn from_parts(
        input_shape: Vec<usize>,
        aux_ports: BTreeMap<String, usize>,
        layers: Vec<LayerSpec>,
        params: Vec<Option<LayerParams<F>>>,
    ) -> Result<Self, NnError> {
        let mut builder = GraphBuilder::new(&input_shape);
        for (name, dim) in &aux_ports {
            builder = builder.aux_port(name, *dim);
        }
        for spec in layers {
            builder = builder.push(spec)?;
        }
        let mut graph = builder.build_as::<F>()?;
        if params.len() != graph.layers.len() {
            return Err(NnError::Invalid(format!(
                "parameter store has {} entries for {} layers",
                params.len(),
                graph.layers.len()
            )));
        }
        for (index, (have, want)) in params.iter().zip(&graph.params).enumerate() {
            match (have, want) {
                (None, None) => {}
                (Some(h), Some(w)) => {
                    if h.weight.shape() != w.weight.shape() || h.bias.shape() != w.bias.shape() {
                        return Err(NnError::ParamMismatch {
                            index,
                            detail: format!(
                                "stored {:?}/{:?}, expected {:?}/{:?}",
                                h.weight.shape(),
                                h.bias.shape(),
                                w.weight.shape(),
                                w.bias.shape()
                            ),
                        });
                    }
                }
                _ => {
                    return Err(NnError::ParamMismatch {
                        index,
                        detail: "parameter presence does not match layer kind".to_string(),
                    })
                }
            }
        }
        graph.params = params;
        Ok(graph)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("graph has at least one layer")
    }

    /// Output shape of each layer, in order.
    pub fn layer_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn aux_ports(&self) -> &BTreeMap<String, usize> {
        &self.aux_ports
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Option<LayerParams<F>>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<LayerParams<F>>] {
        &mut self.params
    }

    pub fn param_count(&self) -> u64 {
        self.params
            .iter()
            .flatten()
            .map(|p| (p.weight.len() + p.bias.len()) as u64)
            .sum()
    }

    /// Fan-in scaled uniform weight initialization (He-style for the ReLU
    /// stack), biases zero. Deterministic for a fixed seed.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (spec, slot) in self.layers.iter().zip(self.params.iter_mut()) {
            if let Some(p) = slot.as_mut() {
                let fan_in = spec.fan_in().unwrap_or(1).max(1);
                let limit = (6.0 / fan_in as f64).sqrt();
                for w in p.weight.data_mut() {
                    *w = F::from_f64(rng.random_range(-limit..limit));
                }
                for b in p.bias.data_mut() {
                    *b = F::zero();
                }
            }
        }
    }

    /// Converts parameters to another scalar type, keeping the same graph.
    pub fn cast<G: Scalar>(&self) -> ModelGraph<G> {
        ModelGraph {
            input_shape: self.input_shape.clone(),
            aux_ports: self.aux_ports.clone(),
            layers: self.layers.clone(),
            shapes: self.shapes.clone(),
            params: self
                .params
                .iter()
                .map(|slot| {
                    slot.as_ref().map(|p| LayerParams {
                        weight: p.weight.cast::<G>(),
                        bias: p.bias.cast::<G>(),
                    })
                })
                .collect(),
        }
    }

    fn check_inputs(
        &self,
        input: &Tensor<F>,
        aux: &BTreeMap<String, Tensor<F>>,
    ) -> Result<(), NnError> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(NnError::Shape {
                index: 0,
                kind: "input".to_string(),
                detail: format!(
                    "graph expects input {:?}, got {:?}",
                    self.input_shape,
                    input.shape()
                ),
            });
        }
        for (port, dim) in &self.aux_ports {
            match aux.get(port) {
                None => {
                    return Err(NnError::Port {
                        port: port.clone(),
                        detail: "missing auxiliary input".to_string(),
                    })
                }
                Some(t) if t.len() != *dim => {
                    return Err(NnError::Port {
                        port: port.clone(),
                        detail: format!("expected {dim} values, got {}", t.len()),
                    })
                }
                _ => {}
            }
        }
        for port in aux.keys() {
            if !self.aux_ports.contains_key(port) {
                return Err(NnError::Port {
                    port: port.clone(),
                    detail: "graph declares no such port".to_string(),
                });
            }
        }
        Ok(())
    }

    /// Runs the graph and returns the final activation.
    pub fn forward(
        &self,
        input: &Tensor<F>,
        aux: &BTreeMap<String, Tensor<F>>,
    ) -> Result<Tensor<F>, NnError> {
        self.forward_cached(input, aux).map(|(out, _)| out)
    }

    /// Convenience for graphs without auxiliary ports.
    pub fn forward_simple(&self, input: &Tensor<F>) -> Result<Tensor<F>, NnError> {
        self.forward(input, &BTreeMap::new())
    }

    /// Runs the graph and keeps the activations needed by [`Self::backward`].
    pub fn forward_cached(
        &self,
        input: &Tensor<F>,
        aux: &BTreeMap<String, Tensor<F>>,
    ) -> Result<(Tensor<F>, Tape<F>), NnError> {
        self.check_inputs(input, aux)?;
        let mut acts: Vec<Tensor<F>> = Vec::with_capacity(self.layers.len() + 1);
        let mut pool_choices: Vec<Option<Vec<usize>>> = Vec::with_capacity(self.layers.len());
        acts.push(input.clone());
        for (index, spec) in self.layers.iter().enumerate() {
            let x = acts.last().expect("previous activation");
            let mut choice = None;
            let out = match spec {
                LayerSpec::Conv1d { stride, .. } => {
                    let p = self.params[index].as_ref().expect("conv1d params");
                    layer::conv1d_forward(x, &p.weight, &p.bias, *stride)
                }
                LayerSpec::Conv2d { stride, .. } => {
                    let p = self.params[index].as_ref().expect("conv2d params");
                    layer::conv2d_forward(x, &p.weight, &p.bias, *stride)
                }
                LayerSpec::MaxPool1d { kernel, stride } => {
                    let (out, idx) = layer::max_pool1d_forward(x, *kernel, *stride);
                    choice = Some(idx);
                    out
                }
                LayerSpec::MaxPool2d { kernel, stride } => {
                    let (out, idx) = layer::max_pool2d_forward(x, *kernel, *stride);
                    choice = Some(idx);
                    out
                }
                LayerSpec::Dense { .. } => {
                    let p = self.params[index].as_ref().expect("dense params");
                    layer::dense_forward(x, &p.weight, &p.bias)
                }
                LayerSpec::Relu => layer::relu_forward(x),
                LayerSpec::Softmax => layer::softmax_forward(x),
                LayerSpec::Flatten => x
                    .clone()
                    .reshaped(&self.shapes[index])
                    .expect("flatten preserves element count"),
                LayerSpec::Reshape { .. } => x
                    .clone()
                    .reshaped(&self.shapes[index])
                    .expect("reshape validated at build"),
                LayerSpec::Concat { port } => {
                    let extra = aux.get(port).expect("checked above");
                    let mut data = x.data().to_vec();
                    data.extend_from_slice(extra.data());
                    Tensor::from_vec(data)
                }
            };
            if !out.all_finite() {
                return Err(NnError::NonFinite {
                    index,
                    kind: spec.kind_name().to_string(),
                });
            }
            pool_choices.push(choice);
            acts.push(out);
        }
        let out = acts.last().expect("output activation").clone();
        Ok((out, Tape { acts, pool_choices }))
    }

    /// Reverse-mode gradients for every parameter and input, given the
    /// gradient of a scalar loss with respect to the graph output.
    pub fn backward(&self, tape: &Tape<F>, loss_grad: &Tensor<F>) -> Result<Gradients<F>, NnError> {
        let out_shape = self.output_shape();
        if loss_grad.shape() != out_shape {
            return Err(NnError::Shape {
                index: self.layers.len() - 1,
                kind: "loss_grad".to_string(),
                detail: format!(
                    "expected output gradient {:?}, got {:?}",
                    out_shape,
                    loss_grad.shape()
                ),
            });
        }
        let mut param_grads: Vec<Option<LayerParams<F>>> = self
            .params
            .iter()
            .map(|slot| {
                slot.as_ref().map(|p| LayerParams {
                    weight: Tensor::zeros(p.weight.shape()),
                    bias: Tensor::zeros(p.bias.shape()),
                })
            })
            .collect();
        let mut aux_grads: BTreeMap<String, Tensor<F>> = BTreeMap::new();
        let mut grad = loss_grad.clone();
        for (index, spec) in self.layers.iter().enumerate().rev() {
            let x = &tape.acts[index];
            grad = match spec {
                LayerSpec::Conv1d { stride, .. } => {
                    let p = self.params[index].as_ref().expect("conv1d params");
                    let (dx, dw, db) = layer::conv1d_backward(x, &p.weight, &grad, *stride);
                    param_grads[index] = Some(LayerParams {
                        weight: dw,
                        bias: db,
                    });
                    dx
                }
                LayerSpec::Conv2d { stride, .. } => {
                    let p = self.params[index].as_ref().expect("conv2d params");
                    let (dx, dw, db) = layer::conv2d_backward(x, &p.weight, &grad, *stride);
                    param_grads[index] = Some(LayerParams {
                        weight: dw,
                        bias: db,
                    });
                    dx
                }
                LayerSpec::MaxPool1d { .. } | LayerSpec::MaxPool2d { .. } => {
                    let chosen = tape.pool_choices[index]
                        .as_ref()
                        .expect("pool choices cached in forward");
                    layer::max_pool_backward(x.shape(), chosen, &grad)
                }
                LayerSpec::Dense { .. } => {
                    let p = self.params[index].as_ref().expect("dense params");
                    let (dx, dw, db) = layer::dense_backward(x, &p.weight, &grad);
                    param_grads[index] = Some(LayerParams {
                        weight: dw,
                        bias: db,
                    });
                    dx
                }
                LayerSpec::Relu => layer::relu_backward(x, &grad),
                LayerSpec::Softmax => {
                    let p = &tape.acts[index + 1];
                    layer::softmax_backward(p, &grad)
                }
                LayerSpec::Flatten | LayerSpec::Reshape { .. } => grad
                    .reshaped(x.shape())
                    .expect("shape adapters preserve element count"),
                LayerSpec::Concat { port } => {
                    let n = x.len();
                    let gd = grad.data();
                    let dx = Tensor::from_vec(gd[..n].to_vec());
                    let daux = Tensor::from_vec(gd[n..].to_vec());
                    aux_grads.insert(port.clone(), daux);
                    dx.reshaped(x.shape()).expect("concat input is flat")
                }
            };
        }
        // Ports never reached by the backward sweep still get zero gradients.
        for (port, dim) in &self.aux_ports {
            aux_grads
                .entry(port.clone())
                .or_insert_with(|| Tensor::zeros(&[*dim]));
        }
        Ok(Gradients {
            params: param_grads,
            input: grad,
            aux: aux_grads,
        })
    }

    /// Hash of the discrete decisions (pool selections, ReLU activation
    /// pattern) taken during the forward pass behind `tape`.
    ///
    /// Numerical gradient verification uses this to detect when a finite
    /// difference straddles a non-differentiable point: if the signature
    /// differs between the two perturbed evaluations, that coordinate's
    /// numeric derivative is meaningless.
    pub fn discrete_signature(&self, tape: &Tape<F>) -> u64 {
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |byte: u8| {
            h ^= byte as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        };
        for (index, spec) in self.layers.iter().enumerate() {
            match spec {
                LayerSpec::MaxPool1d { .. } | LayerSpec::MaxPool2d { .. } => {
                    if let Some(chosen) = tape.pool_choices[index].as_ref() {
                        for &c in chosen {
                            for b in (c as u64).to_le_bytes() {
                                eat(b);
                            }
                        }
                    }
                }
                LayerSpec::Relu => {
                    for &v in tape.acts[index].data() {
                        eat(u8::from(v > F::zero()));
                    }
                }
                _ => {}
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn conv1d_scalar_scaling() {
        // 1x1 kernel with weight 2, bias 0 doubles the signal.
        let mut g = GraphBuilder::new(&[1, 3])
            .push(LayerSpec::Conv1d {
                in_channels: 1,
                out_channels: 1,
                kernel: 1,
                stride: 1,
            })
            .unwrap()
            .build()
            .unwrap();
        g.params_mut()[0] = Some(LayerParams {
            weight: Tensor::new(vec![1, 1, 1], vec![2.0]).unwrap(),
            bias: Tensor::zeros(&[1]),
        });
        let x = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let y = g.forward_simple(&x).unwrap();
        assert_eq!(y.data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn forward_rejects_wrong_input_shape() {
        let g = GraphBuilder::new(&[1, 8])
            .push(LayerSpec::Flatten)
            .unwrap()
            .build()
            .unwrap();
        let err = g.forward_simple(&Tensor::<f64>::zeros(&[1, 4])).unwrap_err();
        assert!(matches!(err, NnError::Shape { .. }));
    }

    #[test]
    fn builder_rejects_short_input() {
        let err = GraphBuilder::new(&[1, 4])
            .push(LayerSpec::Conv1d {
                in_channels: 1,
                out_channels: 2,
                kernel: 8,
                stride: 1,
            })
            .unwrap_err();
        match err {
            NnError::Shape { index, kind, .. } => {
                assert_eq!(index, 0);
                assert_eq!(kind, "conv1d");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_aux_port_is_an_error() {
        let g = GraphBuilder::new(&[4])
            .aux_port("extra", 3)
            .push(LayerSpec::Concat {
                port: "extra".into(),
            })
            .unwrap()
            .build()
            .unwrap();
        let err = g.forward_simple(&Tensor::<f64>::zeros(&[4])).unwrap_err();
        assert!(matches!(err, NnError::Port { .. }));
        let mut aux = BTreeMap::new();
        aux.insert("extra".into(), Tensor::<f64>::zeros(&[3]));
        let out = g.forward(&Tensor::zeros(&[4]), &aux).unwrap();
        assert_eq!(out.len(), 7);
    }

    #[test]
    fn non_finite_output_names_the_layer() {
        let mut g = GraphBuilder::new(&[2])
            .push(LayerSpec::Dense {
                inputs: 2,
                outputs: 1,
            })
            .unwrap()
            .build()
            .unwrap();
        g.params_mut()[0] = Some(LayerParams {
            weight: Tensor::new(vec![1, 2], vec![f64::INFINITY, 0.0]).unwrap(),
            bias: Tensor::zeros(&[1]),
        });
        let x = Tensor::from_vec(vec![f64::MAX, 0.0]);
        match g.forward_simple(&x).unwrap_err() {
            NnError::NonFinite { index, kind } => {
                assert_eq!(index, 0);
                assert_eq!(kind, "dense");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn zero_loss_grad_gives_zero_gradients() {
        let mut g = GraphBuilder::new(&[1, 6])
            .push(LayerSpec::Conv1d {
                in_channels: 1,
                out_channels: 2,
                kernel: 3,
                stride: 1,
            })
            .unwrap()
            .push(LayerSpec::Relu)
            .unwrap()
            .push(LayerSpec::Flatten)
            .unwrap()
            .push(LayerSpec::Dense {
                inputs: 8,
                outputs: 3,
            })
            .unwrap()
            .build()
            .unwrap();
        g.init_params(7);
        let x = Tensor::new(vec![1, 6], vec![0.1, -0.4, 0.9, 0.3, -0.2, 0.5]).unwrap();
        let (out, tape) = g.forward_cached(&x, &BTreeMap::new()).unwrap();
        let grads = g.backward(&tape, &Tensor::zeros(out.shape())).unwrap();
        assert!(grads.input.data().iter().all(|&v| v == 0.0));
        for slot in grads.params.iter().flatten() {
            assert!(slot.weight.data().iter().all(|&v| v == 0.0));
            assert!(slot.bias.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let build = || {
            GraphBuilder::new(&[1, 10])
                .push(LayerSpec::Conv1d {
                    in_channels: 1,
                    out_channels: 3,
                    kernel: 3,
                    stride: 2,
                })
                .unwrap()
                .build()
                .unwrap()
        };
        let mut a = build();
        let mut b = build();
        a.init_params(42);
        b.init_params(42);
        assert_eq!(a.params()[0], b.params()[0]);
        let mut c = build();
        c.init_params(43);
        assert_ne!(a.params()[0], c.params()[0]);
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let mut g = GraphBuilder::new(&[1, 16])
            .push(LayerSpec::Conv1d {
                in_channels: 1,
                out_channels: 4,
                kernel: 5,
                stride: 2,
            })
            .unwrap()
            .push(LayerSpec::Relu)
            .unwrap()
            .push(LayerSpec::max_pool1d(2))
            .unwrap()
            .push(LayerSpec::Flatten)
            .unwrap()
            .push(LayerSpec::Softmax)
            .unwrap()
            .build()
            .unwrap();
        g.init_params(3);
        let x = Tensor::new(vec![1, 16], (0..16).map(|i| (i as f64 * 0.37).sin()).collect())
            .unwrap();
        let a = g.forward_simple(&x).unwrap();
        let b = g.forward_simple(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }
}
