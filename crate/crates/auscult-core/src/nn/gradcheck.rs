//! Numerical verification of reverse-mode gradients.
//!
//! [`check_gradients`] compares every analytic gradient coordinate of a graph
//! (all weights, biases, the primary input, and each auxiliary input) against
//! central finite differences of the forward pass. The probe loss is a fixed
//! random linear functional of the output, so the analytic side exercises
//! `backward` while the numeric side only ever calls `forward` — the two
//! routes share no gradient code.
//!
//! Max-pool and ReLU are piecewise; a finite difference that crosses one of
//! their decision boundaries measures the kink, not the derivative. Such
//! coordinates are detected by comparing the discrete signatures of the two
//! perturbed forward passes and reported as skipped rather than compared.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::graph::ModelGraph;
use crate::nn::NnError;
use crate::tensor::Tensor;

/// Settings for a gradient check run.
#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Relative-error floor: `rel = |a - n| / max(floor, |a|, |n|)`, so
    /// near-zero gradients are compared absolutely instead of blowing up.
    pub rel_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel_floor: 1e-4,
        }
    }
}

/// Outcome of a gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    /// Coordinates whose finite difference straddled a pool/ReLU decision
    /// boundary and were therefore not comparable.
    pub coords_skipped: usize,
    pub max_rel_err: f64,
    /// Human-readable location of the worst coordinate.
    pub worst_coord: String,
}

struct Harness<'a> {
    graph: &'a ModelGraph<f64>,
    probe: Vec<f64>,
    cfg: GradCheckConfig,
    report: GradCheckReport,
}

impl<'a> Harness<'a> {
    fn eval(
        &self,
        graph: &ModelGraph<f64>,
        input: &Tensor<f64>,
        aux: &BTreeMap<String, Tensor<f64>>,
    ) -> Result<(f64, u64), NnError> {
        let (out, tape) = graph.forward_cached(input, aux)?;
        let loss = out
            .data()
            .iter()
            .zip(&self.probe)
            .map(|(&o, &p)| o * p)
            .sum();
        Ok((loss, self.graph.discrete_signature(&tape)))
    }

    fn compare(&mut self, analytic: f64, plus: (f64, u64), minus: (f64, u64), label: impl Fn() -> String) {
        if plus.1 != minus.1 {
            self.report.coords_skipped += 1;
            return;
        }
        let numeric = (plus.0 - minus.0) / (2.0 * self.cfg.step);
        let rel = (analytic - numeric).abs()
            / self.cfg.rel_floor.max(analytic.abs()).max(numeric.abs());
        self.report.coords_checked += 1;
        if rel > self.report.max_rel_err {
            self.report.max_rel_err = rel;
            self.report.worst_coord = label();
        }
    }
}

/// Checks all gradients of `graph` at (`input`, `aux`) against central finite
/// differences with the step from `cfg`. The caller asserts on
/// [`GradCheckReport::max_rel_err`].
pub fn check_gradients(
    graph: &ModelGraph<f64>,
    input: &Tensor<f64>,
    aux: &BTreeMap<String, Tensor<f64>>,
    probe_seed: u64,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, NnError> {
    let out_len: usize = graph.output_shape().iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(probe_seed);
    let probe: Vec<f64> = (0..out_len)
        .map(|_| {
            let magnitude = rng.random_range(0.5..1.5);
            if rng.random_range(0..2) == 0 {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();

    let (_, tape) = graph.forward_cached(input, aux)?;
    let loss_grad = Tensor::new(graph.output_shape().to_vec(), probe.clone())
        .expect("probe matches output shape");
    let analytic = graph.backward(&tape, &loss_grad)?;

    let mut harness = Harness {
        graph,
        probe,
        cfg: cfg.clone(),
        report: GradCheckReport {
            coords_checked: 0,
            coords_skipped: 0,
            max_rel_err: 0.0,
            worst_coord: String::new(),
        },
    };
    let h = cfg.step;

    // Parameters.
    let mut work = graph.clone();
    for index in 0..graph.params().len() {
        let Some(grads) = analytic.params[index].as_ref() else {
            continue;
        };
        for part in 0..2 {
            let n = if part == 0 {
                grads.weight.len()
            } else {
                grads.bias.len()
            };
            for coord in 0..n {
                let read = |g: &ModelGraph<f64>| {
                    let p = g.params()[index].as_ref().expect("parameterized layer");
                    if part == 0 {
                        p.weight.data()[coord]
                    } else {
                        p.bias.data()[coord]
                    }
                };
                let orig = read(&work);
                let write = |g: &mut ModelGraph<f64>, v: f64| {
                    let p = g.params_mut()[index].as_mut().expect("parameterized layer");
                    if part == 0 {
                        p.weight.data_mut()[coord] = v;
                    } else {
                        p.bias.data_mut()[coord] = v;
                    }
                };
                write(&mut work, orig + h);
                let plus = harness.eval(&work, input, aux)?;
                write(&mut work, orig - h);
                let minus = harness.eval(&work, input, aux)?;
                write(&mut work, orig);
                let a = if part == 0 {
                    grads.weight.data()[coord]
                } else {
                    grads.bias.data()[coord]
                };
                let kind = graph.layers()[index].kind_name();
                let name = if part == 0 { "weight" } else { "bias" };
                harness.compare(a, plus, minus, || {
                    format!("layer {index} ({kind}) {name}[{coord}]")
                });
            }
        }
    }

    // Primary input.
    let mut work_input = input.clone();
    for coord in 0..input.len() {
        let orig = work_input.data()[coord];
        work_input.data_mut()[coord] = orig + h;
        let plus = harness.eval(graph, &work_input, aux)?;
        work_input.data_mut()[coord] = orig - h;
        let minus = harness.eval(graph, &work_input, aux)?;
        work_input.data_mut()[coord] = orig;
        let a = analytic.input.data()[coord];
        harness.compare(a, plus, minus, || format!("input[{coord}]"));
    }

    // Auxiliary inputs.
    let mut work_aux = aux.clone();
    let ports: Vec<String> = aux.keys().cloned().collect();
    for port in ports {
        let n = aux[&port].len();
        for coord in 0..n {
            let orig = work_aux[&port].data()[coord];
            work_aux.get_mut(&port).expect("port exists").data_mut()[coord] = orig + h;
            let plus = harness.eval(graph, input, &work_aux)?;
            work_aux.get_mut(&port).expect("port exists").data_mut()[coord] = orig - h;
            let minus = harness.eval(graph, input, &work_aux)?;
            work_aux.get_mut(&port).expect("port exists").data_mut()[coord] = orig;
            let a = analytic.aux[&port].data()[coord];
            harness.compare(a, plus, minus, || format!("aux[{port}][{coord}]"));
        }
    }

    Ok(harness.report)
}

/// One named verification case: a graph, its primary input, and any
/// auxiliary inputs, ready for [`check_gradients`].
pub struct VerificationCase {
    pub name: &'static str,
    pub graph: ModelGraph<f64>,
    pub input: Tensor<f64>,
    pub aux: BTreeMap<String, Tensor<f64>>,
}

/// Builds one small randomly-initialized graph per layer kind, plus a
/// composed model that chains every kind, all seeded from `seed`.
pub fn verification_cases(seed: u64) -> Vec<VerificationCase> {
    use crate::nn::graph::GraphBuilder;
    use crate::nn::layer::LayerSpec;

    let mut cases = Vec::new();
    let mut push = |name: &'static str,
                    builder: Result<GraphBuilder, NnError>,
                    input_seed: u64,
                    aux_dims: &[(&str, usize)]| {
        let mut graph = builder
            .expect("verification graph builds")
            .build()
            .expect("verification graph builds");
        graph.init_params(seed ^ 0x9e37);
        let input = well_spaced_input(graph.input_shape(), seed);
        let mut aux = BTreeMap::new();
        for (i, (port, dim)) in aux_dims.iter().enumerate() {
            aux.insert(
                String::from(*port),
                well_spaced_input(&[*dim], input_seed ^ (i as u64 + 1)),
            );
        }
        cases.push(VerificationCase {
            name,
            graph,
            input,
            aux,
        });
    };

    push(
        "conv1d",
        GraphBuilder::new(&[2, 12]).push(LayerSpec::Conv1d {
            in_channels: 2,
            out_channels: 3,
            kernel: 3,
            stride: 2,
        }),
        seed.wrapping_add(1),
        &[],
    );
    push(
        "conv2d",
        GraphBuilder::new(&[2, 5, 6]).push(LayerSpec::Conv2d {
            in_channels: 2,
            out_channels: 3,
            kernel: [2, 3],
            stride: [1, 2],
        }),
        seed.wrapping_add(2),
        &[],
    );
    push(
        "max_pool1d",
        GraphBuilder::new(&[2, 12]).push(LayerSpec::max_pool1d(3)),
        seed.wrapping_add(3),
        &[],
    );
    push(
        "max_pool1d_overlapping",
        GraphBuilder::new(&[2, 12]).push(LayerSpec::MaxPool1d {
            kernel: 3,
            stride: 2,
        }),
        seed.wrapping_add(4),
        &[],
    );
    push(
        "max_pool2d",
        GraphBuilder::new(&[2, 6, 6]).push(LayerSpec::max_pool2d([2, 2])),
        seed.wrapping_add(5),
        &[],
    );
    push(
        "dense",
        GraphBuilder::new(&[7]).push(LayerSpec::Dense {
            inputs: 7,
            outputs: 4,
        }),
        seed.wrapping_add(6),
        &[],
    );
    push(
        "relu",
        GraphBuilder::new(&[3, 8]).push(LayerSpec::Relu),
        seed.wrapping_add(7),
        &[],
    );
    push(
        "softmax",
        GraphBuilder::new(&[6]).push(LayerSpec::Softmax),
        seed.wrapping_add(8),
        &[],
    );
    push(
        "flatten",
        GraphBuilder::new(&[2, 3, 4]).push(LayerSpec::Flatten),
        seed.wrapping_add(9),
        &[],
    );
    push(
        "reshape",
        GraphBuilder::new(&[2, 6]).push(LayerSpec::Reshape {
            shape: alloc::vec![4, 3],
        }),
        seed.wrapping_add(10),
        &[],
    );
    push(
        "concat",
        GraphBuilder::new(&[5])
            .aux_port("side", 3)
            .push(LayerSpec::Concat {
                port: String::from("side"),
            }),
        seed.wrapping_add(11),
        &[("side", 3)],
    );
    push(
        "composed",
        GraphBuilder::new(&[1, 24])
            .aux_port("side", 3)
            .push(LayerSpec::Conv1d {
                in_channels: 1,
                out_channels: 2,
                kernel: 3,
                stride: 1,
            })
            .and_then(|b| b.push(LayerSpec::Relu))
            .and_then(|b| b.push(LayerSpec::max_pool1d(2)))
            .and_then(|b| {
                b.push(LayerSpec::Reshape {
                    shape: alloc::vec![1, 2, 11],
                })
            })
            .and_then(|b| {
                b.push(LayerSpec::Conv2d {
                    in_channels: 1,
                    out_channels: 2,
                    kernel: [2, 3],
                    stride: [1, 2],
                })
            })
            .and_then(|b| b.push(LayerSpec::Relu))
            .and_then(|b| b.push(LayerSpec::max_pool2d([1, 2])))
            .and_then(|b| b.push(LayerSpec::Flatten))
            .and_then(|b| {
                b.push(LayerSpec::Concat {
                    port: String::from("side"),
                })
            })
            .and_then(|b| {
                b.push(LayerSpec::Dense {
                    inputs: 7,
                    outputs: 5,
                })
            })
            .and_then(|b| b.push(LayerSpec::Relu))
            .and_then(|b| {
                b.push(LayerSpec::Dense {
                    inputs: 5,
                    outputs: 4,
                })
            })
            .and_then(|b| b.push(LayerSpec::Softmax)),
        seed.wrapping_add(12),
        &[("side", 3)],
    );

    cases
}

/// A test input whose entries are well separated: a seeded signed permutation
/// of the lattice `(i + 1) / n`. Any two entries differ by at least `1 / n`,
/// which keeps small finite-difference steps away from pooling ties and ReLU
/// zero crossings for the layer shapes used in verification.
pub fn well_spaced_input(shape: &[usize], seed: u64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..n).map(|i| (i + 1) as f64 / n as f64).collect();
    values.shuffle(&mut rng);
    for v in values.iter_mut() {
        if rng.random_range(0..2) == 0 {
            *v = -*v;
        }
    }
    Tensor::new(shape.to_vec(), values).expect("lattice matches shape")
}
