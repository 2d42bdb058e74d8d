//! Layer specifications, shape inference, and the forward/backward kernels.
//!
//! Activations are row-major: `[channels, length]` for 1-D stages,
//! `[channels, height, width]` for 2-D stages, `[n]` once flattened.
//! Weight layouts: Conv1d `[out, in, k]`, Conv2d `[out, in, kh, kw]`,
//! Dense `[out, in]`; biases are `[out]`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::tensor::{Scalar, Tensor};

/// One layer of a sequential graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 2],
        stride: [usize; 2],
    },
    MaxPool1d {
        kernel: usize,
        stride: usize,
    },
    MaxPool2d {
        kernel: [usize; 2],
        stride: [usize; 2],
    },
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Relu,
    Softmax,
    Flatten,
    Reshape {
        shape: Vec<usize>,
    },
    /// Appends the named auxiliary input to a flat activation vector.
    Concat {
        port: String,
    },
}

impl LayerSpec {
    /// Non-overlapping 1-D max-pool (stride = kernel).
    pub fn max_pool1d(kernel: usize) -> Self {
        LayerSpec::MaxPool1d {
            kernel,
            stride: kernel,
        }
    }

    /// Non-overlapping 2-D max-pool (stride = kernel).
    pub fn max_pool2d(kernel: [usize; 2]) -> Self {
        LayerSpec::MaxPool2d {
            kernel,
            stride: kernel,
        }
    }

    /// Short name used in errors and cost reports.
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool1d { .. } => "max_pool1d",
            LayerSpec::MaxPool2d { .. } => "max_pool2d",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Softmax => "softmax",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Reshape { .. } => "reshape",
            LayerSpec::Concat { .. } => "concat",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv1d { .. } | LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. }
        )
    }

    /// Weight/bias shapes for parameterized layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((vec![out_channels, in_channels, kernel], vec![out_channels])),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((
                vec![out_channels, in_channels, kernel[0], kernel[1]],
                vec![out_channels],
            )),
            LayerSpec::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
            _ => None,
        }
    }

    /// Fan-in used for weight initialization scaling.
    pub fn fan_in(&self) -> Option<usize> {
        match *self {
            LayerSpec::Conv1d {
                in_channels, kernel, ..
            } => Some(in_channels * kernel),
            LayerSpec::Conv2d {
                in_channels, kernel, ..
            } => Some(in_channels * kernel[0] * kernel[1]),
            LayerSpec::Dense { inputs, .. } => Some(inputs),
            _ => None,
        }
    }

    /// Infers the output shape for `input`, or explains why the shapes are
    /// incompatible. `aux_dim` resolves `Concat` ports.
    pub fn output_shape(
        &self,
        input: &[usize],
        aux_dim: impl Fn(&str) -> Option<usize>,
    ) -> Result<Vec<usize>, String> {
        match self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                let (c, l) = expect_2d(input)?;
                if c != *in_channels {
                    return Err(format!("expected {in_channels} input channels, got {c}"));
                }
                let lout = conv_out(l, *kernel, *stride)?;
                Ok(vec![*out_channels, lout])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                let (c, h, w) = expect_3d(input)?;
                if c != *in_channels {
                    return Err(format!("expected {in_channels} input channels, got {c}"));
                }
                let hout = conv_out(h, kernel[0], stride[0])?;
                let wout = conv_out(w, kernel[1], stride[1])?;
                Ok(vec![*out_channels, hout, wout])
            }
            LayerSpec::MaxPool1d { kernel, stride } => {
                let (c, l) = expect_2d(input)?;
                let lout = conv_out(l, *kernel, *stride)?;
                Ok(vec![c, lout])
            }
            LayerSpec::MaxPool2d { kernel, stride } => {
                let (c, h, w) = expect_3d(input)?;
                let hout = conv_out(h, kernel[0], stride[0])?;
                let wout = conv_out(w, kernel[1], stride[1])?;
                Ok(vec![c, hout, wout])
            }
            LayerSpec::Dense { inputs, outputs } => {
                let n = expect_flat(input)?;
                if n != *inputs {
                    return Err(format!("expected {inputs} inputs, got {n}"));
                }
                Ok(vec![*outputs])
            }
            LayerSpec::Relu | LayerSpec::Softmax => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape { shape } => {
                let have: usize = input.iter().product();
                let want: usize = shape.iter().product();
                if have != want {
                    return Err(format!(
                        "cannot reshape {have} elements into {shape:?} ({want} elements)"
                    ));
                }
                Ok(shape.clone())
            }
            LayerSpec::Concat { port } => {
                let n = expect_flat(input)?;
                match aux_dim(port) {
                    Some(d) => Ok(vec![n + d]),
                    None => Err(format!("unknown auxiliary port '{port}'")),
                }
            }
        }
    }
}

fn expect_2d(shape: &[usize]) -> Result<(usize, usize), String> {
    match shape {
        [c, l] => Ok((*c, *l)),
        other => Err(format!("expected [channels, length] input, got {other:?}")),
    }
}

fn expect_3d(shape: &[usize]) -> Result<(usize, usize, usize), String> {
    match shape {
        [c, h, w] => Ok((*c, *h, *w)),
        other => Err(format!(
            "expected [channels, height, width] input, got {other:?}"
        )),
    }
}

fn expect_flat(shape: &[usize]) -> Result<usize, String> {
    match shape {
        [n] => Ok(*n),
        other => Err(format!("expected flat input, got {other:?}")),
    }
}

fn conv_out(len: usize, kernel: usize, stride: usize) -> Result<usize, String> {
    if kernel == 0 || stride == 0 {
        return Err(String::from("kernel and stride must be positive"));
    }
    if len < kernel {
        return Err(format!("input length {len} shorter than kernel {kernel}"));
    }
    Ok((len - kernel) / stride + 1)
}

// ---------------------------------------------------------------------------
// Kernels. Shapes are validated by the graph before these run.
// ---------------------------------------------------------------------------

pub(crate) fn conv1d_forward<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    b: &Tensor<F>,
    stride: usize,
) -> Tensor<F> {
    let (cin, l) = (x.shape()[0], x.shape()[1]);
    let (cout, k) = (w.shape()[0], w.shape()[2]);
    let lout = (l - k) / stride + 1;
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    let mut out = vec![F::zero(); cout * lout];
    for co in 0..cout {
        let orow = &mut out[co * lout..(co + 1) * lout];
        for v in orow.iter_mut() {
            *v = bd[co];
        }
        for ci in 0..cin {
            let wrow = &wd[(co * cin + ci) * k..(co * cin + ci + 1) * k];
            let xrow = &xd[ci * l..(ci + 1) * l];
            for (t, v) in orow.iter_mut().enumerate() {
                let xwin = &xrow[t * stride..t * stride + k];
                let mut acc = F::zero();
                for j in 0..k {
                    acc = acc + wrow[j] * xwin[j];
                }
                *v = *v + acc;
            }
        }
    }
    Tensor::new(vec![cout, lout], out).expect("conv1d output shape")
}

pub(crate) fn conv1d_backward<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    grad_out: &Tensor<F>,
    stride: usize,
) -> (Tensor<F>, Tensor<F>, Tensor<F>) {
    let (cin, l) = (x.shape()[0], x.shape()[1]);
    let (cout, k) = (w.shape()[0], w.shape()[2]);
    let lout = grad_out.shape()[1];
    let xd = x.data();
    let wd = w.data();
    let gd = grad_out.data();
    let mut dx = vec![F::zero(); cin * l];
    let mut dw = vec![F::zero(); cout * cin * k];
    let mut db = vec![F::zero(); cout];
    for co in 0..cout {
        let grow = &gd[co * lout..(co + 1) * lout];
        let mut bias_acc = F::zero();
        for &g in grow {
            bias_acc = bias_acc + g;
        }
        db[co] = bias_acc;
        for ci in 0..cin {
            let wbase = (co * cin + ci) * k;
            let xbase = ci * l;
            for (t, &g) in grow.iter().enumerate() {
                let off = xbase + t * stride;
                for j in 0..k {
                    dw[wbase + j] = dw[wbase + j] + g * xd[off + j];
                    dx[off + j] = dx[off + j] + g * wd[wbase + j];
                }
            }
        }
    }
    (
        Tensor::new(vec![cin, l], dx).expect("conv1d dx shape"),
        Tensor::new(vec![cout, cin, k], dw).expect("conv1d dw shape"),
        Tensor::new(vec![cout], db).expect("conv1d db shape"),
    )
}

pub(crate) fn conv2d_forward<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    b: &Tensor<F>,
    stride: [usize; 2],
) -> Tensor<F> {
    let (cin, h, wth) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    let hout = (h - kh) / stride[0] + 1;
    let wout = (wth - kw) / stride[1] + 1;
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    let mut out = vec![F::zero(); cout * hout * wout];
    for co in 0..cout {
        let obase = co * hout * wout;
        for v in &mut out[obase..obase + hout * wout] {
            *v = bd[co];
        }
        for ci in 0..cin {
            let wbase = ((co * cin + ci) * kh) * kw;
            let xbase = ci * h * wth;
            for oy in 0..hout {
                let iy0 = oy * stride[0];
                for ox in 0..wout {
                    let ix0 = ox * stride[1];
                    let mut acc = F::zero();
                    for ky in 0..kh {
                        let xrow = xbase + (iy0 + ky) * wth + ix0;
                        let wrow = wbase + ky * kw;
                        for kx in 0..kw {
                            acc = acc + wd[wrow + kx] * xd[xrow + kx];
                        }
                    }
                    let o = obase + oy * wout + ox;
                    out[o] = out[o] + acc;
                }
            }
        }
    }
    Tensor::new(vec![cout, hout, wout], out).expect("conv2d output shape")
}

pub(crate) fn conv2d_backward<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    grad_out: &Tensor<F>,
    stride: [usize; 2],
) -> (Tensor<F>, Tensor<F>, Tensor<F>) {
    let (cin, h, wth) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (cout, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    let (hout, wout) = (grad_out.shape()[1], grad_out.shape()[2]);
    let xd = x.data();
    let wd = w.data();
    let gd = grad_out.data();
    let mut dx = vec![F::zero(); cin * h * wth];
    let mut dw = vec![F::zero(); cout * cin * kh * kw];
    let mut db = vec![F::zero(); cout];
    for co in 0..cout {
        let gbase = co * hout * wout;
        let mut bias_acc = F::zero();
        for &g in &gd[gbase..gbase + hout * wout] {
            bias_acc = bias_acc + g;
        }
        db[co] = bias_acc;
        for ci in 0..cin {
            let wbase = ((co * cin + ci) * kh) * kw;
            let xbase = ci * h * wth;
            for oy in 0..hout {
                let iy0 = oy * stride[0];
                for ox in 0..wout {
                    let g = gd[gbase + oy * wout + ox];
                    let ix0 = ox * stride[1];
                    for ky in 0..kh {
                        let xrow = xbase + (iy0 + ky) * wth + ix0;
                        let wrow = wbase + ky * kw;
                        for kx in 0..kw {
                            dw[wrow + kx] = dw[wrow + kx] + g * xd[xrow + kx];
                            dx[xrow + kx] = dx[xrow + kx] + g * wd[wrow + kx];
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::new(vec![cin, h, wth], dx).expect("conv2d dx shape"),
        Tensor::new(vec![cout, cin, kh, kw], dw).expect("conv2d dw shape"),
        Tensor::new(vec![cout], db).expect("conv2d db shape"),
    )
}

/// Max-pool forward; returns the output and the flat input index chosen for
/// each output element (ties take the first index, so pooling is
/// deterministic).
pub(crate) fn max_pool1d_forward<F: Scalar>(
    x: &Tensor<F>,
    kernel: usize,
    stride: usize,
) -> (Tensor<F>, Vec<usize>) {
    let (c, l) = (x.shape()[0], x.shape()[1]);
    let lout = (l - kernel) / stride + 1;
    let xd = x.data();
    let mut out = Vec::with_capacity(c * lout);
    let mut idx = Vec::with_capacity(c * lout);
    for ci in 0..c {
        let base = ci * l;
        for t in 0..lout {
            let start = base + t * stride;
            let mut best = start;
            for j in 1..kernel {
                if xd[start + j] > xd[best] {
                    best = start + j;
                }
            }
            out.push(xd[best]);
            idx.push(best);
        }
    }
    (
        Tensor::new(vec![c, lout], out).expect("max_pool1d output shape"),
        idx,
    )
}

pub(crate) fn max_pool2d_forward<F: Scalar>(
    x: &Tensor<F>,
    kernel: [usize; 2],
    stride: [usize; 2],
) -> (Tensor<F>, Vec<usize>) {
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let hout = (h - kernel[0]) / stride[0] + 1;
    let wout = (w - kernel[1]) / stride[1] + 1;
    let xd = x.data();
    let mut out = Vec::with_capacity(c * hout * wout);
    let mut idx = Vec::with_capacity(c * hout * wout);
    for ci in 0..c {
        let base = ci * h * w;
        for oy in 0..hout {
            for ox in 0..wout {
                let start = base + oy * stride[0] * w + ox * stride[1];
                let mut best = start;
                for ky in 0..kernel[0] {
                    for kx in 0..kernel[1] {
                        let p = start + ky * w + kx;
                        if xd[p] > xd[best] {
                            best = p;
                        }
                    }
                }
                out.push(xd[best]);
                idx.push(best);
            }
        }
    }
    (
        Tensor::new(vec![c, hout, wout], out).expect("max_pool2d output shape"),
        idx,
    )
}

pub(crate) fn max_pool_backward<F: Scalar>(
    input_shape: &[usize],
    chosen: &[usize],
    grad_out: &Tensor<F>,
) -> Tensor<F> {
    let n: usize = input_shape.iter().product();
    let mut dx = vec![F::zero(); n];
    for (&src, &g) in chosen.iter().zip(grad_out.data()) {
        dx[src] = dx[src] + g;
    }
    Tensor::new(input_shape.to_vec(), dx).expect("max_pool dx shape")
}

pub(crate) fn dense_forward<F: Scalar>(x: &Tensor<F>, w: &Tensor<F>, b: &Tensor<F>) -> Tensor<F> {
    let n = x.len();
    let m = w.shape()[0];
    let xd = x.data();
    let wd = w.data();
    let mut out = Vec::with_capacity(m);
    for (mi, &bias) in b.data().iter().enumerate() {
        let wrow = &wd[mi * n..(mi + 1) * n];
        let mut acc = bias;
        for j in 0..n {
            acc = acc + wrow[j] * xd[j];
        }
        out.push(acc);
    }
    Tensor::new(vec![m], out).expect("dense output shape")
}

pub(crate) fn dense_backward<F: Scalar>(
    x: &Tensor<F>,
    w: &Tensor<F>,
    grad_out: &Tensor<F>,
) -> (Tensor<F>, Tensor<F>, Tensor<F>) {
    let n = x.len();
    let m = w.shape()[0];
    let xd = x.data();
    let wd = w.data();
    let gd = grad_out.data();
    let mut dx = vec![F::zero(); n];
    let mut dw = vec![F::zero(); m * n];
    for mi in 0..m {
        let g = gd[mi];
        let wrow = &wd[mi * n..(mi + 1) * n];
        let dwrow = &mut dw[mi * n..(mi + 1) * n];
        for j in 0..n {
            dwrow[j] = g * xd[j];
            dx[j] = dx[j] + g * wrow[j];
        }
    }
    (
        Tensor::new(vec![n], dx).expect("dense dx shape"),
        Tensor::new(vec![m, n], dw).expect("dense dw shape"),
        Tensor::from_vec(gd.to_vec()),
    )
}

pub(crate) fn relu_forward<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    let data = x
        .data()
        .iter()
        .map(|&v| if v > F::zero() { v } else { F::zero() })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("relu output shape")
}

pub(crate) fn relu_backward<F: Scalar>(x: &Tensor<F>, grad_out: &Tensor<F>) -> Tensor<F> {
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > F::zero() { g } else { F::zero() })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("relu dx shape")
}

/// Softmax with max-subtraction so large logits stay finite.
pub(crate) fn softmax_forward<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    let xd = x.data();
    let mut max = xd[0];
    for &v in xd {
        if v > max {
            max = v;
        }
    }
    let mut exps: Vec<F> = xd.iter().map(|&v| (v - max).exp()).collect();
    let mut sum = F::zero();
    for &e in &exps {
        sum = sum + e;
    }
    for e in exps.iter_mut() {
        *e = *e / sum;
    }
    Tensor::new(x.shape().to_vec(), exps).expect("softmax output shape")
}

/// `dx = p * (g - <g, p>)` where `p` is the softmax output.
pub(crate) fn softmax_backward<F: Scalar>(p: &Tensor<F>, grad_out: &Tensor<F>) -> Tensor<F> {
    let pd = p.data();
    let gd = grad_out.data();
    let mut dot = F::zero();
    for (&pi, &gi) in pd.iter().zip(gd) {
        dot = dot + pi * gi;
    }
    let data = pd
        .iter()
        .zip(gd)
        .map(|(&pi, &gi)| pi * (gi - dot))
        .collect();
    Tensor::new(p.shape().to_vec(), data).expect("softmax dx shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn conv_out_arithmetic() {
        assert_eq!(conv_out(220500, 64, 8).unwrap(), 27555);
        assert_eq!(conv_out(10, 3, 1).unwrap(), 8);
        assert_eq!(conv_out(10, 10, 1).unwrap(), 1);
        assert!(conv_out(5, 6, 1).is_err());
        assert!(conv_out(5, 2, 0).is_err());
    }

    #[test]
    fn non_overlapping_pool_constructor() {
        match LayerSpec::max_pool1d(4) {
            LayerSpec::MaxPool1d { kernel, stride } => {
                assert_eq!(kernel, 4);
                assert_eq!(stride, 4);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn dense_matches_hand_arithmetic() {
        let x = Tensor::from_vec(vec![1.0f64, 2.0]);
        let w = Tensor::new(vec![2, 2], vec![1.0, -1.0, 0.5, 0.25]).unwrap();
        let b = Tensor::from_vec(vec![0.5, -0.5]);
        let y = dense_forward(&x, &w, &b);
        assert_eq!(y.data(), &[1.0 - 2.0 + 0.5, 0.5 + 0.5 - 0.5]);
    }

    #[test]
    fn pool_tie_takes_first_index() {
        let x = Tensor::new(vec![1, 4], vec![1.0f32, 1.0, 0.0, 1.0]).unwrap();
        let (out, idx) = max_pool1d_forward(&x, 2, 2);
        assert_eq!(out.data(), &[1.0, 1.0]);
        assert_eq!(idx, vec![0, 3]);
    }

    #[test]
    fn pool_kernel_one_is_identity() {
        let x = Tensor::new(vec![2, 3], vec![3.0f64, -1.0, 2.0, 0.0, 5.0, -2.0]).unwrap();
        let (out, _) = max_pool1d_forward(&x, 1, 1);
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn softmax_uniform_on_equal_logits() {
        let x = Tensor::from_vec(vec![0.0f64; 5]);
        let p = softmax_forward(&x);
        for &v in p.data() {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_stable_for_large_logits() {
        let x = Tensor::from_vec(vec![1e4f64, -1e4, 0.0]);
        let p = softmax_forward(&x);
        assert!(p.all_finite());
        let sum: f64 = p.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }
}
