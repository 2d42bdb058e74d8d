//! SGD and Adam parameter updates.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::nn::graph::LayerParams;
use crate::nn::NnError;
use crate::tensor::Scalar;

fn check_match<F: Scalar>(
    params: &[Option<LayerParams<F>>],
    grads: &[Option<LayerParams<F>>],
) -> Result<(), NnError> {
    if params.len() != grads.len() {
        return Err(NnError::ParamMismatch {
            index: 0,
            detail: "different layer counts".to_string(),
        });
    }
    for (index, (p, g)) in params.iter().zip(grads).enumerate() {
        match (p, g) {
            (None, None) => {}
            (Some(p), Some(g)) => {
                if p.weight.shape() != g.weight.shape() || p.bias.shape() != g.bias.shape() {
                    return Err(NnError::ParamMismatch {
                        index,
                        detail: "tensor shapes differ".to_string(),
                    });
                }
            }
            _ => {
                return Err(NnError::ParamMismatch {
                    index,
                    detail: "parameter presence differs".to_string(),
                })
            }
        }
    }
    Ok(())
}

/// Plain stochastic gradient descent: `p <- p - lr * g`.
#[derive(Clone, Debug)]
pub struct Sgd<F> {
    pub lr: F,
}

impl<F: Scalar> Sgd<F> {
    pub fn new(lr: F) -> Self {
        Self { lr }
    }

    pub fn step(
        &mut self,
        params: &mut [Option<LayerParams<F>>],
        grads: &[Option<LayerParams<F>>],
    ) -> Result<(), NnError> {
        check_match(params, grads)?;
        for (p, g) in params.iter_mut().zip(grads) {
            if let (Some(p), Some(g)) = (p.as_mut(), g.as_ref()) {
                for (w, &gw) in p.weight.data_mut().iter_mut().zip(g.weight.data()) {
                    *w = *w - self.lr * gw;
                }
                for (b, &gb) in p.bias.data_mut().iter_mut().zip(g.bias.data()) {
                    *b = *b - self.lr * gb;
                }
            }
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
    t: u64,
    m: Vec<Option<LayerParams<F>>>,
    v: Vec<Option<LayerParams<F>>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(lr: F) -> Self {
        Self {
            lr,
            beta1: F::from_f64(0.9),
            beta2: F::from_f64(0.999),
            epsilon: F::from_f64(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    fn zeros_like(grads: &[Option<LayerParams<F>>]) -> Vec<Option<LayerParams<F>>> {
        grads
            .iter()
            .map(|g| {
                g.as_ref().map(|g| LayerParams {
                    weight: crate::tensor::Tensor::zeros(g.weight.shape()),
                    bias: crate::tensor::Tensor::zeros(g.bias.shape()),
                })
            })
            .collect()
    }

    pub fn step(
        &mut self,
        params: &mut [Option<LayerParams<F>>],
        grads: &[Option<LayerParams<F>>],
    ) -> Result<(), NnError> {
        check_match(params, grads)?;
        if self.m.is_empty() {
            self.m = Self::zeros_like(grads);
            self.v = Self::zeros_like(grads);
        }
        check_match(&self.m, grads)?;
        self.t += 1;
        let t = F::from_f64(self.t as f64);
        let one = F::one();
        let bc1 = one - self.beta1.powf(t);
        let bc2 = one - self.beta2.powf(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let (Some(p), Some(g)) = (p.as_mut(), g.as_ref()) else {
                continue;
            };
            let (m, v) = (m.as_mut().expect("state matches"), v.as_mut().expect("state matches"));
            let update = |pv: &mut [F], gv: &[F], mv: &mut [F], vv: &mut [F]| {
                for i in 0..pv.len() {
                    mv[i] = self.beta1 * mv[i] + (one - self.beta1) * gv[i];
                    vv[i] = self.beta2 * vv[i] + (one - self.beta2) * gv[i] * gv[i];
                    let m_hat = mv[i] / bc1;
                    let v_hat = vv[i] / bc2;
                    pv[i] = pv[i] - self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
                }
            };
            update(
                p.weight.data_mut(),
                g.weight.data(),
                m.weight.data_mut(),
                v.weight.data_mut(),
            );
            update(
                p.bias.data_mut(),
                g.bias.data(),
                m.bias.data_mut(),
                v.bias.data_mut(),
            );
        }
        Ok(())
    }
}
