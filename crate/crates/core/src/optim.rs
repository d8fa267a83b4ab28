//! AdaBelief with decoupled weight decay.
//!
//! Per scalar parameter, with step `t` incremented before the update:
//!
//! ```text
//! m = b0 m + (1 - b0) g
//! s = b1 s + (1 - b1) (g - m)^2 + eps
//! m_hat = m / (1 - b0^t),  s_hat = s / (1 - b1^t)
//! theta = theta - lr * wd * theta - lr * m_hat / (sqrt(s_hat) + eps)
//! ```

use crate::autodiff::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaBeliefConfig {
    pub lr: f64,
    pub eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
}

impl Default for AdaBeliefConfig {
    fn default() -> Self {
        AdaBeliefConfig { lr: 1e-3, eps: 1e-16, beta1: 0.9, beta2: 0.999, weight_decay: 1e-4 }
    }
}

impl AdaBeliefConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.eps > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::BadParameter(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// First moment and belief (second) moment for every parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<S = f32> {
    pub m: Vec<Tensor<S>>,
    pub s: Vec<Tensor<S>>,
    pub step: u64,
}

impl<S: Real> OptimizerState<S> {
    pub fn new(params: &[Tensor<S>]) -> Self {
        OptimizerState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            s: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }
}

/// Applies one update in place.
pub fn adabelief_step<S: Real>(
    params: &mut [Tensor<S>],
    grads: &[Tensor<S>],
    state: &mut OptimizerState<S>,
    cfg: &AdaBeliefConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::ShapeMismatch(format!("tensor {i}: {:?} vs {:?}", p.shape(), g.shape())));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let s = state.s[i].data_mut();
        for (j, (theta, &grad)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            let grad = grad.as_f64();
            let mj = cfg.beta1 * m[j].as_f64() + (1.0 - cfg.beta1) * grad;
            let diff = grad - mj;
            let sj = cfg.beta2 * s[j].as_f64() + (1.0 - cfg.beta2) * diff * diff + cfg.eps;
            let m_hat = mj / bias1;
            let s_hat = sj / bias2;
            let th = theta.as_f64();
            let next = th - cfg.lr * cfg.weight_decay * th - cfg.lr * m_hat / (s_hat.sqrt() + cfg.eps);
            m[j] = S::from_f64_lossy(mj);
            s[j] = S::from_f64_lossy(sj);
            *theta = S::from_f64_lossy(next);
        }
    }
    Ok(())
}
