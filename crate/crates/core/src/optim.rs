//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    /// `lr = 1e-3`, `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`.
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter list, in the list's order.
///
/// The stored moments are already bias-corrected (`m̂`, `v̂`). They follow
///
/// ```text
/// m̂_t = m̂_{t-1} + (1-β1)/(1-β1^t) · (g - m̂_{t-1})
/// v̂_t = v̂_{t-1} + (1-β2)/(1-β2^t) · (g² - v̂_{t-1})
/// ```
///
/// which equals `m_t / (1-β1^t)` for the usual `m_t = β1 m_{t-1} + (1-β1) g`
/// (and likewise for `v`). At `t = 1` the coefficient is exactly 1, so
/// `m̂ = g` and `v̂ = g²` hold bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    /// Completed steps.
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    /// Zeroed moments for parameters of the given shapes.
    pub fn new<'a>(config: AdamConfig, shapes: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let m: Vec<Tensor> = shapes.into_iter().map(Tensor::zeros).collect();
        Adam {
            config,
            t: 0,
            v: m.clone(),
            m,
        }
    }

    /// Rebuild from saved state; moment lists must have matching shapes.
    pub fn from_state(config: AdamConfig, t: u64, m: Vec<Tensor>, v: Vec<Tensor>) -> Result<Self> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::Config("first and second moments disagree in shape".into()));
        }
        Ok(Adam { config, t, m, v })
    }

    /// Bias-corrected first and second moments.
    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    /// One update of every parameter.
    ///
    /// Gradients are checked for NaN/Inf before anything is modified; the
    /// error names the offending parameter and flat index.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], names: &[String]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} parameters, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            let name = names.get(k).map_or("?", String::as_str);
            if p.shape() != g.shape() || p.shape() != self.m[k].shape() {
                return Err(Error::Config(format!(
                    "parameter {name}: shape {:?}, gradient {:?}, state {:?}",
                    p.shape(),
                    g.shape(),
                    self.m[k].shape()
                )));
            }
            if let Some(i) = g.data().iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient {} in {name} at index {i}",
                    g.data()[i]
                )));
            }
        }

        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let r1 = (1.0 - beta1) / (1.0 - beta1.powi(t));
        let r2 = (1.0 - beta2) / (1.0 - beta2.powi(t));
        for (k, p) in params.iter_mut().enumerate() {
            let g = grads[k].data();
            let m = self.m[k].data_mut();
            let v = self.v[k].data_mut();
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                m[i] += r1 * (g[i] - m[i]);
                v[i] += r2 * (g[i] * g[i] - v[i]);
                *w -= lr * m[i] / (v[i].sqrt() + eps);
            }
        }
        Ok(())
    }
}
