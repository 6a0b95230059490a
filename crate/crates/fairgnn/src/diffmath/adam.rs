//! Adam with bias correction. Weight decay, when enabled, is classic L2
//! regularization folded into the gradient.

use crate::diffmath::Tensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> AdamConfig {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b.is_finite() && (0.0..1.0).contains(&b)) {
                return Err(Error::Config(format!("{} must lie in [0, 1), got {}", name, b)));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// First/second moment buffers for one parameter group. Buffers are created
/// on the first step and must keep the same shapes afterwards.
pub struct AdamState {
    cfg: AdamConfig,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig) -> Result<AdamState> {
        cfg.validate()?;
        Ok(AdamState {
            cfg,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update over a fixed parameter order. `grads[i]` of `None` is a
    /// zero gradient: moments still decay, so only a fresh state guarantees
    /// the parameter stays put.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Option<Tensor>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Invalid(format!(
                "optimizer got {} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() {
            return Err(Error::Invalid(format!(
                "optimizer state tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if self.m[i].shape() != p.shape() {
                return Err(Error::Invalid(format!(
                    "parameter {} changed shape from {:?} to {:?}",
                    i,
                    self.m[i].shape(),
                    p.shape()
                )));
            }
            if let Some(g) = g {
                if g.shape() != p.shape() {
                    return Err(Error::Shape {
                        op: "adam_step",
                        detail: format!(
                            "parameter {} is {:?} but gradient is {:?}",
                            i,
                            p.shape(),
                            g.shape()
                        ),
                    });
                }
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps, weight_decay } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, pk) in p.data_mut().iter_mut().enumerate() {
                let mut gk = g.as_ref().map_or(0.0, |t| t.data()[k]);
                if weight_decay > 0.0 {
                    gk += weight_decay * *pk;
                }
                m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
                v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                let next = *pk - lr * m_hat / (v_hat.sqrt() + eps);
                if !next.is_finite() {
                    return Err(Error::NonFinite { op: "adam_step" });
                }
                *pk = next;
            }
        }
        Ok(())
    }
}
