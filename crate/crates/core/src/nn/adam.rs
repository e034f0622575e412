use super::params::GradientSet;
use crate::error::{Error, Result};

/// Adam with coupled (L2-style) weight decay: the decay term is added to the
/// gradient before the moment updates and applies to every parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &GradientSet) -> Result<()> {
        if params.len() != grads.slots.len() {
            return Err(Error::shape("adam step", (params.len(), 0), (grads.slots.len(), 0)));
        }
        for (p, g) in params.iter().zip(&grads.slots) {
            if p.len() != g.len() {
                return Err(Error::shape("adam step", (p.len(), 1), (g.len(), 1)));
            }
        }
        if self.m.is_empty() {
            self.m = grads.slots.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.iter().map(Vec::len).ne(grads.slots.iter().map(Vec::len)) {
            return Err(Error::Training("adam state does not match parameter layout".into()));
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((param, grad), m), v) in params
            .into_iter()
            .zip(&grads.slots)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..param.len() {
                let g = grad[i] + self.weight_decay * param[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
