use super::net::{NetShape, PolicyParams};
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;
pub const LEARNING_RATE: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(shape: NetShape) -> Self {
        Self::with_lr(shape, LEARNING_RATE)
    }

    pub fn with_lr(shape: NetShape, lr: f64) -> Self {
        let n = shape.num_params();
        AdamState { m: vec![0.0; n], v: vec![0.0; n], step_count: 0, lr }
    }

    /// One bias-corrected Adam step in the ascent direction of `grad`.
    /// Nothing is modified if `grad` has a non-finite entry.
    pub fn update(&mut self, params: &mut PolicyParams, grad: &PolicyParams) -> Result<()> {
        if grad.shape() != params.shape() || self.m.len() != params.as_slice().len() {
            return Err(Error::Shape("gradient, parameters and optimizer state differ".into()));
        }
        if !grad.is_finite() {
            return Err(Error::NonFiniteGradient { iteration: self.step_count + 1 });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let g = grad.as_slice();
        for (i, theta) in params.as_mut_slice().iter_mut().enumerate() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            *theta += self.lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
        Ok(())
    }
}
