//! Adam optimizer with bias-corrected moment estimates.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Optimizer state: one pair of moment buffers per parameter, allocated on
/// the first step. The step counter is shared across parameters.
pub struct AdamState<T: Scalar> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over a fixed parameter list. The list must keep the same
    /// order and shapes across calls; every parameter must carry a gradient.
    pub fn step(&mut self, params: &[Tensor<T>]) -> Result<()> {
        if self.lr <= 0.0 && self.lr != 0.0 {
            return Err(Error::invalid_argument("adam learning rate must be >= 0"));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.numel()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::invalid_argument(format!(
                "adam state holds {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.step += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let lr = T::from_f64(self.lr);
        let eps = T::from_f64(self.eps);
        let one = T::one();
        let bc1 = one - T::from_f64(self.beta1.powi(self.step as i32));
        let bc2 = one - T::from_f64(self.beta2.powi(self.step as i32));
        for (i, p) in params.iter().enumerate() {
            let grad = p
                .grad()
                .ok_or_else(|| Error::MissingGradient(format!("#{i}")))?;
            if grad.len() != p.numel() {
                return Err(Error::invalid_argument(format!(
                    "gradient length mismatch for parameter #{i}"
                )));
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let mut data = p.data_mut();
            for j in 0..grad.len() {
                let g = grad[j];
                m[j] = b1 * m[j] + (one - b1) * g;
                v[j] = b2 * v[j] + (one - b2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                data[j] = data[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
