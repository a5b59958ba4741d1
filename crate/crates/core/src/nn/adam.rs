//! Adaptive-moment optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, param_len: usize) -> Self {
        OptimizerState {
            config,
            first_moment: vec![0.0; param_len],
            second_moment: vec![0.0; param_len],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One in-place parameter update.
pub fn adam_step(
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
) -> Result<(), NnError> {
    if params.len() != state.first_moment.len() || grads.len() != params.len() {
        return Err(NnError::ShapeMismatch {
            expected: state.first_moment.len(),
            got: params.len().min(grads.len()),
        });
    }
    state.step += 1;
    let c = state.config;
    let bc1 = 1.0 - c.beta1.powi(state.step as i32);
    let bc2 = 1.0 - c.beta2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        let m = &mut state.first_moment[i];
        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
        let v = &mut state.second_moment[i];
        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        params[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
    }
    Ok(())
}
