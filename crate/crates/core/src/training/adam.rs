//! Adam updates for the TDV parameters, with bias-corrected moments.

use crate::tdvmodel::TdvParams;

/// First/second moment estimates for `(w, bias)` plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: f64,
    v_b: f64,
    step: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m_w: vec![0.0; dim],
            v_w: vec![0.0; dim],
            m_b: 0.0,
            v_b: 0.0,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update. `params` and `state` are advanced in place.
pub fn adam_step(
    params: &mut TdvParams,
    grad_w: &[f64],
    grad_b: f64,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    assert_eq!(grad_w.len(), params.w.len(), "gradient shape mismatch");
    assert_eq!(state.m_w.len(), params.w.len(), "state shape mismatch");
    state.step += 1;
    let t = state.step as i32;
    let corr1 = 1.0 - beta1.powi(t);
    let corr2 = 1.0 - beta2.powi(t);

    for i in 0..params.w.len() {
        let g = grad_w[i];
        state.m_w[i] = beta1 * state.m_w[i] + (1.0 - beta1) * g;
        state.v_w[i] = beta2 * state.v_w[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m_w[i] / corr1;
        let v_hat = state.v_w[i] / corr2;
        params.w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    state.m_b = beta1 * state.m_b + (1.0 - beta1) * grad_b;
    state.v_b = beta2 * state.v_b + (1.0 - beta2) * grad_b * grad_b;
    let m_hat = state.m_b / corr1;
    let v_hat = state.v_b / corr2;
    params.bias -= lr * m_hat / (v_hat.sqrt() + eps);
}
