//! Adaptive-moment optimizer with bias correction.

use super::tensor::Tensor;

/// Optimizer state for a fixed, ordered list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(learning_rate: f64, param_sizes: &[usize]) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(learning_rate: f64, params: &[&Tensor]) -> Self {
        let sizes: Vec<usize> = params.iter().map(|t| t.numel()).collect();
        Self::new(learning_rate, &sizes)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One bias-corrected update over `params`, consuming their gradients.
///
/// Gradients must be populated (a missing gradient is a contract violation);
/// they are left in place afterwards, so callers zero them between updates.
pub fn adam_step(params: &mut [&mut Tensor], state: &mut AdamState) {
    assert_eq!(
        params.len(),
        state.first_moment.len(),
        "parameter list does not match optimizer state"
    );
    state.step_count += 1;
    let t = state.step_count;
    let bc1 = 1.0 - state.beta1.powi(t as i32);
    let bc2 = 1.0 - state.beta2.powi(t as i32);
    for (pi, param) in params.iter_mut().enumerate() {
        let grad = param
            .grad()
            .expect("adam_step: parameter has no gradient")
            .to_vec();
        let m = &mut state.first_moment[pi];
        let v = &mut state.second_moment[pi];
        assert_eq!(grad.len(), m.len(), "moment shape mismatch");
        let data = param.data_mut();
        for i in 0..grad.len() {
            let g = grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            data[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
}
