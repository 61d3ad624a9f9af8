pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment accumulators, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One bias-corrected Adam update; `step` counts from 1.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, learning_rate: f64, step: u32) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    assert!(step >= 1, "Adam steps count from 1");
    let bc1 = 1.0 - ADAM_BETA1.powi(step as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState {
            m: vec![0.5, -0.5],
            v: vec![0.25, 0.25],
        };
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1, 3);
        assert_ne!(p, vec![1.0, -2.0]); // nonzero momentum still moves
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1, 1);
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s, AdamState::new(2));

        let mut s = AdamState {
            m: vec![0.5],
            v: vec![0.25],
        };
        let mut q = vec![0.0];
        adam_step(&mut q, &[0.0], &mut s, 0.0, 2);
        assert_eq!(s.m[0], 0.45);
        assert!((s.v[0] - 0.24975).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps)
        let g = [3.0, -0.02, 1e-3];
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &g, &mut s, 0.01, 1);
        for (pi, gi) in p.iter().zip(g) {
            let want = -0.01 * gi / (gi.abs() + ADAM_EPSILON);
            assert!((pi - want).abs() < 1e-15, "{pi} vs {want}");
        }
    }

    #[test]
    fn constant_gradient_converges_to_learning_rate_steps() {
        let lr = 0.05;
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let mut last = 0.0;
        for step in 1..=5000 {
            let before = p[0];
            adam_step(&mut p, &[0.7], &mut s, lr, step);
            last = before - p[0];
        }
        assert!((last - lr).abs() < 1e-6, "step size {last}");
    }
}
