//! Adam optimizer over flat parameter vectors.

#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(dim: usize, alpha: f64) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update with bias correction. The step counter is incremented
/// before the correction terms are formed.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    for i in 0..params.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.alpha * m_hat / (v_hat.sqrt() + state.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent scripted implementation of the published Adam recurrence,
    /// kept deliberately separate from `adam_step`.
    fn scripted_adam(
        theta0: f64,
        grads: &[f64],
        alpha: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> f64 {
        let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
        for (k, &g) in grads.iter().enumerate() {
            let t = (k + 1) as f64;
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g * g;
            let m_hat = m / (1.0 - beta1.powf(t));
            let v_hat = v / (1.0 - beta2.powf(t));
            theta -= alpha * m_hat / (v_hat.sqrt() + eps);
        }
        theta
    }

    #[test]
    fn first_step_delta() {
        // step 1, g = 1: m_hat = 1, v_hat = 1 -> delta = -alpha / (1 + eps)
        let mut p = vec![0.0];
        let mut st = AdamState::new(1, 0.001);
        adam_step(&mut p, &[1.0], &mut st);
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15, "{} vs {expected}", p[0]);
        assert!((p[0] + 0.000999999).abs() < 1e-8);
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = vec![1.5, -2.0, 0.25];
        let orig = p.clone();
        let mut st = AdamState::new(3, 0.01);
        // even with warm moment buffers the update is exactly zero
        st.m = vec![0.0; 3];
        st.v = vec![0.0; 3];
        for _ in 0..5 {
            adam_step(&mut p, &[0.0, 0.0, 0.0], &mut st);
        }
        assert_eq!(p, orig);
    }

    #[test]
    fn matches_scripted_recurrence() {
        let mut p = vec![0.3];
        let mut st = AdamState::new(1, 0.001);
        adam_step(&mut p, &[1.0], &mut st);
        adam_step(&mut p, &[1.0], &mut st);
        let oracle = scripted_adam(0.3, &[1.0, 1.0], 0.001, 0.9, 0.999, 1e-8);
        assert!((p[0] - oracle).abs() < 1e-12);

        // longer run with varying gradients
        let grads = [0.5, -1.2, 0.8, 0.0, 2.5, -0.1];
        let mut p = vec![-0.7];
        let mut st = AdamState::new(1, 0.05);
        for &g in &grads {
            adam_step(&mut p, &[g], &mut st);
        }
        let oracle = scripted_adam(-0.7, &grads, 0.05, 0.9, 0.999, 1e-8);
        assert!((p[0] - oracle).abs() < 1e-12);
    }
}
