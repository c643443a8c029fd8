/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self::with_betas(num_params, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(num_params: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step_count: 0,
            first: vec![0.0; num_params],
            second: vec![0.0; num_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.first, &self.second)
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.first.len(), "adam: parameter count");
        assert_eq!(grads.len(), self.first.len(), "adam: gradient count");
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * g;
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first[i] / c1;
            let v_hat = self.second[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = AdamState::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 3.0];
        adam.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut adam = AdamState::new(2, 0.0);
        let mut p = vec![0.25, -0.75];
        for _ in 0..5 {
            adam.step(&mut p, &[3.0, -1.0]);
        }
        assert_eq!(p, vec![0.25, -0.75]);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let lr = 0.01;
        let g = [0.5, -2.0, 1e-9];
        let mut adam = AdamState::new(3, lr);
        let mut p = vec![0.0; 3];
        adam.step(&mut p, &g);
        for i in 0..3 {
            let want = -lr * g[i] / (g[i].abs() + 1e-8);
            assert!((p[i] - want).abs() < 1e-15, "{} vs {want}", p[i]);
        }
    }

    #[test]
    fn two_steps_match_reference_trace() {
        let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
        let g1 = [0.3, -0.4];
        let g2 = [0.1, 0.2];
        let mut adam = AdamState::with_betas(2, lr, b1, b2, eps);
        let mut p = vec![1.0, 1.0];
        adam.step(&mut p, &g1);
        adam.step(&mut p, &g2);
        for i in 0..2 {
            let mut q = 1.0;
            let m1 = (1.0 - b1) * g1[i];
            let v1 = (1.0 - b2) * g1[i] * g1[i];
            q -= lr * (m1 / (1.0 - b1)) / ((v1 / (1.0 - b2)).sqrt() + eps);
            let m2 = b1 * m1 + (1.0 - b1) * g2[i];
            let v2 = b2 * v1 + (1.0 - b2) * g2[i] * g2[i];
            q -= lr * (m2 / (1.0 - b1 * b1)) / ((v2 / (1.0 - b2 * b2)).sqrt() + eps);
            assert!((p[i] - q).abs() < 1e-15);
        }
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = vec![3.0, 4.0];
        let n = clip_global_norm(&mut g, 1.0);
        assert_eq!(n, 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }
}
