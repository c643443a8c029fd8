use crate::error::{Error, Result};

/// Time grid and noise coefficients for the linear path
/// `X_t = t X_1 + (1 - t) X_0` with a standard normal source.
///
/// The stochastic sampler uses the drift `(1 + t k(t)) v - k(t) x` with
/// `k(t) = sigma0^2 / max(t, t_min)` and diffusion `sigma(t)^2 = 2 (1 - t) k(t)`.
/// For any `k` this keeps the flow's marginals; `sigma0 = 1` gives the
/// memoryless schedule, where the drift is `2v - x / t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    steps: usize,
    sigma0: f64,
    t_min: f64,
}

impl NoiseSchedule {
    /// Noise scale `sigma0` on a uniform grid of `steps` Euler steps. The drift
    /// coefficient is clamped below `t_min = h`.
    pub fn memoryless(steps: usize, sigma0: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("schedule needs at least one step".into()));
        }
        if !(sigma0.is_finite() && sigma0 >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma0 must be finite and >= 0, got {sigma0}")));
        }
        Ok(Self {
            steps,
            sigma0,
            t_min: 1.0 / steps as f64,
        })
    }

    /// No noise and no state contraction: the sampler reduces to Euler on the flow ODE.
    pub fn deterministic(steps: usize) -> Result<Self> {
        Self::memoryless(steps, 0.0)
    }

    pub fn with_t_min(mut self, t_min: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_min < 1.0) {
            return Err(Error::InvalidArgument(format!("t_min must lie in (0, 1), got {t_min}")));
        }
        self.t_min = t_min;
        Ok(self)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn h(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// Grid point `i / T`; exactly 1 at `i = T`.
    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.steps as f64
    }

    /// Signal coefficient of the linear path.
    pub fn abar(&self, t: f64) -> f64 {
        t
    }

    /// Coefficient multiplying `x` in the drift.
    pub fn drift_coeff(&self, t: f64) -> f64 {
        self.sigma0 * self.sigma0 / t.max(self.t_min)
    }

    /// Coefficient multiplying the velocity in the drift.
    pub fn velocity_coeff(&self, t: f64) -> f64 {
        1.0 + t * self.drift_coeff(t)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        (2.0 * (1.0 - t).max(0.0) * self.drift_coeff(t)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ends_at_one() {
        for steps in [1, 3, 7, 100, 400] {
            let s = NoiseSchedule::memoryless(steps, 1.0).unwrap();
            assert_eq!(s.time(steps), 1.0);
            assert_eq!(s.h() * steps as f64, 1.0);
            assert!((s.abar(1.0) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn memoryless_coefficients() {
        let s = NoiseSchedule::memoryless(100, 1.0).unwrap();
        let t = 0.25;
        assert!((s.drift_coeff(t) - 4.0).abs() < 1e-15);
        assert!((s.velocity_coeff(t) - 2.0).abs() < 1e-15);
        assert!((s.sigma(t) - (2.0 * 0.75 / 0.25f64).sqrt()).abs() < 1e-15);
        assert!(s.sigma(1.0 - 1e-9) > 0.0);
        assert_eq!(s.sigma(1.0), 0.0);
        // Clamped below t_min.
        assert_eq!(s.drift_coeff(0.0), 100.0);
    }

    #[test]
    fn deterministic_schedule_is_plain_flow() {
        let s = NoiseSchedule::deterministic(10).unwrap();
        for i in 0..10 {
            let t = s.time(i);
            assert_eq!(s.sigma(t), 0.0);
            assert_eq!(s.drift_coeff(t), 0.0);
            assert_eq!(s.velocity_coeff(t), 1.0);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(NoiseSchedule::memoryless(0, 1.0).is_err());
        assert!(NoiseSchedule::memoryless(10, -1.0).is_err());
        assert!(NoiseSchedule::memoryless(10, 1.0).unwrap().with_t_min(0.0).is_err());
    }
}
