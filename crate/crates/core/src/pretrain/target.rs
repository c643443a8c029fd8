use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, WeightedIndex};

use crate::error::{Error, Result};
use crate::numkit::DenseArray;

/// Gaussian component with a precomputed Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mean: Vec<f64>,
    /// Row-major `d x d` covariance.
    pub cov: Vec<f64>,
    chol: Vec<f64>,
}

impl Component {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.len() != d * d {
            return Err(Error::InvalidArgument(format!(
                "component needs a d x d covariance for d = {d}, got {} entries",
                cov.len()
            )));
        }
        let m = DMatrix::from_row_slice(d, d, &cov);
        if (&m - m.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidArgument("covariance must be symmetric".into()));
        }
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("covariance must be positive definite".into()))?;
        let l = chol.l();
        let chol = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| l[(i, j)]).collect();
        Ok(Self { mean, cov, chol })
    }

    /// Isotropic component `N(mean, std^2 I)`.
    pub fn isotropic(mean: Vec<f64>, std: f64) -> Result<Self> {
        let d = mean.len();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = std * std;
        }
        Self::new(mean, cov)
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for i in 0..d {
            let lz: f64 = (0..=i).map(|j| self.chol[i * d + j] * z[j]).sum();
            out.push(self.mean[i] + lz);
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        let m = DMatrix::from_row_slice(d, d, &self.cov);
        let diff = DVector::from_iterator(d, x.iter().zip(&self.mean).map(|(a, b)| a - b));
        let chol = m.cholesky().expect("validated at construction");
        let sol = chol.solve(&diff);
        let logdet: f64 = (0..d).map(|i| self.chol[i * d + i].ln()).sum::<f64>() * 2.0;
        -0.5 * (diff.dot(&sol) + logdet + d as f64 * (2.0 * std::f64::consts::PI).ln())
    }
}

/// Synthetic pretraining targets.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetDistribution {
    Gaussian(Component),
    Mixture { weights: Vec<f64>, components: Vec<Component> },
    /// Uniform angle, radius `N(radius, thickness^2)`, in the plane.
    Ring { center: Vec<f64>, radius: f64, thickness: f64 },
}

impl TargetDistribution {
    pub fn gaussian(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        Ok(Self::Gaussian(Component::new(mean, cov)?))
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidArgument("mixture needs one weight per component".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("mixture weights must be >= 0 and sum to 1: {weights:?}")));
        }
        let d = components[0].mean.len();
        if components.iter().any(|c| c.mean.len() != d) {
            return Err(Error::InvalidArgument("mixture components differ in dimension".into()));
        }
        Ok(Self::Mixture { weights, components })
    }

    pub fn ring(center: Vec<f64>, radius: f64, thickness: f64) -> Result<Self> {
        if center.len() != 2 || !(radius > 0.0) || !(thickness > 0.0) {
            return Err(Error::InvalidArgument("ring needs a 2D center and positive radius and thickness".into()));
        }
        Ok(Self::Ring {
            center,
            radius,
            thickness,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(c) => c.mean.len(),
            Self::Mixture { components, .. } => components[0].mean.len(),
            Self::Ring { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian(_) => "gaussian",
            Self::Mixture { .. } => "gaussian_mixture",
            Self::Ring { .. } => "ring",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DenseArray {
        let d = self.dim();
        let mut out = Vec::with_capacity(n * d);
        match self {
            Self::Gaussian(c) => (0..n).for_each(|_| c.sample_into(rng, &mut out)),
            Self::Mixture { weights, components } => {
                let pick = WeightedIndex::new(weights).expect("validated weights");
                for _ in 0..n {
                    components[pick.sample(rng)].sample_into(rng, &mut out);
                }
            }
            Self::Ring {
                center,
                radius,
                thickness,
            } => {
                for _ in 0..n {
                    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                    let z: f64 = StandardNormal.sample(rng);
                    let r = radius + thickness * z;
                    out.push(center[0] + r * angle.cos());
                    out.push(center[1] + r * angle.sin());
                }
            }
        }
        DenseArray::from_vec(&[n, d], out).expect("n > 0 rows of width d")
    }

    /// Index of the mixture component with the highest responsibility.
    pub fn assign(&self, x: &[f64]) -> usize {
        match self {
            Self::Mixture { weights, components } => {
                let mut best = (0, f64::NEG_INFINITY);
                for (k, (w, c)) in weights.iter().zip(components).enumerate() {
                    let s = w.ln() + c.log_density(x);
                    if s > best.1 {
                        best = (k, s);
                    }
                }
                best.0
            }
            _ => 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::rng_from_seed;

    #[test]
    fn rejects_invalid_parameters() {
        assert!(Component::new(vec![0.0, 0.0], vec![1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(Component::new(vec![0.0, 0.0], vec![1.0, 0.5, 0.4, 1.0]).is_err());
        let c = Component::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert!(TargetDistribution::mixture(vec![0.6, 0.6], vec![c.clone(), c]).is_err());
        assert!(TargetDistribution::ring(vec![0.0, 0.0], -1.0, 0.1).is_err());
    }

    #[test]
    fn correlated_gaussian_has_requested_covariance() {
        let t = TargetDistribution::gaussian(vec![1.0, -1.0], vec![2.0, 0.6, 0.6, 0.5]).unwrap();
        let x = t.sample(200_000, &mut rng_from_seed(0));
        let cov = x.covariance();
        let mean = x.column_means();
        assert!((mean[0] - 1.0).abs() < 0.02 && (mean[1] + 1.0).abs() < 0.01);
        assert!((cov[0][0] - 2.0).abs() < 0.03);
        assert!((cov[0][1] - 0.6).abs() < 0.02);
        assert!((cov[1][1] - 0.5).abs() < 0.01);
    }

    #[test]
    fn log_density_of_standard_normal() {
        let c = Component::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        let want = -(2.0 * std::f64::consts::PI).ln() - 0.5 * (1.0 + 4.0);
        assert!((c.log_density(&[1.0, 2.0]) - want).abs() < 1e-12);
    }

    #[test]
    fn ring_radius() {
        let t = TargetDistribution::ring(vec![1.0, 0.0], 2.0, 0.05).unwrap();
        let x = t.sample(5000, &mut rng_from_seed(1));
        let mean_r: f64 = x.iter_rows().map(|r| ((r[0] - 1.0).powi(2) + r[1].powi(2)).sqrt()).sum::<f64>() / 5000.0;
        assert!((mean_r - 2.0).abs() < 0.01);
    }
}
