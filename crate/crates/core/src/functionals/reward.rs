use rayon::prelude::*;

use crate::numkit::{dot, DenseArray};

/// Scalar function on `R^d` with an analytic gradient.
pub trait Reward: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

pub fn reward_values(r: &dyn Reward, x: &DenseArray) -> Vec<f64> {
    let d = r.dim();
    x.data().par_chunks(d).map(|row| r.value(row)).collect()
}

pub fn reward_gradients(r: &dyn Reward, x: &DenseArray) -> DenseArray {
    let d = r.dim();
    let g: Vec<f64> = x.data().par_chunks(d).flat_map_iter(|row| r.gradient(row)).collect();
    DenseArray::from_vec(&[x.rows(), d], g).expect("one gradient row per input row")
}

/// `r(x) = w . x + offset`
#[derive(Debug, Clone)]
pub struct LinearReward {
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl Reward for LinearReward {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.offset
    }

    fn gradient(&self, _x: &[f64]) -> Vec<f64> {
        self.weights.clone()
    }
}

/// `r(x) = scale * |x - center|^2`
#[derive(Debug, Clone)]
pub struct QuadraticReward {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl Reward for QuadraticReward {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.scale * x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| 2.0 * self.scale * (a - c)).collect()
    }
}

/// Feature map `Phi: R^d -> R^k` with its Jacobian, for experiment design.
pub trait FeatureMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn features(&self, x: &[f64]) -> Vec<f64>;
    /// Row-major `k x d`.
    fn jacobian(&self, x: &[f64]) -> Vec<f64>;
}

/// Monomials up to degree 1 or 2: `(1, x_i, x_i x_j for i <= j)`.
#[derive(Debug, Clone, Copy)]
pub struct PolynomialFeatures {
    pub dim: usize,
    pub degree: usize,
}

impl FeatureMap for PolynomialFeatures {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        let d = self.dim;
        match self.degree {
            0 => 1,
            1 => 1 + d,
            _ => 1 + d + d * (d + 1) / 2,
        }
    }

    fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![1.0];
        if self.degree >= 1 {
            f.extend_from_slice(x);
        }
        if self.degree >= 2 {
            for i in 0..self.dim {
                for j in i..self.dim {
                    f.push(x[i] * x[j]);
                }
            }
        }
        f
    }

    fn jacobian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut jac = vec![0.0; self.output_dim() * d];
        if self.degree >= 1 {
            for i in 0..d {
                jac[(1 + i) * d + i] = 1.0;
            }
        }
        if self.degree >= 2 {
            let mut row = 1 + d;
            for i in 0..d {
                for j in i..d {
                    jac[row * d + i] += x[j];
                    jac[row * d + j] += x[i];
                    row += 1;
                }
            }
        }
        jac
    }
}
