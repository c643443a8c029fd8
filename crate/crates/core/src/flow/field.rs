use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numkit::{checkpoint, Activation, DenseArray, Mlp};

/// A time-dependent vector field on `R^d`, evaluated on `n` rows at a common time.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;

    fn velocity(&self, x: &[f64], n: usize, t: f64) -> Vec<f64>;

    /// Velocities and the row-wise products `cot[r]^T dv/dx (x[r], t)`.
    fn velocity_vjp(&self, x: &[f64], n: usize, t: f64, cot: &[f64]) -> (Vec<f64>, Vec<f64>);
}

/// Network-backed velocity field; input rows are `(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    net: Mlp,
}

impl VelocityField {
    pub fn new(net: Mlp) -> Result<Self> {
        if net.input_dim() != net.output_dim() + 1 {
            return Err(Error::ShapeMismatch {
                context: "VelocityField: net must map d+1 -> d",
                expected: vec![net.output_dim() + 1, net.output_dim()],
                found: vec![net.input_dim(), net.output_dim()],
            });
        }
        Ok(Self { net })
    }

    /// Glorot-initialized field with the given hidden widths.
    pub fn init<R: Rng + ?Sized>(dim: usize, hidden: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut dims = vec![dim + 1];
        dims.extend_from_slice(hidden);
        dims.push(dim);
        Self::new(Mlp::init(&dims, activation, rng)?)
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn into_net(self) -> Mlp {
        self.net
    }

    /// Appends the time column to `n` rows of `x`.
    pub fn inputs(&self, x: &[f64], n: usize, t: f64) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(n * (d + 1));
        for row in x.chunks_exact(d) {
            out.extend_from_slice(row);
            out.push(t);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(&self.net, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(checkpoint::load(path)?)
    }
}

impl Field for VelocityField {
    fn dim(&self) -> usize {
        self.net.output_dim()
    }

    fn velocity(&self, x: &[f64], n: usize, t: f64) -> Vec<f64> {
        self.net.forward_rows(&self.inputs(x, n, t), n)
    }

    fn velocity_vjp(&self, x: &[f64], n: usize, t: f64, cot: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let (v, g) = self.net.forward_and_vjp_rows(&self.inputs(x, n, t), cot, n);
        let mut gx = Vec::with_capacity(n * d);
        for row in g.chunks_exact(d + 1) {
            gx.extend_from_slice(&row[..d]);
        }
        (v, gx)
    }
}

/// `v = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroField {
    pub dim: usize,
}

impl Field for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity(&self, _x: &[f64], n: usize, _t: f64) -> Vec<f64> {
        vec![0.0; n * self.dim]
    }

    fn velocity_vjp(&self, _x: &[f64], n: usize, _t: f64, _cot: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; n * self.dim], vec![0.0; n * self.dim])
    }
}

/// `v = c`.
#[derive(Debug, Clone)]
pub struct ConstantField {
    pub value: Vec<f64>,
}

impl Field for ConstantField {
    fn dim(&self) -> usize {
        self.value.len()
    }

    fn velocity(&self, _x: &[f64], n: usize, _t: f64) -> Vec<f64> {
        self.value.repeat(n)
    }

    fn velocity_vjp(&self, _x: &[f64], n: usize, _t: f64, _cot: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.value.repeat(n), vec![0.0; n * self.dim()])
    }
}

/// `v = A x + b`, time independent.
#[derive(Debug, Clone)]
pub struct LinearField {
    a: DenseArray,
    b: Vec<f64>,
}

impl LinearField {
    pub fn new(a: DenseArray, b: Vec<f64>) -> Result<Self> {
        let d = b.len();
        a.expect_shape("LinearField matrix", &[d, d])?;
        Ok(Self { a, b })
    }

    pub fn matrix(&self) -> &DenseArray {
        &self.a
    }
}

impl Field for LinearField {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn velocity(&self, x: &[f64], _n: usize, _t: f64) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(x.len());
        for row in x.chunks_exact(d) {
            for i in 0..d {
                out.push(crate::numkit::dot(self.a.row(i), row) + self.b[i]);
            }
        }
        out
    }

    fn velocity_vjp(&self, x: &[f64], n: usize, t: f64, cot: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut g = vec![0.0; x.len()];
        for (gr, cr) in g.chunks_exact_mut(d).zip(cot.chunks_exact(d)) {
            for i in 0..d {
                crate::numkit::axpy(cr[i], self.a.row(i), gr);
            }
        }
        (self.velocity(x, n, t), g)
    }
}

/// Exact velocity `E[X_1 - X_0 | X_t = x]` for data with independent
/// Gaussian coordinates `N(mean_i, std_i^2)`.
#[derive(Debug, Clone)]
pub struct GaussianPathField {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl GaussianPathField {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() || std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "Gaussian path field needs matching mean/std with std > 0, got {mean:?} / {std:?}"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Slope of the (affine) velocity in coordinate `i` at time `t`.
    fn slope(&self, i: usize, t: f64) -> f64 {
        let s2 = self.std[i] * self.std[i];
        (t * s2 - (1.0 - t)) / (t * t * s2 + (1.0 - t) * (1.0 - t))
    }
}

impl Field for GaussianPathField {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn velocity(&self, x: &[f64], _n: usize, t: f64) -> Vec<f64> {
        let d = self.dim();
        let slopes: Vec<f64> = (0..d).map(|i| self.slope(i, t)).collect();
        x.chunks_exact(d)
            .flat_map(|row| (0..d).map(|i| self.mean[i] + slopes[i] * (row[i] - t * self.mean[i])).collect::<Vec<_>>())
            .collect()
    }

    fn velocity_vjp(&self, x: &[f64], n: usize, t: f64, cot: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let g = cot.iter().enumerate().map(|(k, c)| c * self.slope(k % d, t)).collect();
        (self.velocity(x, n, t), g)
    }
}
