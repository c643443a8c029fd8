//! Conditional flow-matching pretraining on synthetic 2D targets.

mod target;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::VelocityField;
use crate::numkit::{grad_params, loss_value, standard_normals, Activation, AdamState, DenseArray, Expr};

pub use target::{Component, TargetDistribution};

#[derive(Debug, Clone, PartialEq)]
pub struct CfmConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Default for CfmConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            steps: 5000,
            batch: 512,
            lr: 1e-3,
        }
    }
}

/// One flow-matching minibatch: network inputs `(x_t, t)` and regression
/// targets `x_1 - x_0`.
fn cfm_batch(x0: &[f64], x1: &[f64], ts: &[f64], d: usize) -> (DenseArray, DenseArray) {
    let n = ts.len();
    let mut inputs = Vec::with_capacity(n * (d + 1));
    let mut targets = Vec::with_capacity(n * d);
    for (r, &t) in ts.iter().enumerate() {
        for i in 0..d {
            let (a, b) = (x0[r * d + i], x1[r * d + i]);
            inputs.push((1.0 - t) * a + t * b);
            targets.push(b - a);
        }
        inputs.push(t);
    }
    (
        DenseArray::from_vec(&[n, d + 1], inputs).expect("nonempty batch"),
        DenseArray::from_vec(&[n, d], targets).expect("nonempty batch"),
    )
}

/// `mean_r || v(x_t, t) - (x_1 - x_0) ||^2`
fn cfm_objective(targets: &DenseArray) -> Expr {
    let n = targets.rows();
    let mut shift = targets.clone();
    shift.data_mut().iter_mut().for_each(|v| *v = -*v);
    Expr::weighted_residual(vec![1.0; n], shift, 1.0 / n as f64)
}

/// Flow-matching loss of `field` on explicit draws.
pub fn cfm_loss(field: &VelocityField, x0: &DenseArray, x1: &DenseArray, ts: &[f64]) -> Result<f64> {
    let d = field.net().output_dim();
    x0.expect_shape("cfm_loss source draws", &[ts.len(), d])?;
    x1.expect_shape("cfm_loss target draws", &[ts.len(), d])?;
    let (inputs, targets) = cfm_batch(x0.data(), x1.data(), ts, d);
    loss_value(field.net(), &inputs, &cfm_objective(&targets))
}

/// Trains a velocity field by conditional flow matching on the linear path.
/// Returns the field and the per-step training losses.
pub fn cfm_train<R: Rng + ?Sized>(
    target: &TargetDistribution,
    cfg: &CfmConfig,
    rng: &mut R,
) -> Result<(VelocityField, Vec<f64>)> {
    if cfg.steps == 0 || cfg.batch == 0 {
        return Err(Error::InvalidArgument("flow matching needs steps >= 1 and batch >= 1".into()));
    }
    let d = target.dim();
    let mut field = VelocityField::init(d, &cfg.hidden, cfg.activation, rng)?;
    let mut adam = AdamState::new(field.net().num_params(), cfg.lr);
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let x1 = target.sample(cfg.batch, rng);
        let x0 = standard_normals(rng, cfg.batch * d);
        let ts: Vec<f64> = (0..cfg.batch).map(|_| rng.gen::<f64>()).collect();
        let (inputs, targets) = cfm_batch(&x0, x1.data(), &ts, d);
        let (loss, grad) = grad_params(field.net(), &inputs, &cfm_objective(&targets))?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                stage: "flow matching",
                step,
            });
        }
        adam.step(field.net_mut().params_mut(), &grad);
        losses.push(loss);
    }
    Ok((field, losses))
}

/// V-statistic energy distance `2 E|X - Y| - E|X - X'| - E|Y - Y'|`; exactly zero
/// for identical sample sets.
pub fn energy_distance(a: &DenseArray, b: &DenseArray) -> Result<f64> {
    let d = a.cols();
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::InvalidArgument("energy distance needs nonempty sample sets".into()));
    }
    b.expect_matrix("energy_distance second set", d)?;
    let mean_dist = |p: &DenseArray, q: &DenseArray| -> f64 {
        let rows: Vec<f64> = (0..p.rows())
            .into_par_iter()
            .map(|i| {
                let x = p.row(i);
                q.iter_rows()
                    .map(|y| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
                    .sum::<f64>()
            })
            .collect();
        rows.iter().sum::<f64>() / (p.rows() * q.rows()) as f64
    };
    Ok(2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b))
}
