//! Adjoint Matching: entropy-regularized fine-tuning of a velocity field
//! toward `p_pre exp(r / eta)` given only the reward gradient.

use rand::Rng;

use crate::error::{Error, Result};
use crate::flow::{rollout_with, Field, NoiseSchedule, TrajectoryBatch, VelocityField};
use crate::numkit::{clip_global_norm, norm, standard_normals, AdamState, BatchTape, DenseArray};

/// `x -> grad r(x)` applied to a batch of terminal samples.
pub type RewardGrad<'a> = dyn Fn(&DenseArray) -> Result<DenseArray> + Sync + 'a;

#[derive(Debug, Clone)]
pub struct AmConfig {
    /// Terminal adjoint is `-(1/eta) grad r`.
    pub eta: f64,
    pub inner_steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub schedule: NoiseSchedule,
    pub clip_norm: Option<f64>,
}

impl AmConfig {
    pub fn new(eta: f64, inner_steps: usize, batch: usize, schedule: NoiseSchedule) -> Self {
        Self {
            eta,
            inner_steps,
            batch,
            lr: 1e-3,
            schedule,
            clip_norm: Some(10.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            errs.push(format!("eta must be positive and finite, got {}", self.eta));
        }
        if self.batch == 0 {
            errs.push("batch must be >= 1".to_string());
        }
        if !(self.lr > 0.0) {
            errs.push(format!("lr must be > 0, got {}", self.lr));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            errs.push("clip_norm must be > 0".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Lean adjoint and pre-trained velocities along one batch of trajectories,
/// stored time-major.
#[derive(Debug, Clone)]
pub struct AdjointState {
    paths: usize,
    dim: usize,
    steps: usize,
    adjoint: Vec<f64>,
    pre_velocity: Vec<f64>,
}

impl AdjointState {
    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `a~` at grid index `i` for all paths, `i = 0..=T`.
    pub fn at(&self, i: usize) -> &[f64] {
        let b = self.paths * self.dim;
        &self.adjoint[i * b..(i + 1) * b]
    }

    /// `u_pre(X_i, t_i)` for `i < T`.
    pub fn pre_velocity(&self, i: usize) -> &[f64] {
        let b = self.paths * self.dim;
        &self.pre_velocity[i * b..(i + 1) * b]
    }

    pub fn terminal(&self) -> &[f64] {
        self.at(self.steps)
    }

    /// `[B, T+1, d]`.
    pub fn a_tilde(&self) -> DenseArray {
        let (b, d, times) = (self.paths, self.dim, self.steps + 1);
        let mut out = vec![0.0; self.adjoint.len()];
        for i in 0..times {
            for p in 0..b {
                let src = (i * b + p) * d;
                let dst = (p * times + i) * d;
                out[dst..dst + d].copy_from_slice(&self.adjoint[src..src + d]);
            }
        }
        DenseArray::from_vec(&[b, times, d], out).expect("adjoint blocks are nonempty")
    }
}

fn check_finite(block: &[f64], dim: usize, step: usize) -> Result<()> {
    match block.chunks_exact(dim).position(|r| r.iter().any(|v| !v.is_finite())) {
        Some(path) => Err(Error::NonFiniteAdjoint { path, step }),
        None => Ok(()),
    }
}

/// Backward recursion `a_{i-1} = a_i + h J_{i-1}^T a_i` with `J` the Jacobian of
/// the pre-trained drift `(1 + t kappa) v_pre - kappa x`, from
/// `a_T = -(1/eta) grad r(X_1)`.
pub fn lean_adjoint(
    traj: &TrajectoryBatch,
    v_pre: &dyn Field,
    terminal_grad: &DenseArray,
    eta: f64,
    schedule: &NoiseSchedule,
) -> Result<AdjointState> {
    let (m, d, steps) = (traj.paths(), traj.dim(), traj.steps());
    terminal_grad.expect_shape("terminal reward gradient", &[m, d])?;
    if steps != schedule.steps() {
        return Err(Error::InvalidArgument(format!(
            "trajectory has {steps} steps, schedule has {}",
            schedule.steps()
        )));
    }
    let block = m * d;
    let h = schedule.h();
    let inv_eta = 1.0 / eta;
    let mut adjoint = vec![0.0; (steps + 1) * block];
    let mut pre_velocity = vec![0.0; steps * block];
    for (a, g) in adjoint[steps * block..].iter_mut().zip(terminal_grad.data()) {
        *a = -(inv_eta * g);
    }
    check_finite(&adjoint[steps * block..], d, steps)?;
    for i in (0..steps).rev() {
        let t = schedule.time(i);
        let (kappa, c) = (schedule.drift_coeff(t), schedule.velocity_coeff(t));
        let (head, tail) = adjoint.split_at_mut((i + 1) * block);
        let next = &tail[..block];
        let (v, vjp) = v_pre.velocity_vjp(traj.state(i), m, t, next);
        let cur = &mut head[i * block..];
        for k in 0..block {
            cur[k] = next[k] + h * (c * vjp[k] - kappa * next[k]);
        }
        check_finite(cur, d, i)?;
        pre_velocity[i * block..(i + 1) * block].copy_from_slice(&v);
    }
    Ok(AdjointState {
        paths: m,
        dim: d,
        steps,
        adjoint,
        pre_velocity,
    })
}

fn terminal_gradient(reward_grad: &RewardGrad, terminal: &DenseArray) -> Result<DenseArray> {
    let g = reward_grad(terminal)?;
    g.expect_shape("reward gradient", terminal.shape())?;
    Ok(g)
}

/// Memoryless rollout under `v_ft`, then the lean adjoint under `v_pre`.
pub fn rollout_and_adjoint<R: Rng + ?Sized>(
    v_ft: &dyn Field,
    v_pre: &dyn Field,
    reward_grad: &RewardGrad,
    cfg: &AmConfig,
    rng: &mut R,
) -> Result<(TrajectoryBatch, AdjointState)> {
    cfg.validate()?;
    let (m, d) = (cfg.batch, v_ft.dim());
    let x0 = standard_normals(rng, m * d);
    let traj = rollout_with(x0, m, d, &cfg.schedule, rng, |_, x, t| v_ft.velocity(x, m, t))?;
    let g = terminal_gradient(reward_grad, &traj.terminal())?;
    let adj = lean_adjoint(&traj, v_pre, &g, cfg.eta, &cfg.schedule)?;
    Ok((traj, adj))
}

/// Per-row residual weights: the residual at step `i` is
/// `c_i (v_ft - v_pre) + sigma_i a_i` with `c_i = (1 + t kappa) / sigma_i`.
fn residual_coeffs(schedule: &NoiseSchedule, i: usize) -> (f64, f64) {
    let t = schedule.time(i);
    let s = schedule.sigma(t);
    (schedule.velocity_coeff(t) / s, s)
}

/// `(1/B) sum_i sum_paths |c_i (v_ft - v_pre) + sigma_i a_i|^2` and its
/// cotangent with respect to the stacked `v_ft` outputs.
fn loss_and_cotangent(
    v_ft_values: &[f64],
    adj: &AdjointState,
    schedule: &NoiseSchedule,
) -> (f64, Vec<f64>) {
    let block = adj.paths * adj.dim;
    let mut loss = 0.0;
    let mut cot = vec![0.0; v_ft_values.len()];
    for i in 0..adj.steps {
        let (c, s) = residual_coeffs(schedule, i);
        let (vf, vp, a) = (&v_ft_values[i * block..(i + 1) * block], adj.pre_velocity(i), adj.at(i));
        for k in 0..block {
            let r = c * (vf[k] - vp[k]) + s * a[k];
            loss += r * r;
            cot[i * block + k] = 2.0 * c * r / adj.paths as f64;
        }
    }
    (loss / adj.paths as f64, cot)
}

/// Adjoint Matching loss on a frozen batch.
pub fn am_loss(v_ft: &dyn Field, traj: &TrajectoryBatch, adj: &AdjointState, schedule: &NoiseSchedule) -> f64 {
    let values: Vec<f64> = (0..adj.steps)
        .flat_map(|i| v_ft.velocity(traj.state(i), traj.paths(), schedule.time(i)))
        .collect();
    loss_and_cotangent(&values, adj, schedule).0
}

fn stacked_inputs(field: &VelocityField, traj: &TrajectoryBatch, schedule: &NoiseSchedule) -> Vec<f64> {
    (0..traj.steps())
        .flat_map(|i| field.inputs(traj.state(i), traj.paths(), schedule.time(i)))
        .collect()
}

/// Loss and parameter gradient of the Adjoint Matching loss on a frozen batch.
pub fn am_loss_gradient(
    v_ft: &VelocityField,
    traj: &TrajectoryBatch,
    adj: &AdjointState,
    schedule: &NoiseSchedule,
) -> (f64, Vec<f64>) {
    let rows = traj.steps() * traj.paths();
    let tape = v_ft.net().tape(&stacked_inputs(v_ft, traj, schedule), rows);
    let (loss, cot) = loss_and_cotangent(&tape.output(), adj, schedule);
    (loss, v_ft.net().backward_params(&tape, &cot))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmStepStats {
    pub loss: f64,
    /// Global parameter-gradient norm before clipping.
    pub grad_norm: f64,
    /// Mean `|a_T|` over paths.
    pub terminal_adjoint: f64,
}

/// `inner_steps` rounds of rollout, lean adjoint, loss and Adam update.
/// Rollouts use the evolving field; the adjoint drift and the loss's `v_pre`
/// use `anchor`. `on_step` sees the statistics and the batch of each round.
pub fn solve_with<R, F>(
    v_init: &VelocityField,
    anchor: &dyn Field,
    reward_grad: &RewardGrad,
    cfg: &AmConfig,
    rng: &mut R,
    mut on_step: F,
) -> Result<VelocityField>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &AmStepStats, &TrajectoryBatch) -> Result<()>,
{
    cfg.validate()?;
    let mut field = v_init.clone();
    if cfg.inner_steps == 0 {
        return Ok(field);
    }
    let (m, d) = (cfg.batch, field.dim());
    let mut adam = AdamState::new(field.net().num_params(), cfg.lr);
    for step in 0..cfg.inner_steps {
        let x0 = standard_normals(rng, m * d);
        let mut tapes = Vec::with_capacity(cfg.schedule.steps());
        let traj = rollout_with(x0, m, d, &cfg.schedule, rng, |_, x, t| {
            let tape = field.net().tape(&field.inputs(x, m, t), m);
            let v = tape.output();
            tapes.push(tape);
            v
        })?;
        let g = terminal_gradient(reward_grad, &traj.terminal())?;
        let adj = lean_adjoint(&traj, anchor, &g, cfg.eta, &cfg.schedule)?;
        let tape = BatchTape::concat(tapes);
        let (loss, cot) = loss_and_cotangent(&tape.output(), &adj, &cfg.schedule);
        let mut grad = field.net().backward_params(&tape, &cot);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                stage: "adjoint matching",
                step,
            });
        }
        let grad_norm = match cfg.clip_norm {
            Some(c) => clip_global_norm(&mut grad, c),
            None => norm(&grad),
        };
        adam.step(field.net_mut().params_mut(), &grad);
        let terminal_adjoint = adj.terminal().chunks_exact(d).map(norm).sum::<f64>() / m as f64;
        on_step(
            step,
            &AmStepStats {
                loss,
                grad_norm,
                terminal_adjoint,
            },
            &traj,
        )?;
    }
    Ok(field)
}

pub fn solve<R: Rng + ?Sized>(
    v_init: &VelocityField,
    anchor: &dyn Field,
    reward_grad: &RewardGrad,
    cfg: &AmConfig,
    rng: &mut R,
) -> Result<VelocityField> {
    solve_with(v_init, anchor, reward_grad, cfg, rng, |_, _, _| Ok(()))
}
