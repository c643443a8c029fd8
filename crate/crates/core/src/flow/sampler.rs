use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use super::field::Field;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::numkit::{standard_normals, DenseArray};

/// Sampled paths on the schedule's grid.
///
/// States and noises are stored time-major: `state(i)` is the `[m, d]` block at
/// grid point `i`, which is the layout every consumer iterates over.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    paths: usize,
    dim: usize,
    steps: usize,
    states: Vec<f64>,
    noises: Vec<f64>,
}

impl TrajectoryBatch {
    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state(&self, i: usize) -> &[f64] {
        let block = self.paths * self.dim;
        &self.states[i * block..(i + 1) * block]
    }

    /// Noise draws used for the step from grid point `i` to `i + 1`.
    pub fn noise(&self, i: usize) -> &[f64] {
        let block = self.paths * self.dim;
        &self.noises[i * block..(i + 1) * block]
    }

    pub fn terminal(&self) -> DenseArray {
        DenseArray::from_vec(&[self.paths, self.dim], self.state(self.steps).to_vec())
            .expect("trajectory blocks are nonempty")
    }

    /// States as `[B, T+1, d]`.
    pub fn states_by_path(&self) -> DenseArray {
        Self::by_path(&self.states, self.paths, self.steps + 1, self.dim)
    }

    /// Noises as `[B, T, d]`.
    pub fn noises_by_path(&self) -> DenseArray {
        Self::by_path(&self.noises, self.paths, self.steps, self.dim)
    }

    fn by_path(data: &[f64], paths: usize, times: usize, d: usize) -> DenseArray {
        let mut out = vec![0.0; data.len()];
        for i in 0..times {
            for b in 0..paths {
                let src = (i * paths + b) * d;
                let dst = (b * times + i) * d;
                out[dst..dst + d].copy_from_slice(&data[src..src + d]);
            }
        }
        DenseArray::from_vec(&[paths, times, d], out).expect("trajectory blocks are nonempty")
    }
}

/// One Euler-Maruyama step of the stochastic sampler, in place.
pub(crate) fn stochastic_step(x: &mut [f64], v: &[f64], t: f64, schedule: &NoiseSchedule, noise: &[f64]) {
    let h = schedule.h();
    let c = schedule.drift_coeff(t);
    let a = schedule.velocity_coeff(t);
    let s = h.sqrt() * schedule.sigma(t);
    for ((xi, vi), ei) in x.iter_mut().zip(v).zip(noise) {
        *xi += h * (a * vi - c * *xi) + s * ei;
    }
}

/// Runs the stochastic sampler from `x0`, asking `velocity(i, x, t)` for the
/// drift field at every step. Noise is drawn step by step from `rng`.
pub(crate) fn rollout_with<R, F>(
    x0: Vec<f64>,
    paths: usize,
    dim: usize,
    schedule: &NoiseSchedule,
    rng: &mut R,
    mut velocity: F,
) -> Result<TrajectoryBatch>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &[f64], f64) -> Vec<f64>,
{
    let steps = schedule.steps();
    let block = paths * dim;
    let mut states = Vec::with_capacity((steps + 1) * block);
    let mut noises = Vec::with_capacity(steps * block);
    states.extend_from_slice(&x0);
    let mut x = x0;
    for i in 0..steps {
        let t = schedule.time(i);
        let v = velocity(i, &x, t);
        let eps = standard_normals(rng, block);
        stochastic_step(&mut x, &v, t, schedule, &eps);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                stage: "stochastic sampling",
                step: i,
            });
        }
        states.extend_from_slice(&x);
        noises.extend(eps);
    }
    Ok(TrajectoryBatch {
        paths,
        dim,
        steps,
        states,
        noises,
    })
}

/// Stochastic sampler with the schedule's noise; `m` paths from `N(0, I)`.
pub fn sample_memoryless<R: Rng + ?Sized>(
    field: &dyn Field,
    m: usize,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<TrajectoryBatch> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let d = field.dim();
    let x0 = standard_normals(rng, m * d);
    rollout_with(x0, m, d, schedule, rng, |_, x, t| field.velocity(x, m, t))
}

/// Euler integration of `dX/dt = v(X, t)` from the given initial states.
pub fn integrate_ode(field: &dyn Field, x0: &DenseArray, schedule: &NoiseSchedule) -> Result<DenseArray> {
    let d = field.dim();
    let n = x0.expect_matrix("integrate_ode initial states", d)?;
    let h = schedule.h();
    let mut x = x0.data().to_vec();
    for i in 0..schedule.steps() {
        let v = field.velocity(&x, n, schedule.time(i));
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += h * vi;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                stage: "flow ODE integration",
                step: i,
            });
        }
    }
    DenseArray::from_vec(&[n, d], x)
}

/// `n` samples at `t = 1` from the flow ODE started at `N(0, I)` draws.
pub fn sample_ode<R: Rng + ?Sized>(field: &dyn Field, n: usize, schedule: &NoiseSchedule, rng: &mut R) -> Result<DenseArray> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let d = field.dim();
    let x0 = DenseArray::from_vec(&[n, d], standard_normals(rng, n * d))?;
    integrate_ode(field, &x0, schedule)
}

/// Smallest admissible `1 - t` for the score transform.
pub const SCORE_MIN_GAP: f64 = 1e-6;

/// `grad log p_t(x) = (t v(x, t) - x) / (1 - t)` for the linear path with a
/// standard normal source.
pub fn score_from_velocity(field: &dyn Field, x: &DenseArray, t: f64) -> Result<DenseArray> {
    let d = field.dim();
    let n = x.expect_matrix("score_from_velocity input", d)?;
    if !(0.0..=1.0).contains(&t) || 1.0 - t < SCORE_MIN_GAP {
        return Err(Error::InvalidArgument(format!(
            "score transform needs 0 <= t <= 1 - {SCORE_MIN_GAP}, got t = {t}"
        )));
    }
    let v = field.velocity(x.data(), n, t);
    let s: Vec<f64> = v.iter().zip(x.data()).map(|(vi, xi)| (t * vi - xi) / (1.0 - t)).collect();
    DenseArray::from_vec(&[n, d], s)
}

/// CSV with header `x0,x1,...` and one row per sample.
pub fn write_samples_csv(samples: &DenseArray, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut out = String::new();
    let header: Vec<String> = (0..samples.cols()).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in samples.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}
