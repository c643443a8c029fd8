//! Exact mirror ascent on the probability simplex, where the KL proximal
//! step has a closed form and the theory can be checked without networks.

use rand::Rng;

use crate::error::{Error, Result};

/// `p_next ∝ p exp(gamma grad)`, computed in log space.
pub fn md_step(p: &[f64], grad: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if p.len() != grad.len() || p.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "md_step needs equal nonempty lengths, got {} and {}",
            p.len(),
            grad.len()
        )));
    }
    if !(gamma > 0.0) || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidArgument("md_step needs gamma > 0 and a finite gradient".into()));
    }
    let logw: Vec<f64> = p.iter().zip(grad).map(|(pi, g)| pi.ln() + gamma * g).collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::InvalidArgument("md_step: every weight vanished".into()));
    }
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / z).collect())
}

/// `KL(p || q)` with `0 ln 0 = 0`.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A random point in the simplex interior with entries bounded away from 0.
pub fn random_simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

#[derive(Debug, Clone)]
pub struct Theorem1Report {
    pub optimum: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
    /// `G(p*) - G(p_k)` for `k = 0..=K`.
    pub gaps: Vec<f64>,
    /// Sup-norm distance of `p_1` from the optimum.
    pub one_step_error: f64,
}

/// `G(p) = <r, p> - alpha KL(p || p0)`: relatively smooth and strongly concave
/// with `L = l = alpha`, so one step with `gamma = 1 / alpha` is exact.
pub fn verify_theorem1(r: &[f64], p0: &[f64], alpha: f64, iterations: usize) -> Result<Theorem1Report> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
    }
    let g = |p: &[f64]| p.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() - alpha * kl(p, p0);
    let optimum = md_step(p0, &r.iter().map(|v| v / alpha).collect::<Vec<_>>(), 1.0)?;
    let mut iterates = vec![p0.to_vec()];
    for _ in 0..iterations {
        let p = iterates.last().expect("nonempty");
        // First variation r - alpha (ln(p / p0) + 1), constant dropped.
        let grad: Vec<f64> = p
            .iter()
            .zip(p0)
            .zip(r)
            .map(|((pi, qi), ri)| ri - alpha * (pi / qi).ln())
            .collect();
        iterates.push(md_step(p, &grad, 1.0 / alpha)?);
    }
    let g_star = g(&optimum);
    let gaps = iterates.iter().map(|p| g_star - g(p)).collect();
    let one_step_error = iterates.get(1).map_or(f64::NAN, |p| sup_dist(p, &optimum));
    Ok(Theorem1Report {
        optimum,
        iterates,
        gaps,
        one_step_error,
    })
}

/// Euclidean projection onto the simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, x) in s.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Maximizer of `-1/2 |p - u|^2` over the simplex by projected gradient ascent.
pub fn projected_gradient_optimum(u: &[f64], tol: f64) -> Vec<f64> {
    let mut p = vec![1.0 / u.len() as f64; u.len()];
    for _ in 0..10_000 {
        let step: Vec<f64> = p.iter().zip(u).map(|(pi, ui)| pi - 0.5 * (pi - ui)).collect();
        let next = project_simplex(&step);
        let moved = sup_dist(&next, &p);
        p = next;
        if moved < tol {
            break;
        }
    }
    p
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub optimum: Vec<f64>,
    /// `G(p*) - G(p_k)` for `k = 0..=K`.
    pub gaps: Vec<f64>,
    /// `L KL(p* || p0) / k` for `k = 1..=K`.
    pub bounds: Vec<f64>,
    /// Relative-smoothness constant from Pinsker's inequality.
    pub smoothness: f64,
    /// Smallest `bound / gap` over `k` with a nonzero gap.
    pub slack_factor: f64,
    pub bound_holds: bool,
    pub monotone: bool,
}

/// Mirror ascent with `gamma = 1` on `G(p) = -1/2 |p - u|^2`, which is
/// 1-smooth relative to negative entropy (`1/2 |.|_1^2 <= KL`) and has `l = 0`.
pub fn verify_rate_quadratic(u: &[f64], p0: &[f64], iterations: usize, slack: f64) -> Result<RateReport> {
    if u.len() != p0.len() {
        return Err(Error::InvalidArgument("u and p0 must have equal length".into()));
    }
    let g = |p: &[f64]| -0.5 * p.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let optimum = projected_gradient_optimum(u, 1e-14);
    let smoothness = 1.0;
    let mut p = p0.to_vec();
    let mut gaps = vec![g(&optimum) - g(&p)];
    for _ in 0..iterations {
        let grad: Vec<f64> = p.iter().zip(u).map(|(a, b)| b - a).collect();
        p = md_step(&p, &grad, 1.0 / smoothness)?;
        gaps.push(g(&optimum) - g(&p));
    }
    let d0 = kl(&optimum, p0);
    let bounds: Vec<f64> = (1..=iterations).map(|k| smoothness * d0 / k as f64).collect();
    let bound_holds = (1..=iterations).all(|k| gaps[k] <= bounds[k - 1] + slack);
    let slack_factor = (1..=iterations)
        .filter(|&k| gaps[k] > 0.0)
        .map(|k| bounds[k - 1] / gaps[k])
        .fold(f64::INFINITY, f64::min);
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    Ok(RateReport {
        optimum,
        gaps,
        bounds,
        smoothness,
        slack_factor,
        bound_holds,
        monotone,
    })
}
