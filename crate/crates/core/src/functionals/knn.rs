//! Nearest-neighbour entropy and divergence estimators.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkit::{rng_from_seed, standard_normals, DenseArray};

/// Distance from each query row to its `k`-th nearest reference row. With
/// `exclude_self`, query and reference are the same set and index `i` skips itself.
pub fn kth_neighbor_distances(query: &DenseArray, refs: &DenseArray, k: usize, exclude_self: bool) -> Vec<f64> {
    (0..query.rows())
        .into_par_iter()
        .map(|i| {
            let x = query.row(i);
            let mut best = vec![f64::INFINITY; k];
            for (j, y) in refs.iter_rows().enumerate() {
                if exclude_self && i == j {
                    continue;
                }
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < best[k - 1] {
                    let mut p = k - 1;
                    while p > 0 && best[p - 1] > d2 {
                        best[p] = best[p - 1];
                        p -= 1;
                    }
                    best[p] = d2;
                }
            }
            best[k - 1].sqrt()
        })
        .collect()
}

/// Digamma at a positive integer.
fn digamma_int(n: usize) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    -EULER_GAMMA + (1..n).map(|j| 1.0 / j as f64).sum::<f64>()
}

/// `ln Gamma(m / 2)` for a positive integer `m`.
fn ln_gamma_half(m: usize) -> f64 {
    let (mut x, mut acc) = if m % 2 == 0 {
        (1.0, 0.0)
    } else {
        (0.5, 0.5 * std::f64::consts::PI.ln())
    };
    while x < m as f64 / 2.0 - 0.25 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// Log volume of the unit ball in `R^d`.
fn ln_unit_ball(d: usize) -> f64 {
    0.5 * d as f64 * std::f64::consts::PI.ln() - ln_gamma_half(d + 2)
}

/// Returns a copy of `x` with `1e-9` Gaussian jitter from a fixed seed.
fn jittered(x: &DenseArray) -> DenseArray {
    let noise = standard_normals(&mut rng_from_seed(0x6a17), x.len());
    let data = x.data().iter().zip(&noise).map(|(v, e)| v + 1e-9 * e).collect();
    DenseArray::from_vec(x.shape(), data).expect("same shape")
}

/// Kozachenko-Leonenko differential entropy estimate. The flag reports whether
/// duplicate points forced a jitter.
pub fn knn_entropy(samples: &DenseArray, k: usize) -> Result<(f64, bool)> {
    let (n, d) = (samples.rows(), samples.cols());
    if k == 0 || n <= k {
        return Err(Error::InvalidArgument(format!("k-NN entropy needs n > k >= 1, got n = {n}, k = {k}")));
    }
    let mut rho = kth_neighbor_distances(samples, samples, k, true);
    let mut flagged = false;
    if rho.iter().any(|&r| r == 0.0) {
        rho = kth_neighbor_distances(&jittered(samples), &jittered(samples), k, true);
        flagged = true;
    }
    let mean_log: f64 = rho.iter().map(|r| r.ln()).sum::<f64>() / n as f64;
    Ok((digamma_int(n) - digamma_int(k) + ln_unit_ball(d) + d as f64 * mean_log, flagged))
}

/// k-NN estimate of `KL(p || q)` from samples of both.
pub fn knn_kl(p: &DenseArray, q: &DenseArray, k: usize) -> Result<f64> {
    let (n, m, d) = (p.rows(), q.rows(), p.cols());
    q.expect_matrix("knn_kl reference samples", d)?;
    if k == 0 || n <= k || m < k {
        return Err(Error::InvalidArgument(format!("k-NN divergence needs n > k and m >= k, got n = {n}, m = {m}")));
    }
    let rho = kth_neighbor_distances(p, p, k, true);
    let nu = kth_neighbor_distances(p, q, k, false);
    let sum: f64 = rho
        .iter()
        .zip(&nu)
        .map(|(r, v)| (v.max(1e-300) / r.max(1e-300)).ln())
        .sum();
    Ok(d as f64 * sum / n as f64 + (m as f64 / (n - 1) as f64).ln())
}
