//! Evaluation metrics for comparing pre-trained and fine-tuned samples.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{knn_entropy, tail_means};
use crate::numkit::DenseArray;

/// Ground metric `|s * (x - y)|`; `Euclidean` is `s = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundMetric {
    Euclidean,
    Weighted(Vec<f64>),
}

impl GroundMetric {
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Self::Euclidean => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            Self::Weighted(s) => x
                .iter()
                .zip(y)
                .zip(s)
                .map(|((a, b), w)| (w * (a - b)).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Minimum-cost perfect assignment of a square cost matrix (row `i` gets
/// column `out[i]`), by the Hungarian method with potentials.
pub fn assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "assignment: cost matrix must be n x n");
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[p[j] - 1] = j - 1;
    }
    out
}

fn cost_matrix(a: &DenseArray, b: &DenseArray, metric: &GroundMetric) -> Vec<f64> {
    (0..a.rows())
        .into_par_iter()
        .flat_map_iter(|i| b.iter_rows().map(move |y| metric.distance(a.row(i), y)).collect::<Vec<_>>())
        .collect()
}

fn check_pair(a: &DenseArray, b: &DenseArray) -> Result<usize> {
    if a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "exact W1 needs equal nonempty sample sets, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.rows())
}

/// Optimal matching cost between two equal-size empirical measures.
pub fn exact_w1(a: &DenseArray, b: &DenseArray, metric: &GroundMetric) -> Result<f64> {
    let n = check_pair(a, b)?;
    let cost = cost_matrix(a, b, metric);
    let perm = assignment(&cost, n);
    Ok(perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>() / n as f64)
}

/// Same quantity by enumerating all permutations; for `n <= 8`.
pub fn brute_force_w1(a: &DenseArray, b: &DenseArray, metric: &GroundMetric) -> Result<f64> {
    let n = check_pair(a, b)?;
    if n > 8 {
        return Err(Error::InvalidArgument(format!("brute force is limited to n <= 8, got {n}")));
    }
    let cost = cost_matrix(a, b, metric);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let c = p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>();
        best = best.min(c);
    });
    Ok(best / n as f64)
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanShift {
    pub delta: Vec<f64>,
    /// `100 |delta_x| / |delta_y|`; infinite when the vertical shift is below 1e-9.
    pub ratio_percent: f64,
}

impl MeanShift {
    pub fn is_infinite(&self) -> bool {
        self.ratio_percent.is_infinite()
    }
}

pub fn mean_shift_report(pre: &DenseArray, ft: &DenseArray) -> Result<MeanShift> {
    if pre.rows() == 0 || ft.rows() == 0 || pre.cols() != ft.cols() || pre.cols() < 2 {
        return Err(Error::InvalidArgument("mean shift needs nonempty 2+ dimensional samples".into()));
    }
    let delta: Vec<f64> = ft
        .column_means()
        .iter()
        .zip(pre.column_means())
        .map(|(a, b)| a - b)
        .collect();
    let ratio_percent = if delta[1].abs() < 1e-9 {
        f64::INFINITY
    } else {
        100.0 * delta[0].abs() / delta[1].abs()
    };
    Ok(MeanShift { delta, ratio_percent })
}

/// Kozachenko-Leonenko entropy; the flag reports a duplicate-point jitter.
pub fn mc_entropy(samples: &DenseArray, k: usize) -> Result<(f64, bool)> {
    if samples.rows() < 100 {
        return Err(Error::InvalidArgument(format!("entropy needs n >= 100, got {}", samples.rows())));
    }
    knn_entropy(samples, k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailReport {
    pub cvar: f64,
    pub sq: f64,
    pub mean: f64,
    /// `beta cvar + (1 - beta) sq - mean`.
    pub identity_residual: f64,
}

pub fn tail_report(values: &[f64], beta: f64) -> Result<TailReport> {
    let (cvar, sq, mean) = tail_means(values, beta)?;
    Ok(TailReport {
        cvar,
        sq,
        mean,
        identity_residual: beta * cvar + (1.0 - beta) * sq - mean,
    })
}
