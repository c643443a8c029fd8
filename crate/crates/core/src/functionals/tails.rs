use crate::error::{Error, Result};

/// Linear-interpolation empirical quantile: position `beta (n - 1)` in the
/// sorted values.
pub fn quantile(values: &[f64], beta: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("quantile of an empty list".into()));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("quantile level must lie in [0, 1], got {beta}")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&v, beta))
}

pub(crate) fn sorted_quantile(sorted: &[f64], beta: f64) -> f64 {
    let pos = beta * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Sum of the lowest `mass` samples of a sorted list, counting the boundary
/// sample fractionally.
fn lower_mass_sum(sorted: &[f64], mass: f64) -> f64 {
    let whole = mass.floor() as usize;
    let mut s: f64 = sorted[..whole.min(sorted.len())].iter().sum();
    if whole < sorted.len() {
        s += (mass - whole as f64) * sorted[whole];
    }
    s
}

/// `(cvar, sq, mean)` with the proportional tie rule: the lower tail carries
/// exactly `beta n` samples of mass and the upper tail the rest, so that
/// `beta cvar + (1 - beta) sq = mean`.
pub fn tail_means(values: &[f64], beta: f64) -> Result<(f64, f64, f64)> {
    let n = values.len();
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("tail level must lie in (0, 1), got {beta}")));
    }
    let lower_mass = beta * n as f64;
    let upper_mass = n as f64 - lower_mass;
    if lower_mass < 1.0 || upper_mass < 1.0 {
        return Err(Error::EmptyTail { beta, n });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let total: f64 = v.iter().sum();
    let lower = lower_mass_sum(&v, lower_mass);
    Ok((lower / lower_mass, (total - lower) / upper_mass, total / n as f64))
}

/// Mean over the worst `beta` fraction.
pub fn cvar(values: &[f64], beta: f64) -> Result<f64> {
    tail_means(values, beta).map(|t| t.0)
}

/// Mean over the best `1 - beta` fraction.
pub fn superquantile(values: &[f64], beta: f64) -> Result<f64> {
    tail_means(values, beta).map(|t| t.1)
}
