//! Flow Density Control: mirror ascent over generated distributions, one
//! linearized fine-tuning call per outer iteration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::amsolver::{self, AmConfig};
use crate::error::{Error, Result};
use crate::flow::{sample_memoryless, VelocityField};
use crate::functionals::{knn_kl, value, Fingerprint, FrozenObjective, Objective, Snapshot};
use crate::numkit::{norm, rng_from_seed, DenseArray};

/// Per-iteration regularization `eta_k` (step size `gamma_k = 1 / eta_k`).
#[derive(Debug, Clone, PartialEq)]
pub enum EtaSchedule {
    Constant(f64),
    /// `eta_k = initial * ratio^(k-1)`.
    Geometric { initial: f64, ratio: f64 },
    /// `eta_k = initial * k`, i.e. `gamma_k = gamma_1 / k`.
    Harmonic { initial: f64 },
    List(Vec<f64>),
}

impl EtaSchedule {
    /// `eta_k` for `k >= 1`.
    pub fn eta(&self, k: usize) -> f64 {
        match self {
            Self::Constant(e) => *e,
            Self::Geometric { initial, ratio } => initial * ratio.powi(k as i32 - 1),
            Self::Harmonic { initial } => initial * k as f64,
            Self::List(v) => v.get(k - 1).copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FdcConfig {
    pub iterations: usize,
    pub eta: EtaSchedule,
    /// Inner solver settings; its `eta` is replaced by `eta_k`.
    pub am: AmConfig,
    /// Samples drawn from each iterate to freeze the first variation.
    pub n_fv: usize,
    pub seed: u64,
}

impl FdcConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.iterations == 0 {
            errs.push("fdc iterations must be >= 1".to_string());
        }
        for k in 1..=self.iterations {
            let e = self.eta.eta(k);
            if !(e > 0.0 && e.is_finite()) {
                errs.push(format!("eta_{k} must be positive and finite, got {e}"));
            }
        }
        if self.n_fv < 64 {
            errs.push(format!("n_fv must be >= 64, got {}", self.n_fv));
        }
        if let Err(Error::Config(e)) = self.am.validate() {
            errs.extend(e);
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Seed of the inner solver's random stream at iteration `k`; iteration 1
/// uses the run seed itself.
pub fn solver_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 - 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn estimation_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(0x5851_f42d_4c95_7f2d).rotate_left(17) ^ (k as u64).wrapping_mul(0xda94_2042_e4dd_58b5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub iteration: usize,
    /// Utility term value on samples of this iterate; NaN if it needs training.
    pub functional_value: f64,
    /// k-NN estimate of `KL(p_k || p_pre)`.
    pub divergence: f64,
    /// Mean `|grad deltaG|` over samples of this iterate.
    pub grad_norm: f64,
    pub seconds: f64,
    /// Fingerprint of the anchor parameters and frozen first variation that
    /// produced this iterate; zero for the pre-trained model.
    pub anchor_checksum: u64,
}

#[derive(Debug, Clone)]
pub struct FdcRun {
    pub field: VelocityField,
    pub records: Vec<IterateRecord>,
}

pub fn records_csv(records: &[IterateRecord]) -> String {
    let mut s = String::from("iteration,functional_value,divergence,grad_norm,seconds\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.3}",
            r.iteration, r.functional_value, r.divergence, r.grad_norm, r.seconds
        );
    }
    s
}

/// Hash of a field's parameters.
pub fn param_checksum(field: &VelocityField) -> u64 {
    let mut h = Fingerprint::new();
    h.slice(field.net().params());
    h.finish()
}

fn mean_grad_norm(frozen: &FrozenObjective, x: &DenseArray) -> Result<f64> {
    let g = frozen.gradient(x)?;
    Ok(g.iter_rows().map(norm).sum::<f64>() / x.rows() as f64)
}

struct Persist<'a> {
    dir: Option<&'a Path>,
}

impl Persist<'_> {
    fn records(&self, records: &[IterateRecord]) -> Result<()> {
        match self.dir {
            Some(d) => Ok(fs::write(d.join("records.csv"), records_csv(records))?),
            None => Ok(()),
        }
    }

    fn checkpoint(&self, k: usize, field: &VelocityField) -> Result<()> {
        match self.dir {
            Some(d) => field.save(&d.join(format!("iter_{k}.ckpt"))),
            None => Ok(()),
        }
    }
}

/// Runs `cfg.iterations` mirror-ascent steps from `pre`. Iteration `k` samples
/// the previous iterate, freezes the objective's first variation there and
/// fine-tunes with the previous iterate as both warm start and KL anchor.
/// With `outdir`, writes `iter_k.ckpt` and `records.csv` as it goes.
pub fn run(pre: &VelocityField, objective: &Objective, cfg: &FdcConfig, outdir: Option<&Path>) -> Result<FdcRun> {
    cfg.validate()?;
    objective.validate()?;
    let persist = Persist { dir: outdir };
    if let Some(d) = outdir {
        fs::create_dir_all(d).map_err(|source| Error::Path {
            path: d.to_path_buf(),
            source,
        })?;
    }
    let schedule = &cfg.am.schedule;
    let started = Instant::now();
    let mut rng = rng_from_seed(estimation_seed(cfg.seed, 0));
    let pre_samples = sample_memoryless(pre, cfg.n_fv, schedule, &mut rng)?.terminal();
    let describe = |field: &VelocityField, samples: &DenseArray| -> Result<(f64, f64)> {
        let snap = Snapshot {
            samples,
            pre_samples: Some(&pre_samples),
            model: Some(field),
            pre: Some(pre),
        };
        let v = value(objective.utility(), &snap).unwrap_or(f64::NAN);
        Ok((v, knn_kl(samples, &pre_samples, 3)?))
    };

    // The pre-trained model is at divergence zero by definition; the k-NN
    // estimate of a set against itself is biased.
    let (v0, _) = describe(pre, &pre_samples)?;
    let mut records = vec![IterateRecord {
        iteration: 0,
        functional_value: v0,
        divergence: 0.0,
        grad_norm: f64::NAN,
        seconds: 0.0,
        anchor_checksum: 0,
    }];
    persist.records(&records)?;
    persist.checkpoint(0, pre)?;

    let mut current = pre.clone();
    let mut samples = pre_samples.clone();
    for k in 1..=cfg.iterations {
        let step = |current: &VelocityField, samples: &DenseArray| -> Result<(VelocityField, f64, u64)> {
            let snap = Snapshot {
                samples,
                pre_samples: Some(&pre_samples),
                model: Some(current),
                pre: Some(pre),
            };
            let mut rng = rng_from_seed(estimation_seed(cfg.seed, k));
            let frozen = objective.freeze(&snap, &mut rng)?;
            let grad_norm = mean_grad_norm(&frozen, samples)?;
            let mut h = Fingerprint::new();
            h.bytes(&param_checksum(current).to_le_bytes());
            h.bytes(&frozen.fingerprint().to_le_bytes());
            let am = AmConfig {
                eta: cfg.eta.eta(k),
                ..cfg.am.clone()
            };
            let reward_grad = |x: &DenseArray| frozen.gradient(x);
            let mut solver_rng = rng_from_seed(solver_seed(cfg.seed, k));
            let next = amsolver::solve(current, current, &reward_grad, &am, &mut solver_rng)?;
            Ok((next, grad_norm, h.finish()))
        };
        let wrap = |e| Error::Iteration {
            iteration: k,
            source: Box::new(e),
        };
        let (next, grad_norm, checksum) = step(&current, &samples).map_err(wrap)?;
        records[k - 1].grad_norm = grad_norm;
        current = next;
        let mut rng = rng_from_seed(estimation_seed(cfg.seed, k) ^ 1);
        samples = sample_memoryless(&current, cfg.n_fv, schedule, &mut rng)
            .map_err(wrap)?
            .terminal();
        let (v, d) = describe(&current, &samples).map_err(wrap)?;
        records.push(IterateRecord {
            iteration: k,
            functional_value: v,
            divergence: d,
            grad_norm: f64::NAN,
            seconds: started.elapsed().as_secs_f64(),
            anchor_checksum: checksum,
        });
        persist.checkpoint(k, &current)?;
        persist.records(&records)?;
    }

    // Stationarity of the final iterate.
    let wrap = |e| Error::Iteration {
        iteration: cfg.iterations + 1,
        source: Box::new(e),
    };
    let snap = Snapshot {
        samples: &samples,
        pre_samples: Some(&pre_samples),
        model: Some(&current),
        pre: Some(pre),
    };
    let mut rng = rng_from_seed(estimation_seed(cfg.seed, cfg.iterations + 1));
    let frozen = objective.freeze(&snap, &mut rng).map_err(wrap)?;
    records[cfg.iterations].grad_norm = mean_grad_norm(&frozen, &samples).map_err(wrap)?;
    persist.records(&records)?;
    drop(frozen);
    Ok(FdcRun {
        field: current,
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub values: Vec<f64>,
    /// `values[k] - values[k-1]`.
    pub differences: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Iterations `k` where the value decreased.
    pub non_monotone: Vec<usize>,
}

pub fn monitor_stationarity(records: &[IterateRecord]) -> Result<StationarityReport> {
    if records.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "stationarity needs at least 2 records, got {}",
            records.len()
        )));
    }
    let values: Vec<f64> = records.iter().map(|r| r.functional_value).collect();
    let differences: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let non_monotone = differences
        .iter()
        .enumerate()
        .filter(|(_, d)| **d < 0.0)
        .map(|(i, _)| records[i + 1].iteration)
        .collect();
    Ok(StationarityReport {
        grad_norms: records.iter().map(|r| r.grad_norm).collect(),
        values,
        differences,
        non_monotone,
    })
}
