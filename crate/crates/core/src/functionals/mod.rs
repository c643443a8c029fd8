//! Utilities and divergences of a generated distribution: plug-in value
//! estimators and the per-sample gradient of the first variation.

mod critic;
mod knn;
mod reward;
mod tails;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{score_from_velocity, Field};
use crate::numkit::DenseArray;

pub use critic::{train_critic, CriticConfig, CriticNet};
pub use knn::{knn_entropy, knn_kl, kth_neighbor_distances};
pub use reward::{
    reward_gradients, reward_values, FeatureMap, LinearReward, PolynomialFeatures, QuadraticReward, Reward,
};
pub use tails::{cvar, quantile, superquantile, tail_means};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionalKind {
    Expectation,
    Entropy,
    Cvar,
    Sq,
    MeanVariance,
    W1ToPre,
    MmdToPre,
    LogBarrier,
    OedLogdet,
    KlToPre,
}

impl FunctionalKind {
    pub const ALL: [FunctionalKind; 10] = [
        FunctionalKind::Expectation,
        FunctionalKind::Entropy,
        FunctionalKind::Cvar,
        FunctionalKind::Sq,
        FunctionalKind::MeanVariance,
        FunctionalKind::W1ToPre,
        FunctionalKind::MmdToPre,
        FunctionalKind::LogBarrier,
        FunctionalKind::OedLogdet,
        FunctionalKind::KlToPre,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Expectation => "expectation",
            Self::Entropy => "entropy",
            Self::Cvar => "cvar",
            Self::Sq => "sq",
            Self::MeanVariance => "mean_variance",
            Self::W1ToPre => "w1_to_pre",
            Self::MmdToPre => "mmd_to_pre",
            Self::LogBarrier => "log_barrier",
            Self::OedLogdet => "oed_logdet",
            Self::KlToPre => "kl_to_pre",
        }
    }

    /// Kinds whose value compares against the pre-trained distribution.
    pub fn needs_pre(self) -> bool {
        matches!(self, Self::W1ToPre | Self::MmdToPre | Self::KlToPre)
    }

    pub fn needs_reward(self) -> bool {
        matches!(self, Self::Expectation | Self::Cvar | Self::Sq | Self::MeanVariance | Self::LogBarrier)
    }
}

impl fmt::Display for FunctionalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(k) = Self::ALL.iter().find(|k| k.name() == s) {
            return Ok(*k);
        }
        let unsupported = |reason: &str| {
            Err(Error::Unsupported {
                name: s.to_string(),
                reason: reason.to_string(),
            })
        };
        match s {
            "renyi" | "renyi_divergence" => {
                unsupported("its gradient needs trajectory-wise density estimates, which are not implemented")
            }
            "modes" | "diverse_modes" | "mode_discovery" => {
                unsupported("it needs a latent-conditional generator, which this crate does not model")
            }
            _ => Err(Error::InvalidArgument(format!(
                "unknown functional `{s}`; expected one of {}",
                Self::ALL.map(|k| k.name()).join(", ")
            ))),
        }
    }
}

/// One utility or divergence term with its parameters and handles.
#[derive(Clone)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    /// Tail level for cvar and sq.
    pub beta: f64,
    /// Gaussian kernel bandwidth; `None` picks the median pairwise distance.
    pub bandwidth: Option<f64>,
    /// Ridge added to the design matrix.
    pub lambda: f64,
    /// Barrier threshold `C`.
    pub threshold: f64,
    pub barrier_weight: f64,
    /// Keep the exact constant factors of the cvar and sq first variations.
    pub strict_prefactors: bool,
    /// Scores are evaluated at `t = 1 - t_eps`.
    pub t_eps: f64,
    pub knn_k: usize,
    pub critic: CriticConfig,
    pub reward: Option<Arc<dyn Reward>>,
    pub cost: Option<Arc<dyn Reward>>,
    pub features: Option<Arc<dyn FeatureMap>>,
}

impl fmt::Debug for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalSpec")
            .field("kind", &self.kind)
            .field("beta", &self.beta)
            .field("bandwidth", &self.bandwidth)
            .field("lambda", &self.lambda)
            .field("threshold", &self.threshold)
            .field("barrier_weight", &self.barrier_weight)
            .field("strict_prefactors", &self.strict_prefactors)
            .field("t_eps", &self.t_eps)
            .field("knn_k", &self.knn_k)
            .field("critic", &self.critic)
            .field("reward", &self.reward.is_some())
            .field("cost", &self.cost.is_some())
            .field("features", &self.features.is_some())
            .finish()
    }
}

impl FunctionalSpec {
    pub fn new(kind: FunctionalKind) -> Self {
        Self {
            kind,
            beta: 0.1,
            bandwidth: None,
            lambda: 1e-3,
            threshold: 0.0,
            barrier_weight: 1.0,
            strict_prefactors: false,
            t_eps: 1e-3,
            knn_k: 3,
            critic: CriticConfig::default(),
            reward: None,
            cost: None,
            features: None,
        }
    }

    pub fn with_reward(mut self, reward: Arc<dyn Reward>) -> Self {
        self.reward = Some(reward);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    /// Every violated constraint, at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let k = self.kind;
        if matches!(k, FunctionalKind::Cvar | FunctionalKind::Sq) && !(self.beta > 0.0 && self.beta < 1.0) {
            errs.push(format!("{k}: beta must lie in (0, 1), got {}", self.beta));
        }
        if k == FunctionalKind::OedLogdet && !(self.lambda > 0.0) {
            errs.push(format!("{k}: lambda must be > 0, got {}", self.lambda));
        }
        if k.needs_reward() && self.reward.is_none() {
            errs.push(format!("{k}: a reward is required"));
        }
        if k == FunctionalKind::LogBarrier && self.cost.is_none() {
            errs.push(format!("{k}: a cost is required"));
        }
        if k == FunctionalKind::OedLogdet && self.features.is_none() {
            errs.push(format!("{k}: a feature map is required"));
        }
        if matches!(self.bandwidth, Some(b) if !(b > 0.0)) {
            errs.push(format!("{k}: bandwidth must be > 0"));
        }
        if !(self.t_eps > 0.0 && self.t_eps < 1.0) {
            errs.push(format!("{k}: t_eps must lie in (0, 1), got {}", self.t_eps));
        }
        if self.knn_k == 0 {
            errs.push(format!("{k}: knn_k must be >= 1"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn reward(&self) -> Result<&dyn Reward> {
        self.reward
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("{}: a reward is required", self.kind)))
    }

    fn cost(&self) -> Result<&dyn Reward> {
        self.cost
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("{}: a cost is required", self.kind)))
    }

    fn features(&self) -> Result<&dyn FeatureMap> {
        self.features
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("{}: a feature map is required", self.kind)))
    }
}

/// What an estimator may look at: samples of the current model, samples of
/// the pre-trained model, and both velocity fields.
#[derive(Clone, Copy)]
pub struct Snapshot<'a> {
    pub samples: &'a DenseArray,
    pub pre_samples: Option<&'a DenseArray>,
    pub model: Option<&'a dyn Field>,
    pub pre: Option<&'a dyn Field>,
}

impl<'a> Snapshot<'a> {
    pub fn samples_only(samples: &'a DenseArray) -> Self {
        Self {
            samples,
            pre_samples: None,
            model: None,
            pre: None,
        }
    }

    pub fn with_pre(mut self, pre_samples: &'a DenseArray) -> Self {
        self.pre_samples = Some(pre_samples);
        self
    }

    fn pre_samples(&self, kind: FunctionalKind) -> Result<&'a DenseArray> {
        self.pre_samples
            .ok_or_else(|| Error::InvalidArgument(format!("{kind}: pre-trained samples are required")))
    }

    fn model(&self, kind: FunctionalKind) -> Result<&'a dyn Field> {
        self.model
            .ok_or_else(|| Error::InvalidArgument(format!("{kind}: the model's velocity field is required")))
    }

    fn pre(&self, kind: FunctionalKind) -> Result<&'a dyn Field> {
        self.pre
            .ok_or_else(|| Error::InvalidArgument(format!("{kind}: the pre-trained velocity field is required")))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Median pairwise distance over the first 500 rows of each set.
pub fn median_heuristic(a: &DenseArray, b: &DenseArray) -> f64 {
    let take = |x: &DenseArray| x.iter_rows().take(500).map(<[f64]>::to_vec).collect::<Vec<_>>();
    let mut pts = take(a);
    pts.extend(take(b));
    let mut dists: Vec<f64> = (0..pts.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let p = &pts;
            (i + 1..p.len()).map(move |j| {
                p[i].iter().zip(&p[j]).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
            })
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    dists.get(dists.len() / 2).copied().unwrap_or(1.0).max(1e-12)
}

fn gaussian_kernel(x: &[f64], y: &[f64], bandwidth: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * bandwidth * bandwidth)).exp()
}

fn mean_kernel(a: &DenseArray, b: &DenseArray, bandwidth: f64) -> f64 {
    let rows: Vec<f64> = (0..a.rows())
        .into_par_iter()
        .map(|i| b.iter_rows().map(|y| gaussian_kernel(a.row(i), y, bandwidth)).sum::<f64>())
        .collect();
    rows.iter().sum::<f64>() / (a.rows() * b.rows()) as f64
}

/// Plug-in (V-statistic) squared MMD with a Gaussian kernel.
pub fn mmd_squared(a: &DenseArray, b: &DenseArray, bandwidth: f64) -> f64 {
    mean_kernel(a, a, bandwidth) - 2.0 * mean_kernel(a, b, bandwidth) + mean_kernel(b, b, bandwidth)
}

/// Unbiased squared MMD (diagonal terms excluded).
pub fn mmd_squared_unbiased(a: &DenseArray, b: &DenseArray, bandwidth: f64) -> f64 {
    let within = |x: &DenseArray| {
        let n = x.rows() as f64;
        (mean_kernel(x, x, bandwidth) * n * n - n) / (n * (n - 1.0))
    };
    within(a) - 2.0 * mean_kernel(a, b, bandwidth) + within(b)
}

/// `M = mean Phi Phi^T + lambda I`.
fn design_matrix(features: &dyn FeatureMap, x: &DenseArray, lambda: f64) -> DMatrix<f64> {
    let k = features.output_dim();
    let mut m = DMatrix::<f64>::zeros(k, k);
    for row in x.iter_rows() {
        let f = features.features(row);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] += f[i] * f[j];
            }
        }
    }
    m /= x.rows() as f64;
    for i in 0..k {
        m[(i, i)] += lambda;
    }
    m
}

/// Inverse and log-determinant of a symmetric positive-definite design matrix.
fn spd_inverse_logdet(m: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let eig = m.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < 1e12) {
        return Err(Error::SingularMatrix { condition });
    }
    let chol = m.cholesky().ok_or(Error::SingularMatrix { condition })?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok((chol.inverse(), logdet))
}

/// Plug-in value of a single term. Critic-based W1 needs a frozen estimator,
/// see [`FirstVariation::value`].
pub fn value(spec: &FunctionalSpec, snap: &Snapshot) -> Result<f64> {
    value_with_bandwidth(spec, snap, spec.bandwidth)
}

fn value_with_bandwidth(spec: &FunctionalSpec, snap: &Snapshot, bandwidth: Option<f64>) -> Result<f64> {
    spec.validate()?;
    let x = snap.samples;
    match spec.kind {
        FunctionalKind::Expectation => Ok(mean(&reward_values(spec.reward()?, x))),
        FunctionalKind::Entropy => Ok(knn_entropy(x, spec.knn_k)?.0),
        FunctionalKind::Cvar => Ok(tail_means(&reward_values(spec.reward()?, x), spec.beta)?.0),
        FunctionalKind::Sq => Ok(tail_means(&reward_values(spec.reward()?, x), spec.beta)?.1),
        FunctionalKind::MeanVariance => {
            let r = reward_values(spec.reward()?, x);
            let m = mean(&r);
            Ok(m - r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / r.len() as f64)
        }
        FunctionalKind::W1ToPre => Err(Error::UntrainedCritic),
        FunctionalKind::MmdToPre => {
            let pre = snap.pre_samples(spec.kind)?;
            let bw = bandwidth.unwrap_or_else(|| median_heuristic(x, pre));
            Ok(mmd_squared(x, pre, bw))
        }
        FunctionalKind::LogBarrier => {
            let slack = mean(&reward_values(spec.cost()?, x)) - spec.threshold;
            if !(slack > 0.0) {
                return Err(Error::InvalidArgument(format!("barrier argument must be > 0, got {slack}")));
            }
            Ok(mean(&reward_values(spec.reward()?, x)) - spec.barrier_weight * slack.ln())
        }
        FunctionalKind::OedLogdet => {
            let m = design_matrix(spec.features()?, x, spec.lambda);
            Ok(spd_inverse_logdet(m)?.1)
        }
        FunctionalKind::KlToPre => knn_kl(x, snap.pre_samples(spec.kind)?, spec.knn_k),
    }
}

enum Frozen<'a> {
    Plain,
    Quantile(f64),
    MeanReward(f64),
    Slack(f64),
    Critic(CriticNet),
    Kernel {
        model: DenseArray,
        pre: DenseArray,
        bandwidth: f64,
    },
    Design(DMatrix<f64>),
    Score(&'a dyn Field),
    ScoreRatio(&'a dyn Field, &'a dyn Field),
}

/// First-variation gradient estimator with every auxiliary quantity frozen at
/// one snapshot of the model.
pub struct FirstVariation<'a> {
    spec: FunctionalSpec,
    frozen: Frozen<'a>,
}

impl<'a> FirstVariation<'a> {
    pub fn freeze<R: Rng + ?Sized>(spec: &FunctionalSpec, snap: &Snapshot<'a>, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let x = snap.samples;
        let frozen = match spec.kind {
            FunctionalKind::Expectation => Frozen::Plain,
            FunctionalKind::Cvar | FunctionalKind::Sq => {
                let r = reward_values(spec.reward()?, x);
                tail_means(&r, spec.beta)?;
                Frozen::Quantile(quantile(&r, spec.beta)?)
            }
            FunctionalKind::MeanVariance => Frozen::MeanReward(mean(&reward_values(spec.reward()?, x))),
            FunctionalKind::LogBarrier => {
                let slack = mean(&reward_values(spec.cost()?, x)) - spec.threshold;
                if !(slack > 0.0) {
                    return Err(Error::InvalidArgument(format!("barrier argument must be > 0, got {slack}")));
                }
                spec.reward()?;
                Frozen::Slack(slack)
            }
            FunctionalKind::W1ToPre => {
                let pre = snap.pre_samples(spec.kind)?;
                Frozen::Critic(train_critic(x, pre, &spec.critic, rng)?)
            }
            FunctionalKind::MmdToPre => {
                let pre = snap.pre_samples(spec.kind)?;
                let bandwidth = spec.bandwidth.unwrap_or_else(|| median_heuristic(x, pre));
                Frozen::Kernel {
                    model: x.clone(),
                    pre: pre.clone(),
                    bandwidth,
                }
            }
            FunctionalKind::OedLogdet => {
                let m = design_matrix(spec.features()?, x, spec.lambda);
                Frozen::Design(spd_inverse_logdet(m)?.0)
            }
            FunctionalKind::Entropy => Frozen::Score(snap.model(spec.kind)?),
            FunctionalKind::KlToPre => Frozen::ScoreRatio(snap.model(spec.kind)?, snap.pre(spec.kind)?),
        };
        Ok(Self {
            spec: spec.clone(),
            frozen,
        })
    }

    /// Uses an already trained critic instead of training one.
    pub fn with_critic(spec: &FunctionalSpec, critic: CriticNet) -> Result<Self> {
        if spec.kind != FunctionalKind::W1ToPre {
            return Err(Error::InvalidArgument(format!("{} does not use a critic", spec.kind)));
        }
        Ok(Self {
            spec: spec.clone(),
            frozen: Frozen::Critic(critic),
        })
    }

    pub fn spec(&self) -> &FunctionalSpec {
        &self.spec
    }

    pub fn critic(&self) -> Option<&CriticNet> {
        match &self.frozen {
            Frozen::Critic(c) => Some(c),
            _ => None,
        }
    }

    /// Frozen quantile threshold, for the tail kinds.
    pub fn threshold(&self) -> Option<f64> {
        match self.frozen {
            Frozen::Quantile(q) => Some(q),
            _ => None,
        }
    }

    /// Value of the term on `snap`, reusing the frozen critic or bandwidth.
    pub fn value(&self, snap: &Snapshot) -> Result<f64> {
        match &self.frozen {
            Frozen::Critic(c) => c.gap(snap.samples, snap.pre_samples(self.spec.kind)?),
            Frozen::Kernel { bandwidth, .. } => value_with_bandwidth(&self.spec, snap, Some(*bandwidth)),
            _ => value(&self.spec, snap),
        }
    }

    /// `grad_x deltaG(p)(x)` for every row of `x`.
    pub fn gradient(&self, x: &DenseArray) -> Result<DenseArray> {
        let spec = &self.spec;
        let d = x.cols();
        let n = x.rows();
        match &self.frozen {
            Frozen::Plain => Ok(reward_gradients(spec.reward()?, x)),
            Frozen::Quantile(q) => {
                let r = reward_values(spec.reward()?, x);
                let mut g = reward_gradients(spec.reward()?, x);
                let lower = spec.kind == FunctionalKind::Cvar;
                let scale = match (spec.strict_prefactors, lower) {
                    (false, _) => 1.0,
                    (true, true) => 1.0 / spec.beta,
                    (true, false) => 1.0 / (1.0 - spec.beta),
                };
                for (row, rv) in g.data_mut().chunks_exact_mut(d).zip(&r) {
                    let inside = if lower { *rv <= *q } else { *rv >= *q };
                    let w = if inside { scale } else { 0.0 };
                    row.iter_mut().for_each(|v| *v *= w);
                }
                Ok(g)
            }
            Frozen::MeanReward(m) => {
                let r = reward_values(spec.reward()?, x);
                let mut g = reward_gradients(spec.reward()?, x);
                for (row, rv) in g.data_mut().chunks_exact_mut(d).zip(&r) {
                    let w = 1.0 - 2.0 * rv + 2.0 * m;
                    row.iter_mut().for_each(|v| *v *= w);
                }
                Ok(g)
            }
            Frozen::Slack(slack) => {
                let mut g = reward_gradients(spec.reward()?, x);
                let gc = reward_gradients(spec.cost()?, x);
                let c = spec.barrier_weight / slack;
                for (a, b) in g.data_mut().iter_mut().zip(gc.data()) {
                    *a -= c * b;
                }
                Ok(g)
            }
            Frozen::Critic(critic) => critic.gradients(x),
            Frozen::Kernel { model, pre, bandwidth } => {
                let bw2 = bandwidth * bandwidth;
                let witness_grad = |xr: &[f64], set: &DenseArray| -> Vec<f64> {
                    let mut g = vec![0.0; d];
                    for y in set.iter_rows() {
                        let k = gaussian_kernel(xr, y, *bandwidth);
                        for i in 0..d {
                            g[i] -= k * (xr[i] - y[i]) / bw2;
                        }
                    }
                    g.iter_mut().for_each(|v| *v /= set.rows() as f64);
                    g
                };
                let g: Vec<f64> = x
                    .data()
                    .par_chunks(d)
                    .flat_map_iter(|xr| {
                        let a = witness_grad(xr, model);
                        let b = witness_grad(xr, pre);
                        a.into_iter().zip(b).map(|(u, v)| 2.0 * (u - v)).collect::<Vec<_>>()
                    })
                    .collect();
                DenseArray::from_vec(&[n, d], g)
            }
            Frozen::Design(inv) => {
                let features = spec.features()?;
                let k = features.output_dim();
                let mut out = Vec::with_capacity(n * d);
                for row in x.iter_rows() {
                    let f = nalgebra::DVector::from_vec(features.features(row));
                    let jac = features.jacobian(row);
                    let mf = inv * f;
                    for j in 0..d {
                        out.push(2.0 * (0..k).map(|i| mf[i] * jac[i * d + j]).sum::<f64>());
                    }
                }
                DenseArray::from_vec(&[n, d], out)
            }
            Frozen::Score(model) => {
                let mut s = score_from_velocity(*model, x, 1.0 - spec.t_eps)?;
                s.data_mut().iter_mut().for_each(|v| *v = -*v);
                Ok(s)
            }
            Frozen::ScoreRatio(model, pre) => {
                let t = 1.0 - spec.t_eps;
                let mut s = score_from_velocity(*model, x, t)?;
                let sp = score_from_velocity(*pre, x, t)?;
                for (a, b) in s.data_mut().iter_mut().zip(sp.data()) {
                    *a -= b;
                }
                Ok(s)
            }
        }
    }

    /// Hash of the frozen state, used to check what an iteration was anchored to.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new();
        h.str(self.spec.kind.name());
        match &self.frozen {
            Frozen::Plain => {}
            Frozen::Quantile(v) | Frozen::MeanReward(v) | Frozen::Slack(v) => h.f64(*v),
            Frozen::Critic(c) => h.slice(c.net().params()),
            Frozen::Kernel { model, pre, bandwidth } => {
                h.slice(model.data());
                h.slice(pre.data());
                h.f64(*bandwidth);
            }
            Frozen::Design(inv) => h.slice(inv.as_slice()),
            Frozen::Score(f) => h.probe(*f),
            Frozen::ScoreRatio(f, g) => {
                h.probe(*f);
                h.probe(*g);
            }
        }
        h.finish()
    }
}

/// FNV-1a over bit patterns.
pub struct Fingerprint(u64);

impl Default for Fingerprint {
    fn default() -> Self {
        Self::new()
    }
}

impl Fingerprint {
    pub fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    pub fn bytes(&mut self, b: &[u8]) {
        for &x in b {
            self.0 ^= x as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_bits().to_le_bytes());
    }

    pub fn slice(&mut self, v: &[f64]) {
        v.iter().for_each(|&x| self.f64(x));
    }

    pub fn str(&mut self, s: &str) {
        self.bytes(s.as_bytes());
    }

    /// Velocities of a field at fixed probe points and times.
    pub fn probe(&mut self, field: &dyn Field) {
        let d = field.dim();
        let x: Vec<f64> = (0..4 * d).map(|i| (i as f64 * 0.37).sin()).collect();
        for t in [0.0, 0.5, 0.99] {
            self.slice(&field.velocity(&x, 4, t));
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// `G = sum_i w_i G_i`: a utility plus weighted divergence terms.
#[derive(Debug, Clone)]
pub struct Objective {
    terms: Vec<(f64, FunctionalSpec)>,
}

impl Objective {
    pub fn new(spec: FunctionalSpec) -> Self {
        Self { terms: vec![(1.0, spec)] }
    }

    /// `utility - alpha * divergence`.
    pub fn regularized(utility: FunctionalSpec, divergence: FunctionalSpec, alpha: f64) -> Self {
        Self::new(utility).with_term(-alpha, divergence)
    }

    pub fn with_term(mut self, weight: f64, spec: FunctionalSpec) -> Self {
        self.terms.push((weight, spec));
        self
    }

    pub fn terms(&self) -> &[(f64, FunctionalSpec)] {
        &self.terms
    }

    pub fn utility(&self) -> &FunctionalSpec {
        &self.terms[0].1
    }

    pub fn validate(&self) -> Result<()> {
        let errs: Vec<String> = self
            .terms
            .iter()
            .filter_map(|(_, s)| match s.validate() {
                Err(Error::Config(e)) => Some(e),
                _ => None,
            })
            .flatten()
            .collect();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn freeze<'a, R: Rng + ?Sized>(&self, snap: &Snapshot<'a>, rng: &mut R) -> Result<FrozenObjective<'a>> {
        let parts = self
            .terms
            .iter()
            .filter(|(w, _)| *w != 0.0)
            .map(|(w, s)| Ok((*w, FirstVariation::freeze(s, snap, rng)?)))
            .collect::<Result<_>>()?;
        Ok(FrozenObjective { parts })
    }
}

pub struct FrozenObjective<'a> {
    parts: Vec<(f64, FirstVariation<'a>)>,
}

impl<'a> FrozenObjective<'a> {
    pub fn parts(&self) -> &[(f64, FirstVariation<'a>)] {
        &self.parts
    }

    pub fn gradient(&self, x: &DenseArray) -> Result<DenseArray> {
        let mut total = DenseArray::zeros(x.shape());
        for (w, fv) in &self.parts {
            let g = fv.gradient(x)?;
            for (t, v) in total.data_mut().iter_mut().zip(g.data()) {
                *t += w * v;
            }
        }
        Ok(total)
    }

    pub fn value(&self, snap: &Snapshot) -> Result<f64> {
        let mut total = 0.0;
        for (w, fv) in &self.parts {
            total += w * fv.value(snap)?;
        }
        Ok(total)
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new();
        for (w, fv) in &self.parts {
            h.f64(*w);
            h.bytes(&fv.fingerprint().to_le_bytes());
        }
        h.finish()
    }
}

/// Freezes the auxiliary state at `snap` and evaluates the gradient at `x`.
pub fn grad_first_variation<R: Rng + ?Sized>(
    spec: &FunctionalSpec,
    snap: &Snapshot,
    x: &DenseArray,
    rng: &mut R,
) -> Result<DenseArray> {
    FirstVariation::freeze(spec, snap, rng)?.gradient(x)
}
