//! Synthetic 2D landscapes and complete experiment bundles.
//!
//! A landscape is a constant plus a linear term plus smoothed rectangular
//! regions `h(x) * prod_axis s((x - lo) / tau) s((hi - x) / tau)` with logistic
//! `s` and `h(x) = height + slope . x`. Bounds may be infinite.

use std::str::FromStr;
use std::sync::Arc;

use crate::amsolver::{self, AmConfig};
use crate::config::{ConfigMap, Reader};
use crate::error::{Error, Result};
use crate::evalkit::{mc_entropy, tail_report};
use crate::fdc::{self, EtaSchedule, FdcConfig, FdcRun};
use crate::flow::{sample_memoryless, NoiseSchedule, VelocityField};
use crate::functionals::{reward_gradients, reward_values, FunctionalKind, FunctionalSpec, Objective, Reward};
use crate::numkit::{rng_from_seed, Activation, DenseArray};
use crate::pretrain::{cfm_train, CfmConfig, Component, TargetDistribution};

pub const SCENARIOS: [&str; 5] = ["risk_averse", "novelty", "ot_a", "ot_b", "explore"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandscapeKind {
    StripeCost,
    SpikeReward,
    TiltReward,
}

impl LandscapeKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::StripeCost => "stripe_cost",
            Self::SpikeReward => "spike_reward",
            Self::TiltReward => "tilt_reward",
        }
    }
}

impl FromStr for LandscapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stripe_cost" => Ok(Self::StripeCost),
            "spike_reward" => Ok(Self::SpikeReward),
            "tilt_reward" => Ok(Self::TiltReward),
            _ => Err(Error::InvalidArgument(format!(
                "unknown landscape `{s}`; expected stripe_cost, spike_reward or tilt_reward"
            ))),
        }
    }
}

impl std::fmt::Display for LandscapeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Axis-aligned smoothed box with an affine level inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub height: f64,
    pub slope: [f64; 2],
}

const REGION_FIELDS: usize = 7;

impl Region {
    pub fn new(lo: [f64; 2], hi: [f64; 2], height: f64) -> Self {
        Self {
            lo,
            hi,
            height,
            slope: [0.0, 0.0],
        }
    }

    /// Vertical band `lo_x <= x <= hi_x` over all `y`.
    pub fn band(lo_x: f64, hi_x: f64, height: f64) -> Self {
        Self::new([lo_x, f64::NEG_INFINITY], [hi_x, f64::INFINITY], height)
    }

    pub fn with_slope(mut self, slope: [f64; 2]) -> Self {
        self.slope = slope;
        self
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..2).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }

    fn level(&self, x: &[f64]) -> f64 {
        self.height + self.slope[0] * x[0] + self.slope[1] * x[1]
    }

    /// Smoothed indicator and its gradient.
    fn indicator(&self, x: &[f64], tau: f64) -> (f64, [f64; 2]) {
        let mut f = [1.0; 2];
        let mut df = [0.0; 2];
        for a in 0..2 {
            let (mut v, mut dv) = (1.0, 0.0);
            if self.lo[a].is_finite() {
                let s = logistic((x[a] - self.lo[a]) / tau);
                dv = s * (1.0 - s) / tau;
                v = s;
            }
            if self.hi[a].is_finite() {
                let s = logistic((self.hi[a] - x[a]) / tau);
                dv = dv * s - v * s * (1.0 - s) / tau;
                v *= s;
            }
            f[a] = v;
            df[a] = dv;
        }
        (f[0] * f[1], [df[0] * f[1], f[0] * df[1]])
    }

    fn to_list(self) -> [f64; REGION_FIELDS] {
        [self.lo[0], self.lo[1], self.hi[0], self.hi[1], self.height, self.slope[0], self.slope[1]]
    }

    fn from_list(v: &[f64]) -> Self {
        Self {
            lo: [v[0], v[1]],
            hi: [v[2], v[3]],
            height: v[4],
            slope: [v[5], v[6]],
        }
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub kind: LandscapeKind,
    /// Edge smoothing width.
    pub tau: f64,
    pub base: f64,
    pub slope: [f64; 2],
    /// Region holding the pre-trained mass.
    pub plateau: Option<Region>,
    /// Moderate-cost area (stripes) or safe basin (spikes).
    pub side: Option<Region>,
    /// Stripes or spikes.
    pub features: Vec<Region>,
}

impl Landscape {
    /// `r(x) = scale * (d . x) + base`.
    pub fn tilt(direction: [f64; 2], scale: f64, base: f64) -> Self {
        Self {
            kind: LandscapeKind::TiltReward,
            tau: 0.05,
            base,
            slope: [scale * direction[0], scale * direction[1]],
            plateau: None,
            side: None,
            features: Vec::new(),
        }
    }

    /// Rewards are to be maximized; costs minimized.
    pub fn is_cost(&self) -> bool {
        self.kind == LandscapeKind::StripeCost
    }

    fn regions(&self) -> impl Iterator<Item = &Region> {
        self.plateau.iter().chain(self.side.iter()).chain(self.features.iter())
    }

    /// Native value: the cost for cost landscapes, the reward otherwise.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let mut v = self.base + self.slope[0] * x[0] + self.slope[1] * x[1];
        for r in self.regions() {
            let (b, _) = r.indicator(x, self.tau);
            // Far outside, the level can overflow while b is exactly 0.
            if b != 0.0 {
                v += r.level(x) * b;
            }
        }
        v
    }

    pub fn gradient_at(&self, x: &[f64]) -> [f64; 2] {
        let mut g = self.slope;
        for r in self.regions() {
            let (b, db) = r.indicator(x, self.tau);
            if b == 0.0 && db == [0.0, 0.0] {
                continue;
            }
            let h = r.level(x);
            for a in 0..2 {
                g[a] += h * db[a] + r.slope[a] * b;
            }
        }
        g
    }

    /// Native values and gradients for a batch of points.
    pub fn eval(&self, x: &DenseArray) -> Result<(Vec<f64>, DenseArray)> {
        x.expect_matrix("landscape points", 2)?;
        let values = x.iter_rows().map(|p| self.value_at(p)).collect();
        let grads = x.iter_rows().flat_map(|p| self.gradient_at(p)).collect();
        Ok((values, DenseArray::from_vec(&[x.rows(), 2], grads)?))
    }

    /// Checks the orderings the scenario relies on; returns every violation.
    pub fn check_design(&self) -> Vec<String> {
        let mut bad = Vec::new();
        if !(self.tau > 0.0) {
            bad.push(format!("tau must be > 0, got {}", self.tau));
        }
        match self.kind {
            LandscapeKind::StripeCost => {
                let side = self.side.map(|s| self.base + s.height);
                for (i, s) in self.features.iter().enumerate() {
                    let centre = [0.5 * (s.lo[0] + s.hi[0]), 0.0];
                    if let Some(m) = side {
                        if self.value_at(&centre) <= m {
                            bad.push(format!("stripe {i} is not costlier than the moderate area"));
                        }
                    }
                }
            }
            LandscapeKind::SpikeReward => {
                let ceiling = [self.plateau, self.side]
                    .iter()
                    .flatten()
                    .map(|r| self.base + r.height + r.slope[0].abs() * 10.0 + r.slope[1].abs() * 10.0)
                    .fold(self.base, f64::max);
                for (i, s) in self.features.iter().enumerate() {
                    let centre = [0.5 * (s.lo[0] + s.hi[0]), clamp_centre(s.lo[1], s.hi[1])];
                    if self.value_at(&centre) <= ceiling {
                        bad.push(format!("spike {i} does not exceed the non-spike levels"));
                    }
                }
            }
            LandscapeKind::TiltReward => {}
        }
        bad
    }
}

fn clamp_centre(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    }
}

/// Reward view: costs are negated.
impl Reward for Landscape {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        let v = self.value_at(x);
        if self.is_cost() {
            -v
        } else {
            v
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = self.gradient_at(x);
        if self.is_cost() {
            vec![-g[0], -g[1]]
        } else {
            g.to_vec()
        }
    }
}

/// What the evaluation reports as the scenario's headline number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Headline {
    /// Mean cost of the worst `beta` fraction.
    WorstCaseCost,
    /// Mean reward of the best `1 - beta` fraction.
    BestCaseReward,
    ExpectedReward,
    Entropy,
}

impl Headline {
    pub fn name(self) -> &'static str {
        match self {
            Self::WorstCaseCost => "worst_case_cost",
            Self::BestCaseReward => "best_case_reward",
            Self::ExpectedReward => "expected_reward",
            Self::Entropy => "entropy",
        }
    }
}

impl FromStr for Headline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst_case_cost" => Ok(Self::WorstCaseCost),
            "best_case_reward" => Ok(Self::BestCaseReward),
            "expected_reward" => Ok(Self::ExpectedReward),
            "entropy" => Ok(Self::Entropy),
            _ => Err(Error::InvalidArgument(format!("unknown headline metric `{s}`"))),
        }
    }
}

impl std::fmt::Display for Headline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to pretrain, fine-tune and evaluate one experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub target: TargetDistribution,
    pub pretrain: CfmConfig,
    pub landscape: Landscape,
    /// Utility term; its reward is the landscape.
    pub functional: FunctionalSpec,
    /// Optional divergence-to-pre term and its weights (first one is the default).
    pub divergence: Option<FunctionalKind>,
    pub alphas: Vec<f64>,
    pub fdc: FdcConfig,
    /// Plain adjoint matching on the expected reward, for comparison.
    pub baseline: AmConfig,
    pub headline: Headline,
    pub eval_samples: usize,
    pub seed: u64,
}

pub fn make_scenario(name: &str) -> Result<Scenario> {
    match name {
        "risk_averse" => Ok(risk_averse()),
        "novelty" => Ok(novelty()),
        "ot_a" => Ok(optimal_transport("ot_a", [1.0, 7.0])),
        "ot_b" => Ok(optimal_transport("ot_b", [7.0, 1.0])),
        "explore" => Ok(explore()),
        _ => Err(Error::UnknownScenario {
            name: name.to_string(),
            available: SCENARIOS.to_vec(),
        }),
    }
}

fn schedule(steps: usize) -> NoiseSchedule {
    NoiseSchedule::memoryless(steps, 1.0).expect("positive step count")
}

fn pretrain_default() -> CfmConfig {
    CfmConfig {
        hidden: vec![32, 32],
        activation: Activation::Tanh,
        steps: 2000,
        batch: 256,
        lr: 2e-3,
    }
}

fn gaussian(mean: [f64; 2], std: [f64; 2]) -> TargetDistribution {
    TargetDistribution::Gaussian(
        Component::new(mean.to_vec(), vec![std[0] * std[0], 0.0, 0.0, std[1] * std[1]]).expect("valid covariance"),
    )
}

fn risk_averse() -> Scenario {
    let landscape = Landscape {
        kind: LandscapeKind::StripeCost,
        tau: 0.02,
        base: 20.0,
        slope: [0.0, 0.0],
        plateau: Some(Region::band(-2.0, 0.76, 50.0)),
        side: None,
        features: [0.85, 1.25, 1.65]
            .iter()
            .map(|&c| Region::band(c - 0.09, c + 0.09, 330.0))
            .collect(),
    };
    let mut functional = FunctionalSpec::new(FunctionalKind::Cvar);
    functional.beta = 0.01;
    let am = AmConfig {
        lr: 2e-3,
        ..AmConfig::new(10.0, 500, 256, schedule(50))
    };
    Scenario {
        name: "risk_averse".into(),
        target: gaussian([0.0, 0.0], [0.35, 0.6]),
        pretrain: pretrain_default(),
        landscape,
        functional,
        divergence: None,
        alphas: vec![0.0],
        fdc: FdcConfig {
            iterations: 2,
            eta: EtaSchedule::Constant(10.0),
            am: am.clone(),
            n_fv: 4000,
            seed: 7,
        },
        baseline: AmConfig { eta: 10.0, inner_steps: 1000, ..am },
        headline: Headline::WorstCaseCost,
        eval_samples: 10_000,
        seed: 7,
    }
}

fn novelty() -> Scenario {
    let landscape = Landscape {
        kind: LandscapeKind::SpikeReward,
        tau: 0.05,
        base: 10.0,
        slope: [0.0, 0.0],
        plateau: Some(Region::band(-1.0, 0.8, 40.0).with_slope([-10.0, 0.0])),
        side: Some(Region::band(f64::NEG_INFINITY, -1.0, 70.0)),
        features: [1.0, 1.3, 1.6]
            .iter()
            .map(|&c| Region::new([c - 0.04, -1.0], [c + 0.04, 1.0], 590.0))
            .collect(),
    };
    let mut functional = FunctionalSpec::new(FunctionalKind::Sq);
    functional.beta = 0.99;
    let am = AmConfig {
        lr: 2e-3,
        ..AmConfig::new(0.625, 500, 64, schedule(50))
    };
    Scenario {
        name: "novelty".into(),
        target: gaussian([0.0, 0.0], [0.35, 0.6]),
        pretrain: pretrain_default(),
        landscape,
        functional,
        divergence: None,
        alphas: vec![0.0],
        fdc: FdcConfig {
            iterations: 2,
            eta: EtaSchedule::Constant(0.625),
            am: am.clone(),
            n_fv: 8000,
            seed: 7,
        },
        baseline: AmConfig { eta: 30.0, inner_steps: 1000, ..am },
        headline: Headline::BestCaseReward,
        eval_samples: 10_000,
        seed: 7,
    }
}

fn optimal_transport(name: &str, metric_scale: [f64; 2]) -> Scenario {
    let mut functional = FunctionalSpec::new(FunctionalKind::Expectation);
    functional.critic.steps = 800;
    functional.critic.lambda_gp = 10.0;
    functional.critic.lr = 1e-4;
    functional.critic.metric_scale = metric_scale.to_vec();
    let am = AmConfig {
        lr: 2e-3,
        ..AmConfig::new(6.666, 300, 64, schedule(50))
    };
    Scenario {
        name: name.into(),
        target: gaussian([0.0, 0.0], [0.5, 0.5]),
        pretrain: pretrain_default(),
        landscape: Landscape::tilt([1.0, 1.0], 2.0, 29.5),
        functional,
        divergence: Some(FunctionalKind::W1ToPre),
        alphas: vec![0.5],
        fdc: FdcConfig {
            iterations: 6,
            eta: EtaSchedule::Constant(6.666),
            am: am.clone(),
            n_fv: 1024,
            seed: 7,
        },
        baseline: AmConfig { eta: 2.2, inner_steps: 1000, ..am },
        headline: Headline::ExpectedReward,
        eval_samples: 1000,
        seed: 7,
    }
}

fn explore() -> Scenario {
    let mut functional = FunctionalSpec::new(FunctionalKind::Entropy);
    functional.t_eps = 0.2;
    let am = AmConfig {
        lr: 2e-3,
        ..AmConfig::new(40.0, 50, 64, schedule(50))
    };
    let target = TargetDistribution::mixture(
        vec![0.8, 0.2],
        vec![
            Component::isotropic(vec![0.0, 0.0], 0.3).expect("valid"),
            Component::isotropic(vec![1.0, 1.0], 0.5).expect("valid"),
        ],
    )
    .expect("valid mixture");
    Scenario {
        name: "explore".into(),
        target,
        pretrain: pretrain_default(),
        landscape: Landscape::tilt([0.0, 0.0], 0.0, 0.0),
        functional,
        divergence: Some(FunctionalKind::KlToPre),
        alphas: vec![0.0, 0.01, 0.1, 0.5, 1.0],
        fdc: FdcConfig {
            iterations: 50,
            eta: EtaSchedule::Constant(40.0),
            am: am.clone(),
            n_fv: 1024,
            seed: 7,
        },
        baseline: AmConfig { inner_steps: 2500, ..am },
        headline: Headline::Entropy,
        eval_samples: 4000,
        seed: 7,
    }
}

impl Scenario {
    pub fn reward(&self) -> Arc<dyn Reward> {
        Arc::new(self.landscape.clone())
    }

    /// Utility minus `alpha` times the divergence term, if any.
    pub fn objective(&self, alpha: f64) -> Objective {
        let utility = self.functional.clone().with_reward(self.reward());
        match self.divergence {
            Some(kind) if alpha != 0.0 => {
                let mut d = FunctionalSpec::new(kind);
                d.critic = self.functional.critic.clone();
                d.t_eps = self.functional.t_eps;
                d.knn_k = self.functional.knn_k;
                Objective::regularized(utility, d, alpha)
            }
            _ => Objective::new(utility),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = self.landscape.check_design();
        for (k, r) in [("fdc", self.fdc.validate()), ("baseline", self.baseline.validate())] {
            if let Err(Error::Config(e)) = r {
                errs.extend(e.into_iter().map(|m| format!("{k}: {m}")));
            }
        }
        if let Err(Error::Config(e)) = self.objective(self.alphas.first().copied().unwrap_or(0.0)).validate() {
            errs.extend(e);
        }
        if self.alphas.is_empty() {
            errs.push("alphas must not be empty".into());
        }
        if self.eval_samples < 100 {
            errs.push(format!("eval_samples must be >= 100, got {}", self.eval_samples));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Pretrains the flow on the scenario's target.
    pub fn pretrain_model(&self, seed: u64) -> Result<VelocityField> {
        Ok(cfm_train(&self.target, &self.pretrain, &mut rng_from_seed(seed))?.0)
    }

    /// Runs FDC from `pre` with divergence weight `alpha` and run seed `seed`.
    pub fn run_fdc(&self, pre: &VelocityField, alpha: f64, seed: u64, outdir: Option<&std::path::Path>) -> Result<FdcRun> {
        let cfg = FdcConfig {
            seed,
            ..self.fdc.clone()
        };
        fdc::run(pre, &self.objective(alpha), &cfg, outdir)
    }

    /// Plain adjoint matching on the expected landscape reward.
    pub fn run_baseline(&self, pre: &VelocityField, seed: u64) -> Result<VelocityField> {
        let reward = self.landscape.clone();
        let grad = move |x: &DenseArray| Ok(reward_gradients(&reward, x));
        amsolver::solve(pre, pre, &grad, &self.baseline, &mut rng_from_seed(seed))
    }

    pub fn sample(&self, field: &VelocityField, n: usize, seed: u64) -> Result<DenseArray> {
        Ok(sample_memoryless(field, n, &self.fdc.am.schedule, &mut rng_from_seed(seed))?.terminal())
    }

    /// The scenario's headline number on samples.
    pub fn headline_value(&self, samples: &DenseArray) -> Result<f64> {
        let r = reward_values(&self.landscape, samples);
        match self.headline {
            Headline::WorstCaseCost => Ok(-tail_report(&r, self.functional.beta)?.cvar),
            Headline::BestCaseReward => Ok(tail_report(&r, self.functional.beta)?.sq),
            Headline::ExpectedReward => Ok(r.iter().sum::<f64>() / r.len() as f64),
            Headline::Entropy => Ok(mc_entropy(samples, self.functional.knn_k)?.0),
        }
    }

    /// Serializes the bundle; `from_config` inverts it exactly.
    pub fn to_config(&self) -> ConfigMap {
        let mut c = ConfigMap::new();
        c.set("scenario.name", &self.name);
        c.set("scenario.seed", self.seed);
        write_target(&mut c, &self.target);
        let p = &self.pretrain;
        c.set_list("pretrain.hidden", &p.hidden);
        c.set("pretrain.activation", p.activation);
        c.set("pretrain.steps", p.steps);
        c.set("pretrain.batch", p.batch);
        c.set("pretrain.lr", p.lr);
        let l = &self.landscape;
        c.set("landscape.kind", l.kind);
        c.set("landscape.tau", l.tau);
        c.set("landscape.base", l.base);
        c.set_list("landscape.slope", &l.slope);
        for (key, r) in [("landscape.plateau", l.plateau), ("landscape.side", l.side)] {
            if let Some(r) = r {
                c.set_list(key, &r.to_list());
            }
        }
        let feats: Vec<f64> = l.features.iter().flat_map(|r| r.to_list()).collect();
        c.set_list("landscape.features", &feats);
        let f = &self.functional;
        c.set("functional.kind", f.kind.name());
        c.set("functional.beta", f.beta);
        if let Some(b) = f.bandwidth {
            c.set("functional.bandwidth", b);
        }
        c.set("functional.lambda", f.lambda);
        c.set("functional.threshold", f.threshold);
        c.set("functional.barrier_weight", f.barrier_weight);
        c.set("functional.strict_prefactors", f.strict_prefactors);
        c.set("functional.t_eps", f.t_eps);
        c.set("functional.knn_k", f.knn_k);
        c.set_list("functional.critic.hidden", &f.critic.hidden);
        c.set("functional.critic.activation", f.critic.activation);
        c.set("functional.critic.steps", f.critic.steps);
        c.set("functional.critic.batch", f.critic.batch);
        c.set("functional.critic.lr", f.critic.lr);
        c.set("functional.critic.lambda_gp", f.critic.lambda_gp);
        c.set_list("functional.critic.metric_scale", &f.critic.metric_scale);
        c.set(
            "functional.divergence",
            self.divergence.map_or("none", |k| k.name()),
        );
        c.set_list("functional.alphas", &self.alphas);
        write_am(&mut c, "am", &self.fdc.am);
        write_am(&mut c, "baseline", &self.baseline);
        c.set("fdc.iterations", self.fdc.iterations);
        write_eta(&mut c, &self.fdc.eta);
        c.set("fdc.n_fv", self.fdc.n_fv);
        c.set("fdc.seed", self.fdc.seed);
        c.set("eval.headline", self.headline);
        c.set("eval.samples", self.eval_samples);
        c
    }

    pub fn from_config(c: &ConfigMap) -> Result<Scenario> {
        let mut r = c.reader();
        let s = read_scenario(&mut r);
        let mut errs = match r.finish() {
            Err(Error::Config(e)) => e,
            Err(e) => return Err(e),
            Ok(()) => Vec::new(),
        };
        // Report semantic problems alongside the parse ones.
        match s.as_ref().map(Scenario::validate) {
            Ok(Err(Error::Config(e))) => errs.extend(e),
            Ok(Err(e)) => errs.push(e.to_string()),
            Err(e) => errs.push(e.to_string()),
            Ok(Ok(())) => {}
        }
        if errs.is_empty() {
            s
        } else {
            Err(Error::Config(errs))
        }
    }
}

fn write_target(c: &mut ConfigMap, t: &TargetDistribution) {
    c.set("target.kind", t.name());
    match t {
        TargetDistribution::Gaussian(comp) => {
            c.set_list("target.mean", &comp.mean);
            c.set_list("target.cov", &comp.cov);
        }
        TargetDistribution::Mixture { weights, components } => {
            c.set_list("target.weights", weights);
            let means: Vec<f64> = components.iter().flat_map(|k| k.mean.clone()).collect();
            let covs: Vec<f64> = components.iter().flat_map(|k| k.cov.clone()).collect();
            c.set_list("target.means", &means);
            c.set_list("target.covs", &covs);
        }
        TargetDistribution::Ring {
            center,
            radius,
            thickness,
        } => {
            c.set_list("target.center", center);
            c.set("target.radius", radius);
            c.set("target.thickness", thickness);
        }
    }
}

fn write_am(c: &mut ConfigMap, prefix: &str, am: &AmConfig) {
    c.set(&format!("{prefix}.eta"), am.eta);
    c.set(&format!("{prefix}.inner_steps"), am.inner_steps);
    c.set(&format!("{prefix}.batch"), am.batch);
    c.set(&format!("{prefix}.lr"), am.lr);
    c.set(&format!("{prefix}.clip_norm"), am.clip_norm.map_or(0.0, |v| v));
    c.set(&format!("{prefix}.steps"), am.schedule.steps());
    c.set(&format!("{prefix}.sigma0"), am.schedule.sigma0());
    c.set(&format!("{prefix}.t_min"), am.schedule.t_min());
}

fn write_eta(c: &mut ConfigMap, eta: &EtaSchedule) {
    match eta {
        EtaSchedule::Constant(e) => {
            c.set("fdc.eta_schedule", "constant");
            c.set("fdc.eta", e);
        }
        EtaSchedule::Geometric { initial, ratio } => {
            c.set("fdc.eta_schedule", "geometric");
            c.set("fdc.eta", initial);
            c.set("fdc.eta_ratio", ratio);
        }
        EtaSchedule::Harmonic { initial } => {
            c.set("fdc.eta_schedule", "harmonic");
            c.set("fdc.eta", initial);
        }
        EtaSchedule::List(v) => {
            c.set("fdc.eta_schedule", "list");
            c.set_list("fdc.etas", v);
        }
    }
}

fn region(r: &mut Reader, key: &str, default: Option<Region>) -> Option<Region> {
    if !r.has(key) {
        return default;
    }
    let v: Vec<f64> = r.list_or(key, &[]);
    if v.len() != REGION_FIELDS {
        r.error(format!("{key}: expected {REGION_FIELDS} numbers, got {}", v.len()));
        return None;
    }
    Some(Region::from_list(&v))
}

fn read_target(r: &mut Reader) -> Result<TargetDistribution> {
    let kind: String = r.or("target.kind", "gaussian".to_string());
    match kind.as_str() {
        "gaussian" => {
            let mean: Vec<f64> = r.list_or("target.mean", &[0.0, 0.0]);
            let cov: Vec<f64> = r.list_or("target.cov", &[1.0, 0.0, 0.0, 1.0]);
            TargetDistribution::gaussian(mean, cov)
        }
        "gaussian_mixture" => {
            let weights: Vec<f64> = r.list_or("target.weights", &[]);
            let means: Vec<f64> = r.list_or("target.means", &[]);
            let covs: Vec<f64> = r.list_or("target.covs", &[]);
            let k = weights.len().max(1);
            let d = means.len() / k;
            if d == 0 || means.len() != k * d || covs.len() != k * d * d {
                return Err(Error::InvalidArgument("mixture means and covs do not match the weights".into()));
            }
            let comps = (0..k)
                .map(|i| Component::new(means[i * d..(i + 1) * d].to_vec(), covs[i * d * d..(i + 1) * d * d].to_vec()))
                .collect::<Result<Vec<_>>>()?;
            TargetDistribution::mixture(weights, comps)
        }
        "ring" => {
            let center: Vec<f64> = r.list_or("target.center", &[0.0, 0.0]);
            TargetDistribution::ring(center, r.or("target.radius", 1.0), r.or("target.thickness", 0.1))
        }
        other => Err(Error::InvalidArgument(format!("unknown target kind `{other}`"))),
    }
}

fn read_am(r: &mut Reader, prefix: &str, default: &AmConfig) -> Result<AmConfig> {
    let k = |s: &str| format!("{prefix}.{s}");
    let steps = r.or(&k("steps"), default.schedule.steps());
    let sigma0 = r.or(&k("sigma0"), default.schedule.sigma0());
    let t_min = r.or(&k("t_min"), default.schedule.t_min());
    let clip: f64 = r.or(&k("clip_norm"), default.clip_norm.unwrap_or(0.0));
    Ok(AmConfig {
        eta: r.or(&k("eta"), default.eta),
        inner_steps: r.or(&k("inner_steps"), default.inner_steps),
        batch: r.or(&k("batch"), default.batch),
        lr: r.or(&k("lr"), default.lr),
        clip_norm: (clip > 0.0).then_some(clip),
        schedule: NoiseSchedule::memoryless(steps, sigma0)?.with_t_min(t_min)?,
    })
}

fn read_scenario(r: &mut Reader) -> Result<Scenario> {
    let name: String = r.or("scenario.name", "custom".to_string());
    // Scenario defaults fill anything the file leaves out.
    let d = make_scenario(&name).unwrap_or_else(|_| risk_averse());
    let target = read_target(r)?;
    let pretrain = CfmConfig {
        hidden: r.list_or("pretrain.hidden", &d.pretrain.hidden),
        activation: r.or("pretrain.activation", d.pretrain.activation),
        steps: r.or("pretrain.steps", d.pretrain.steps),
        batch: r.or("pretrain.batch", d.pretrain.batch),
        lr: r.or("pretrain.lr", d.pretrain.lr),
    };
    let slope: Vec<f64> = r.list_or("landscape.slope", &d.landscape.slope);
    let default_feats: Vec<f64> = d.landscape.features.iter().flat_map(|f| f.to_list()).collect();
    let feats: Vec<f64> = r.list_or("landscape.features", &default_feats);
    if feats.len() % REGION_FIELDS != 0 {
        r.error(format!("landscape.features: length {} is not a multiple of {REGION_FIELDS}", feats.len()));
    }
    let landscape = Landscape {
        kind: r.or("landscape.kind", d.landscape.kind),
        tau: r.or("landscape.tau", d.landscape.tau),
        base: r.or("landscape.base", d.landscape.base),
        slope: [slope.first().copied().unwrap_or(0.0), slope.get(1).copied().unwrap_or(0.0)],
        plateau: region(r, "landscape.plateau", d.landscape.plateau),
        side: region(r, "landscape.side", d.landscape.side),
        features: feats.chunks_exact(REGION_FIELDS).map(Region::from_list).collect(),
    };
    let kind: FunctionalKind = r.or("functional.kind", d.functional.kind);
    let mut functional = FunctionalSpec::new(kind);
    let df = &d.functional;
    functional.beta = r.or("functional.beta", df.beta);
    functional.bandwidth = r.has("functional.bandwidth").then(|| r.or("functional.bandwidth", 1.0));
    functional.lambda = r.or("functional.lambda", df.lambda);
    functional.threshold = r.or("functional.threshold", df.threshold);
    functional.barrier_weight = r.or("functional.barrier_weight", df.barrier_weight);
    functional.strict_prefactors = r.or("functional.strict_prefactors", df.strict_prefactors);
    functional.t_eps = r.or("functional.t_eps", df.t_eps);
    functional.knn_k = r.or("functional.knn_k", df.knn_k);
    functional.critic.hidden = r.list_or("functional.critic.hidden", &df.critic.hidden);
    functional.critic.activation = r.or("functional.critic.activation", df.critic.activation);
    functional.critic.steps = r.or("functional.critic.steps", df.critic.steps);
    functional.critic.batch = r.or("functional.critic.batch", df.critic.batch);
    functional.critic.lr = r.or("functional.critic.lr", df.critic.lr);
    functional.critic.lambda_gp = r.or("functional.critic.lambda_gp", df.critic.lambda_gp);
    functional.critic.metric_scale = r.list_or("functional.critic.metric_scale", &df.critic.metric_scale);
    let div: String = r.or(
        "functional.divergence",
        d.divergence.map_or("none", |k| k.name()).to_string(),
    );
    let divergence = if div == "none" {
        None
    } else {
        match div.parse::<FunctionalKind>() {
            Ok(k) => Some(k),
            Err(e) => {
                r.error(format!("functional.divergence: {e}"));
                None
            }
        }
    };
    let alphas = r.list_or("functional.alphas", &d.alphas);
    let am = read_am(r, "am", &d.fdc.am)?;
    let baseline = read_am(r, "baseline", &d.baseline)?;
    let schedule_kind: String = r.or("fdc.eta_schedule", "constant".to_string());
    let e0 = d.fdc.eta.eta(1);
    let eta = match schedule_kind.as_str() {
        "constant" => EtaSchedule::Constant(r.or("fdc.eta", e0)),
        "geometric" => EtaSchedule::Geometric {
            initial: r.or("fdc.eta", e0),
            ratio: r.or("fdc.eta_ratio", 1.0),
        },
        "harmonic" => EtaSchedule::Harmonic {
            initial: r.or("fdc.eta", e0),
        },
        "list" => EtaSchedule::List(r.list_or("fdc.etas", &[])),
        other => {
            r.error(format!("fdc.eta_schedule: unknown schedule `{other}`"));
            EtaSchedule::Constant(e0)
        }
    };
    let fdc = FdcConfig {
        iterations: r.or("fdc.iterations", d.fdc.iterations),
        eta,
        am,
        n_fv: r.or("fdc.n_fv", d.fdc.n_fv),
        seed: r.or("fdc.seed", d.fdc.seed),
    };
    Ok(Scenario {
        name,
        target,
        pretrain,
        landscape,
        functional,
        divergence,
        alphas,
        fdc,
        baseline,
        headline: r.or("eval.headline", d.headline),
        eval_samples: r.or("eval.samples", d.eval_samples),
        seed: r.or("scenario.seed", d.seed),
    })
}
