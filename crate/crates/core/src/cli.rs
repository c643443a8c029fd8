//! Orchestration behind the `fdc` binary: config resolution, run
//! directories, evaluation tables and the K ablation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;

use crate::config::ConfigMap;
use crate::error::{Error, Result};
use crate::evalkit::{exact_w1, mc_entropy, mean_shift_report, tail_report, GroundMetric};
use crate::fdc::FdcConfig;
use crate::flow::{write_samples_csv, VelocityField};
use crate::functionals::{reward_values, Fingerprint, FunctionalKind};
use crate::numkit::{rng_from_seed, DenseArray};
use crate::scenarios::{make_scenario, Scenario};
use crate::simplexlab::{random_simplex_point, verify_rate_quadratic, verify_theorem1};
use crate::svg::Plot;

/// Offsets keep evaluation draws apart from training streams.
const EVAL_STREAM: u64 = 0x0e7a_1000;
const PRE_STREAM: u64 = 0x0e7a_2000;

/// Caps the global worker pool at `FDC_THREADS` when set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("FDC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("FDC_THREADS must be a positive integer, got `{v}`")))?;
    if n == 0 {
        return Err(Error::InvalidArgument("FDC_THREADS must be >= 1".into()));
    }
    // A second call in the same process finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// How a command picks its scenario: named defaults, then a config file,
/// then `key=value` overrides, then an explicit seed.
#[derive(Debug, Clone, Default)]
pub struct ScenarioArgs {
    pub scenario: Option<String>,
    pub config: Option<PathBuf>,
    pub set: Vec<String>,
    pub seed: Option<u64>,
}

pub fn resolve(args: &ScenarioArgs) -> Result<Scenario> {
    let file = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| Error::Path { path: p.clone(), source })?;
            Some(ConfigMap::parse(&text)?)
        }
        None => None,
    };
    let name = args
        .scenario
        .clone()
        .or_else(|| file.as_ref().and_then(|f| f.get("scenario.name").map(str::to_string)))
        .ok_or_else(|| Error::InvalidArgument("give --scenario or a config with scenario.name".into()))?;
    let mut c = make_scenario(&name)?.to_config();
    if let Some(f) = &file {
        c.merge(f);
    }
    c.set("scenario.name", &name);
    let mut bad = Vec::new();
    for kv in &args.set {
        match kv.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => c.set(k.trim(), v.trim()),
            _ => bad.push(format!("--set expects key=value, got `{kv}`")),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Config(bad));
    }
    if let Some(s) = args.seed {
        c.set("scenario.seed", s);
    }
    Scenario::from_config(&c)
}

/// Hash of the resolved config plus the bytes of every input file.
pub fn input_hash(config: &ConfigMap, inputs: &[&Path]) -> Result<u64> {
    let mut h = Fingerprint::new();
    h.str(&config.to_string());
    for p in inputs {
        let bytes = fs::read(p).map_err(|source| Error::Path {
            path: p.to_path_buf(),
            source,
        })?;
        h.bytes(&bytes);
    }
    Ok(h.finish())
}

/// Creates `dir` and records what is needed to rerun into it.
pub fn prepare_run_dir(dir: &Path, scenario: &Scenario, inputs: &[&Path]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Path {
        path: dir.to_path_buf(),
        source,
    })?;
    let config = scenario.to_config();
    fs::write(dir.join("config.txt"), config.to_string())?;
    fs::write(dir.join("seed.txt"), format!("{}\n", scenario.seed))?;
    fs::write(dir.join("input_hash.txt"), format!("{:016x}\n", input_hash(&config, inputs)?))?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<VelocityField> {
    VelocityField::load(path)
}

fn scatter_svg(path: &Path, title: &str, samples: &DenseArray, reference: Option<&DenseArray>) -> Result<()> {
    let pts = |x: &DenseArray| x.iter_rows().map(|r| (r[0], r[1])).collect::<Vec<_>>();
    let mut plot = Plot::new(title);
    if let Some(r) = reference {
        plot = plot.scatter(pts(r), "gray");
    }
    fs::write(path, plot.scatter(pts(samples), "crimson").render())?;
    Ok(())
}

fn write_samples(dir: &Path, scenario: &Scenario, field: &VelocityField, title: &str) -> Result<DenseArray> {
    let x = scenario.sample(field, scenario.eval_samples, scenario.seed ^ EVAL_STREAM)?;
    write_samples_csv(&x, &dir.join("samples.csv"))?;
    scatter_svg(&dir.join("samples.svg"), title, &x, None)?;
    Ok(x)
}

/// Trains the pre-model; writes `pre.ckpt` and its samples.
pub fn pretrain(scenario: &Scenario, outdir: &Path) -> Result<PathBuf> {
    prepare_run_dir(outdir, scenario, &[])?;
    let field = scenario.pretrain_model(scenario.seed)?;
    let ckpt = outdir.join("pre.ckpt");
    field.save(&ckpt)?;
    write_samples(outdir, scenario, &field, &format!("{} pre-trained", scenario.name))?;
    Ok(ckpt)
}

/// Plain adjoint matching on the expected reward; writes `am.ckpt`.
pub fn finetune_am(scenario: &Scenario, pre_ckpt: &Path, outdir: &Path) -> Result<PathBuf> {
    let pre = load_field(pre_ckpt)?;
    prepare_run_dir(outdir, scenario, &[pre_ckpt])?;
    let field = scenario.run_baseline(&pre, scenario.seed)?;
    let ckpt = outdir.join("am.ckpt");
    field.save(&ckpt)?;
    write_samples(outdir, scenario, &field, &format!("{} AM baseline", scenario.name))?;
    Ok(ckpt)
}

/// FDC with divergence weight `alpha` (default: the scenario's first).
/// Writes `iter_k.ckpt`, `records.csv`, `final.ckpt` and plots.
pub fn finetune_fdc(scenario: &Scenario, pre_ckpt: &Path, alpha: Option<f64>, outdir: &Path) -> Result<PathBuf> {
    let pre = load_field(pre_ckpt)?;
    let alpha = alpha.unwrap_or(scenario.alphas[0]);
    prepare_run_dir(outdir, scenario, &[pre_ckpt])?;
    fs::write(outdir.join("alpha.txt"), format!("{alpha}\n"))?;
    let run = scenario.run_fdc(&pre, alpha, scenario.seed, Some(outdir))?;
    let ckpt = outdir.join("final.ckpt");
    run.field.save(&ckpt)?;
    write_samples(outdir, scenario, &run.field, &format!("{} FDC alpha={alpha}", scenario.name))?;
    let curve: Vec<(f64, f64)> = run.records.iter().map(|r| (r.iteration as f64, r.functional_value)).collect();
    fs::write(
        outdir.join("functional.svg"),
        Plot::new("functional value per iteration").line(curve.clone(), "navy").scatter(curve, "navy").render(),
    )?;
    Ok(ckpt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub n: usize,
    pub seed: u64,
}

pub fn metrics_csv(rows: &[Metric]) -> String {
    let mut s = String::from("metric,value,n,seed\n");
    for m in rows {
        let _ = writeln!(s, "{},{},{},{}", m.name, m.value, m.n, m.seed);
    }
    s
}

/// Tail level used for the cvar/sq rows: the scenario's own for tail
/// functionals, 1% otherwise.
fn tail_level(s: &Scenario) -> f64 {
    match s.functional.kind {
        FunctionalKind::Cvar | FunctionalKind::Sq => s.functional.beta.min(1.0 - s.functional.beta),
        _ => 0.01,
    }
}

/// Summary metrics of `model`; with `pre`, also transport and shift against it.
pub fn evaluate(scenario: &Scenario, model: &VelocityField, pre: Option<&VelocityField>, n: usize, seed: u64) -> Result<Vec<Metric>> {
    let x = scenario.sample(model, n, seed ^ EVAL_STREAM)?;
    let r = reward_values(&scenario.landscape, &x);
    let b = tail_level(scenario);
    let lo = tail_report(&r, b)?;
    let hi = tail_report(&r, 1.0 - b)?;
    let mut out = Vec::new();
    let mut push = |name: &str, value: f64, n: usize| {
        out.push(Metric {
            name: name.to_string(),
            value,
            n,
            seed,
        })
    };
    push(scenario.headline.name(), scenario.headline_value(&x)?, n);
    push("expected_reward", lo.mean, n);
    push(&format!("cvar_{b}"), lo.cvar, n);
    push(&format!("sq_{}", 1.0 - b), hi.sq, n);
    push("entropy", mc_entropy(&x, scenario.functional.knn_k)?.0, n);
    if let Some(p) = pre {
        let xp = scenario.sample(p, n, seed ^ PRE_STREAM)?;
        let shift = mean_shift_report(&xp, &x)?;
        push("mean_shift_x", shift.delta[0], n);
        push("mean_shift_y", shift.delta[1], n);
        push("delta_percent", shift.ratio_percent, n);
        // The assignment solver is cubic; 1000 points take about a second.
        let m = n.min(1000);
        let metric = GroundMetric::Weighted(scenario.functional.critic.metric_scale.clone());
        push("w1_to_pre", exact_w1(&head(&xp, m)?, &head(&x, m)?, &metric)?, m);
    }
    Ok(out)
}

fn head(x: &DenseArray, m: usize) -> Result<DenseArray> {
    DenseArray::from_vec(&[m, x.cols()], x.data()[..m * x.cols()].to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexRow {
    pub trial: usize,
    pub n: usize,
    pub alpha: f64,
    pub one_step_error: f64,
    pub rate_bound_holds: bool,
    pub slack_factor: f64,
}

/// Random simplex instances for the one-step and rate checks.
pub fn simplex_check(n: usize, trials: usize, seed: u64) -> Result<Vec<SimplexRow>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("simplex dimension must be >= 2, got {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p0 = random_simplex_point(n, &mut rng);
        let alpha = rng.gen_range(0.1..2.0);
        let t1 = verify_theorem1(&r, &p0, alpha, 1)?;
        let u = random_simplex_point(n, &mut rng);
        let q0 = random_simplex_point(n, &mut rng);
        let rate = verify_rate_quadratic(&u, &q0, 200, 1e-8)?;
        rows.push(SimplexRow {
            trial,
            n,
            alpha,
            one_step_error: t1.one_step_error,
            rate_bound_holds: rate.bound_holds,
            slack_factor: rate.slack_factor,
        });
    }
    Ok(rows)
}

pub fn simplex_csv(rows: &[SimplexRow]) -> String {
    let mut s = String::from("trial,n,alpha,one_step_error,rate_bound_holds,slack_factor\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{},{}",
            r.trial, r.n, r.alpha, r.one_step_error, r.rate_bound_holds, r.slack_factor
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub k: usize,
    pub runtime_seconds: f64,
    pub metric: f64,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("K,runtime_seconds,metric\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.3},{}", r.k, r.runtime_seconds, r.metric);
    }
    s
}

/// Reruns FDC from `pre` for each `K` with `n_inner` solver steps per
/// iteration and reports the headline metric. `K = 0` evaluates `pre`.
pub fn ablate_k(scenario: &Scenario, pre: &VelocityField, k_list: &[usize], n_inner: usize, seed: u64) -> Result<Vec<AblationRow>> {
    if k_list.is_empty() {
        return Err(Error::InvalidArgument("k list must not be empty".into()));
    }
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let start = Instant::now();
        let field = if k == 0 {
            pre.clone()
        } else {
            let mut s = scenario.clone();
            s.fdc = FdcConfig {
                iterations: k,
                am: crate::amsolver::AmConfig {
                    inner_steps: n_inner,
                    ..s.fdc.am.clone()
                },
                ..s.fdc.clone()
            };
            s.run_fdc(pre, s.alphas[0], seed, None)?.field
        };
        let runtime_seconds = start.elapsed().as_secs_f64();
        let x = scenario.sample(&field, scenario.eval_samples, seed ^ EVAL_STREAM)?;
        rows.push(AblationRow {
            k,
            runtime_seconds,
            metric: scenario.headline_value(&x)?,
        });
    }
    Ok(rows)
}

/// Checkpoint next to a pretrain run, or the given path.
pub fn pre_checkpoint(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("pre.ckpt")
    } else {
        path.to_path_buf()
    }
}

/// Helper for `fdc::records_csv` without the wall-time column.
pub fn records_without_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
