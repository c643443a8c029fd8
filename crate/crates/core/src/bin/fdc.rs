use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};

use fdc_core::cli::{self, ScenarioArgs};
use fdc_core::scenarios::make_scenario;

#[derive(Parser)]
#[command(name = "fdc", about = "Flow density control on 2D toy problems", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario name; may also come from `scenario.name` in the config.
    #[arg(long)]
    scenario: Option<String>,
    /// Config file of `key = value` lines, applied over the scenario defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<fdc_core::scenarios::Scenario> {
        Ok(cli::resolve(&ScenarioArgs {
            scenario: self.scenario.clone(),
            config: self.config.clone(),
            set: self.set.clone(),
            seed: self.seed,
        })?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the pre-model with conditional flow matching.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Plain adjoint matching on the expected reward.
    FinetuneAm {
        #[command(flatten)]
        common: Common,
        /// Pre-model checkpoint, or a pretrain output directory.
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Flow density control.
    FinetuneFdc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        /// Divergence weight; defaults to the scenario's first.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Metrics of a checkpoint as CSV (metric,value,n,seed).
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        /// Pre-model to compare against (adds shift and W1 rows).
        #[arg(long)]
        pre: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact mirror-ascent checks on random simplex instances.
    SimplexCheck {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runtime and headline metric for several iteration counts.
    AblateK {
        #[command(flatten)]
        common: Common,
        /// Pre-model checkpoint; trained on the fly when absent.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4")]
        k_list: Vec<usize>,
        /// Solver steps per iteration.
        #[arg(long, default_value_t = 100)]
        n_inner: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scenario bundles.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Print a bundle in config format.
    Dump {
        #[arg(long)]
        name: String,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| anyhow!("creating {}: {e}", dir.display()))?;
            }
            fs::write(p, text).map_err(|e| anyhow!("writing {}: {e}", p.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    cli::init_threads()?;
    match cli.command {
        Command::Pretrain { common, outdir } => {
            let ckpt = cli::pretrain(&common.resolve()?, &outdir)?;
            println!("{}", ckpt.display());
        }
        Command::FinetuneAm { common, ckpt, outdir } => {
            let out = cli::finetune_am(&common.resolve()?, &cli::pre_checkpoint(&ckpt), &outdir)?;
            println!("{}", out.display());
        }
        Command::FinetuneFdc {
            common,
            ckpt,
            alpha,
            outdir,
        } => {
            let out = cli::finetune_fdc(&common.resolve()?, &cli::pre_checkpoint(&ckpt), alpha, &outdir)?;
            println!("{}", out.display());
        }
        Command::Eval {
            common,
            ckpt,
            pre,
            samples,
            out,
        } => {
            let s = common.resolve()?;
            let model = cli::load_field(&ckpt)?;
            let pre = pre.map(|p| cli::load_field(&cli::pre_checkpoint(&p))).transpose()?;
            let rows = cli::evaluate(&s, &model, pre.as_ref(), samples.unwrap_or(s.eval_samples), s.seed)?;
            emit(&out, &cli::metrics_csv(&rows))?;
        }
        Command::SimplexCheck { n, trials, seed, out } => {
            let rows = cli::simplex_check(n, trials, seed)?;
            emit(&out, &cli::simplex_csv(&rows))?;
            if let Some(bad) = rows.iter().find(|r| r.one_step_error > 1e-12 || !r.rate_bound_holds) {
                bail!("trial {} violates the mirror-ascent guarantees: {bad:?}", bad.trial);
            }
        }
        Command::AblateK {
            common,
            ckpt,
            k_list,
            n_inner,
            out,
        } => {
            let s = common.resolve()?;
            let pre = match ckpt {
                Some(p) => cli::load_field(&cli::pre_checkpoint(&p))?,
                None => s.pretrain_model(s.seed)?,
            };
            let rows = cli::ablate_k(&s, &pre, &k_list, n_inner, s.seed)?;
            emit(&out, &cli::ablation_csv(&rows))?;
        }
        Command::Scenario {
            action: ScenarioAction::Dump { name },
        } => print!("{}", make_scenario(&name)?.to_config()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
