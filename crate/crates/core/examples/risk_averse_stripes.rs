//! CVaR fine-tuning on the stripes landscape, against plain adjoint
//! matching on the mean cost. Pass `--full` for the default budgets;
//! the quick run trims them so it finishes in about a minute.

use fdc_core::scenarios::make_scenario;

fn main() -> fdc_core::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let mut s = make_scenario("risk_averse")?;
    if !full {
        s.pretrain.steps = 1500;
        s.fdc.am.inner_steps = 200;
        s.baseline.inner_steps = 400;
    }
    let seed = 1;
    let pre = s.pretrain_model(seed)?;
    let base = s.run_baseline(&pre, seed)?;
    let run = s.run_fdc(&pre, s.alphas[0], seed, None)?;
    for r in &run.records {
        println!("k={} cvar-utility {:.2} kl {:.4} grad {:.3}", r.iteration, r.functional_value, r.divergence, r.grad_norm);
    }
    for (name, field) in [("pre", &pre), ("am", &base), ("fdc", &run.field)] {
        let x = s.sample(field, s.eval_samples, 100 + seed)?;
        println!("{name:<4} worst 1% cost {:.1}", s.headline_value(&x)?);
    }
    Ok(())
}
