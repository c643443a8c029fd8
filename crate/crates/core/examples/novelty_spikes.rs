//! Superquantile fine-tuning: push the best 1% of rewards onto rare spikes
//! while the bulk stays put.

use fdc_core::evalkit::tail_report;
use fdc_core::functionals::reward_values;
use fdc_core::scenarios::make_scenario;

fn main() -> fdc_core::Result<()> {
    let s = make_scenario("novelty")?;
    let seed = 2;
    let pre = s.pretrain_model(seed)?;
    let run = s.run_fdc(&pre, s.alphas[0], seed, None)?;
    for (name, field) in [("pre", &pre), ("fdc", &run.field)] {
        let x = s.sample(field, s.eval_samples, 100 + seed)?;
        let t = tail_report(&reward_values(&s.landscape, &x), s.functional.beta)?;
        println!("{name:<4} top-1% reward {:.1}, mean {:.1}, mean position {:.2?}", t.sq, t.mean, x.column_means());
    }
    Ok(())
}
