//! Conditional flow matching on a 2D ring, then sampling with the ODE and
//! with the memoryless SDE. Writes ring.svg to the working directory.

use fdc_core::flow::{sample_memoryless, sample_ode, NoiseSchedule};
use fdc_core::numkit::rng_from_seed;
use fdc_core::pretrain::{cfm_train, energy_distance, CfmConfig, TargetDistribution};
use fdc_core::svg::Plot;

fn main() -> fdc_core::Result<()> {
    let target = TargetDistribution::ring(vec![0.0, 0.0], 2.0, 0.15)?;
    let cfg = CfmConfig {
        steps: 2000,
        batch: 256,
        ..CfmConfig::default()
    };
    let (field, losses) = cfm_train(&target, &cfg, &mut rng_from_seed(0))?;
    println!("cfm loss {:.3} -> {:.3}", losses[0], losses[losses.len() - 1]);

    let schedule = NoiseSchedule::memoryless(100, 1.0)?;
    let reference = target.sample(2000, &mut rng_from_seed(1));
    let ode = sample_ode(&field, 2000, &schedule, &mut rng_from_seed(2))?;
    let sde = sample_memoryless(&field, 2000, &schedule, &mut rng_from_seed(3))?.terminal();
    println!("energy distance to the ring: ode {:.4}, sde {:.4}", energy_distance(&ode, &reference)?, energy_distance(&sde, &reference)?);

    let pts = |x: &fdc_core::numkit::DenseArray| x.iter_rows().map(|r| (r[0], r[1])).collect();
    let svg = Plot::new("ring: target (grey), sde samples (blue)")
        .scatter(pts(&reference), "grey")
        .scatter(pts(&sde), "steelblue")
        .render();
    std::fs::write("ring.svg", svg)?;
    Ok(())
}
