//! Mirror ascent on the probability simplex: one exact step for
//! KL-regularized linear objectives, and the O(1/K) rate on a quadratic.

use fdc_core::numkit::rng_from_seed;
use fdc_core::simplexlab::{md_step, random_simplex_point, verify_rate_quadratic, verify_theorem1};
use rand::Rng;

fn main() -> fdc_core::Result<()> {
    let mut rng = rng_from_seed(0);
    let p0 = random_simplex_point(6, &mut rng);
    let r: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();

    // With gamma = 1/alpha, a single step lands on p0 exp(r / alpha) / Z.
    let rep = verify_theorem1(&r, &p0, 0.5, 4)?;
    println!("one-step error {:.2e}", rep.one_step_error);
    println!("gaps after each step {:?}", rep.gaps);

    let p1 = md_step(&p0, &r, 2.0)?;
    println!("p0 {p0:.3?}\np1 {p1:.3?}");

    let u: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.5..1.0)).collect();
    let rate = verify_rate_quadratic(&u, &p0, 200, 1e-8)?;
    for k in [1, 10, 50, 200] {
        println!("K={k:>3} gap {:.3e} bound {:.3e}", rate.gaps[k], rate.bounds[k - 1]);
    }
    println!("bound holds: {}, monotone: {}", rate.bound_holds, rate.monotone);
    Ok(())
}
