//! Anisotropic W1 regularization: the same tilt reward under two ground
//! metrics moves the model along different axes.

use fdc_core::evalkit::{exact_w1, mean_shift_report, GroundMetric};
use fdc_core::scenarios::make_scenario;

fn main() -> fdc_core::Result<()> {
    for name in ["ot_a", "ot_b"] {
        let s = make_scenario(name)?;
        let pre = s.pretrain_model(1)?;
        let run = s.run_fdc(&pre, s.alphas[0], 1, None)?;
        let xp = s.sample(&pre, 1000, 10)?;
        let xf = s.sample(&run.field, 1000, 11)?;
        let shift = mean_shift_report(&xp, &xf)?;
        let metric = GroundMetric::Weighted(s.functional.critic.metric_scale.clone());
        println!(
            "{name}: metric scale {:?}, W1 {:.3}, mean shift {:.3?}, horizontal/vertical {:.0}%",
            s.functional.critic.metric_scale,
            exact_w1(&xp, &xf, &metric)?,
            shift.delta,
            shift.ratio_percent
        );
    }
    Ok(())
}
