//! Outer iterations against inner solver steps on the stripes scenario.

use fdc_core::cli::{ablate_k, ablation_csv};
use fdc_core::scenarios::make_scenario;

fn main() -> fdc_core::Result<()> {
    let s = make_scenario("risk_averse")?;
    let pre = s.pretrain_model(1)?;
    // Fixed inner budget: runtime should roughly double from K=2 to K=4.
    print!("{}", ablation_csv(&ablate_k(&s, &pre, &[0, 1, 2, 4], 100, 1)?));
    // Many cheap iterations against a few expensive ones.
    print!("{}", ablation_csv(&ablate_k(&s, &pre, &[5], 100, 1)?));
    print!("{}", ablation_csv(&ablate_k(&s, &pre, &[2], 1000, 1)?));
    Ok(())
}
