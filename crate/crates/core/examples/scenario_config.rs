//! Scenario bundles as `key = value` text: dump, override, validate.

use fdc_core::config::ConfigMap;
use fdc_core::scenarios::{make_scenario, Scenario, SCENARIOS};

fn main() -> fdc_core::Result<()> {
    println!("scenarios: {}", SCENARIOS.join(", "));
    let mut cfg = make_scenario("novelty")?.to_config();
    cfg.merge(&ConfigMap::parse("fdc.iterations = 3\nam.lr = 0.001\n")?);
    let s = Scenario::from_config(&cfg)?;
    println!("novelty with overrides: K={} lr={}", s.fdc.iterations, s.fdc.am.lr);

    // Problems are collected, not reported one at a time.
    cfg.set("fdc.iterations", 0);
    cfg.set("am.bogus", 1);
    if let Err(e) = Scenario::from_config(&cfg) {
        println!("rejected: {e}");
    }
    Ok(())
}
