//! Per-sample gradients of first variations for a few utilities, evaluated
//! on the same point cloud.

use std::sync::Arc;

use fdc_core::flow::GaussianPathField;
use fdc_core::functionals::{
    grad_first_variation, value, FunctionalKind, FunctionalSpec, QuadraticReward, Snapshot,
};
use fdc_core::numkit::{rng_from_seed, standard_normals, DenseArray};

fn main() -> fdc_core::Result<()> {
    let n = 2000;
    let z = standard_normals(&mut rng_from_seed(0), 2 * n);
    let x = DenseArray::from_vec(&[n, 2], z)?;
    let pre = DenseArray::from_vec(&[n, 2], standard_normals(&mut rng_from_seed(1), 2 * n).iter().map(|v| v + 0.5).collect())?;
    let model = GaussianPathField::new(vec![0.0, 0.0], vec![1.0, 1.0])?;

    // r(x) = -|x - (1, 0)|^2
    let reward = Arc::new(QuadraticReward {
        center: vec![1.0, 0.0],
        scale: -1.0,
    });
    let snap = Snapshot {
        model: Some(&model),
        ..Snapshot::samples_only(&x).with_pre(&pre)
    };
    let probe = DenseArray::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.2], vec![-2.5, 1.0]])?;
    for spec in [
        FunctionalSpec::new(FunctionalKind::Expectation).with_reward(reward.clone()),
        FunctionalSpec::new(FunctionalKind::Cvar).with_reward(reward.clone()).with_beta(0.1),
        FunctionalSpec::new(FunctionalKind::Sq).with_reward(reward.clone()).with_beta(0.9),
        FunctionalSpec::new(FunctionalKind::Entropy),
        FunctionalSpec::new(FunctionalKind::MmdToPre),
    ] {
        let g = grad_first_variation(&spec, &snap, &probe, &mut rng_from_seed(2))?;
        let v = value(&spec, &snap).map(|v| format!("{v:.3}")).unwrap_or_else(|_| "n/a".into());
        println!("{:<12} G = {v:>8}  grad at probes {:.3?}", spec.kind.name(), g.data());
    }
    // CVaR and SQ gradients vanish outside their tails, so only some probes move.
    Ok(())
}
