use fdc_core::config::ConfigMap;
use fdc_core::fdc::EtaSchedule;
use fdc_core::functionals::{FunctionalKind, Reward};
use fdc_core::numkit::{rng_from_seed, DenseArray};
use fdc_core::scenarios::{make_scenario, Landscape, Scenario, SCENARIOS};
use fdc_core::Error;
use rand::Rng;

fn all() -> Vec<Scenario> {
    SCENARIOS.iter().map(|n| make_scenario(n).unwrap()).collect()
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = rng_from_seed(3);
    for s in all() {
        let l = &s.landscape;
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let x = [rng.gen_range(-2.0..2.5), rng.gen_range(-2.0..2.0)];
            let g = l.gradient_at(&x);
            for a in 0..2 {
                let h = 1e-6;
                let (mut xp, mut xm) = (x, x);
                xp[a] += h;
                xm[a] -= h;
                let fd = (l.value_at(&xp) - l.value_at(&xm)) / (2.0 * h);
                worst = worst.max((fd - g[a]).abs() / g[a].abs().max(1.0));
            }
        }
        assert!(worst <= 1e-5, "{}: max relative error {worst:e}", s.name);
    }
}

#[test]
fn values_and_gradients_stay_finite() {
    for s in all() {
        for x in [[1e6, -1e6], [-1e6, 1e6], [0.0, 1e9], [f64::MAX / 4.0, 0.0]] {
            assert!(s.landscape.value_at(&x).is_finite(), "{} at {x:?}", s.name);
            assert!(s.landscape.gradient_at(&x).iter().all(|g| g.is_finite()), "{} at {x:?}", s.name);
        }
    }
}

#[test]
fn tilt_gradient_is_constant() {
    let l = Landscape::tilt([1.0, 1.0], 2.0, 29.5);
    let mut rng = rng_from_seed(1);
    for _ in 0..50 {
        let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        assert_eq!(l.gradient_at(&x), [2.0, 2.0]);
        assert!((l.value_at(&x) - (29.5 + 2.0 * (x[0] + x[1]))).abs() < 1e-12);
    }
}

#[test]
fn plateau_centre_sits_at_its_level() {
    let s = make_scenario("risk_averse").unwrap();
    let l = &s.landscape;
    let p = l.plateau.unwrap();
    let level = l.base + p.height;
    let v = l.value_at(&[-0.5, 0.0]);
    assert!((v - level).abs() < 1e-3, "plateau value {v} vs level {level}");
    // Reward view negates costs.
    assert_eq!(Reward::value(l, &[-0.5, 0.0]), -v);
}

#[test]
fn bundle_defaults() {
    let r = make_scenario("risk_averse").unwrap();
    assert_eq!(r.fdc.iterations, 2);
    assert_eq!(r.functional.kind, FunctionalKind::Cvar);
    assert_eq!(r.functional.beta, 0.01);
    assert_eq!(r.fdc.iterations * r.fdc.am.inner_steps, 1000);
    assert_eq!(r.fdc.eta, EtaSchedule::Constant(10.0));

    let n = make_scenario("novelty").unwrap();
    assert_eq!((n.fdc.iterations, n.functional.beta, n.fdc.n_fv), (2, 0.99, 8000));
    assert_eq!(n.fdc.eta, EtaSchedule::Constant(0.625));

    for name in ["ot_a", "ot_b"] {
        let o = make_scenario(name).unwrap();
        assert_eq!(o.functional.critic.lambda_gp, 10.0);
        assert_eq!(o.functional.critic.steps, 800);
        assert_eq!(o.fdc.iterations, 6);
        assert_eq!(o.divergence, Some(FunctionalKind::W1ToPre));
    }
    assert_eq!(make_scenario("ot_a").unwrap().functional.critic.metric_scale, vec![1.0, 7.0]);
    assert_eq!(make_scenario("ot_b").unwrap().functional.critic.metric_scale, vec![7.0, 1.0]);

    let e = make_scenario("explore").unwrap();
    assert!(e.alphas.contains(&0.5) && e.alphas.contains(&0.0));
    assert_eq!(e.fdc.iterations, 50);
    assert_eq!(e.fdc.iterations * e.fdc.am.inner_steps, 2500);
}

#[test]
fn unknown_scenario_lists_the_names() {
    let err = make_scenario("bogus").unwrap_err();
    assert!(matches!(err, Error::UnknownScenario { .. }));
    let msg = err.to_string();
    for n in SCENARIOS {
        assert!(msg.contains(n), "{msg}");
    }
}

#[test]
fn bundles_round_trip_through_config_text() {
    for s in all() {
        let text = s.to_config().to_string();
        let back = Scenario::from_config(&ConfigMap::parse(&text).unwrap()).unwrap();
        assert_eq!(back.to_config().to_string(), text, "{}", s.name);
    }
}

#[test]
fn config_overrides_and_errors() {
    let mut c = make_scenario("novelty").unwrap().to_config();
    c.set("fdc.iterations", 3);
    assert_eq!(Scenario::from_config(&c).unwrap().fdc.iterations, 3);
    c.set("fdc.iterations", "three");
    c.set("am.typo", 1);
    match Scenario::from_config(&c) {
        Err(Error::Config(errs)) => assert_eq!(errs.len(), 2, "{errs:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn designed_orderings_hold() {
    for s in all() {
        assert!(s.landscape.check_design().is_empty(), "{}: {:?}", s.name, s.landscape.check_design());
        s.validate().unwrap();
    }
    // Stripe centres cost more than anything outside the stripes.
    let r = make_scenario("risk_averse").unwrap().landscape;
    let mut rng = rng_from_seed(5);
    let outside_max = (0..20_000)
        .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
        .filter(|x| r.features.iter().all(|f| x[0] < f.lo[0] - 0.1 || x[0] > f.hi[0] + 0.1))
        .map(|x| r.value_at(&x))
        .fold(f64::MIN, f64::max);
    for f in &r.features {
        let inside = r.value_at(&[0.5 * (f.lo[0] + f.hi[0]), 0.0]);
        assert!(inside > outside_max, "{inside} vs {outside_max}");
    }
}

#[test]
fn spikes_are_rare_under_the_target() {
    let s = make_scenario("novelty").unwrap();
    let x: DenseArray = s.target.sample(1_000_000, &mut rng_from_seed(9));
    let inside = x
        .iter_rows()
        .filter(|p| s.landscape.features.iter().any(|f| f.contains(p)))
        .count() as f64
        / x.rows() as f64;
    assert!(inside < 1.0 - s.functional.beta, "spike mass {inside}");
    assert!(inside > 0.0, "spikes must be reachable");
}
