use std::sync::Arc;

use fdc_core::flow::{Field, GaussianPathField};
use fdc_core::functionals::{
    grad_first_variation, knn_entropy, knn_kl, mmd_squared, quantile, reward_values, tail_means, train_critic,
    value, CriticConfig, FeatureMap, FirstVariation, FunctionalKind, FunctionalSpec, LinearReward, Objective,
    PolynomialFeatures, QuadraticReward, Reward, Snapshot,
};
use fdc_core::numkit::{rng_from_seed, standard_normals, DenseArray};
use fdc_core::Error;
use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::Rng;

/// Smooth non-polynomial test reward on R^2.
struct Wavy;

impl Reward for Wavy {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[0].sin() + 0.5 * x[1] * x[1] + 0.3 * x[0] * x[1]
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0].cos() + 0.3 * x[1], x[1] + 0.3 * x[0]]
    }
}

fn gaussian(seed: u64, n: usize, d: usize, mean: &[f64], std: f64) -> DenseArray {
    let z = standard_normals(&mut rng_from_seed(seed), n * d);
    let data = z.iter().enumerate().map(|(k, v)| mean[k % d] + std * v).collect();
    DenseArray::from_vec(&[n, d], data).unwrap()
}

fn perturbed(x: &DenseArray, v: &DenseArray, eps: f64) -> DenseArray {
    let data = x.data().iter().zip(v.data()).map(|(a, b)| a + eps * b).collect();
    DenseArray::from_vec(x.shape(), data).unwrap()
}

/// Compares `(G(p_eps) - G(p_-eps)) / 2 eps` against `mean_i grad(x_i) . v_i`
/// on a 60-particle empirical distribution.
fn particle_fd_check(spec: &FunctionalSpec, pre: Option<&DenseArray>, seed: u64) -> (f64, f64) {
    let x = gaussian(seed, 60, 2, &[0.2, -0.1], 0.8);
    let v = gaussian(seed + 1, 60, 2, &[0.0, 0.0], 1.0);
    let snap = Snapshot {
        samples: &x,
        pre_samples: pre,
        model: None,
        pre: None,
    };
    let fv = FirstVariation::freeze(spec, &snap, &mut rng_from_seed(seed + 2)).unwrap();
    let g = fv.gradient(&x).unwrap();
    let analytic: f64 = g.data().iter().zip(v.data()).map(|(a, b)| a * b).sum::<f64>() / 60.0;
    let eps = 1e-5;
    let at = |e: f64| {
        let xe = perturbed(&x, &v, e);
        fv.value(&Snapshot { samples: &xe, ..snap }).unwrap()
    };
    ((at(eps) - at(-eps)) / (2.0 * eps), analytic)
}

fn assert_rel(fd: f64, analytic: f64, tol: f64, what: &str) {
    let scale = fd.abs().max(analytic.abs()).max(1e-8);
    assert!((fd - analytic).abs() <= tol * scale, "{what}: fd {fd} vs analytic {analytic}");
}

fn spec_with(kind: FunctionalKind, reward: Arc<dyn Reward>) -> FunctionalSpec {
    FunctionalSpec::new(kind).with_reward(reward)
}

#[test]
fn particle_finite_differences_for_reward_kinds() {
    for kind in [FunctionalKind::Expectation, FunctionalKind::MeanVariance] {
        let (fd, an) = particle_fd_check(&spec_with(kind, Arc::new(Wavy)), None, 11);
        assert_rel(fd, an, 1e-2, kind.name());
    }
}

#[test]
fn particle_finite_differences_for_tails_away_from_the_threshold() {
    for kind in [FunctionalKind::Cvar, FunctionalKind::Sq] {
        let mut spec = spec_with(kind, Arc::new(Wavy)).with_beta(0.25);
        spec.strict_prefactors = true;
        // beta n = 15: the threshold falls strictly between two sorted values.
        // Take the first draw whose threshold is 1% of the range away from both.
        let seed = (11..)
            .find(|&seed| {
                let x = gaussian(seed, 60, 2, &[0.2, -0.1], 0.8);
                let mut r = reward_values(&Wavy, &x);
                r.sort_by(f64::total_cmp);
                let q = quantile(&r, 0.25).unwrap();
                (q - r[14]).min(r[15] - q) > 0.01 * (r[59] - r[0])
            })
            .unwrap();
        let (fd, an) = particle_fd_check(&spec, None, seed);
        assert_rel(fd, an, 1e-2, kind.name());
    }
}

#[test]
fn particle_finite_differences_for_barrier_and_design() {
    let mut spec = spec_with(FunctionalKind::LogBarrier, Arc::new(Wavy));
    spec.cost = Some(Arc::new(QuadraticReward {
        center: vec![0.0, 0.0],
        scale: 1.0,
    }));
    spec.threshold = 0.1;
    spec.barrier_weight = 0.7;
    let (fd, an) = particle_fd_check(&spec, None, 21);
    assert_rel(fd, an, 1e-2, "log_barrier");

    let mut spec = FunctionalSpec::new(FunctionalKind::OedLogdet);
    spec.features = Some(Arc::new(PolynomialFeatures { dim: 2, degree: 2 }));
    let (fd, an) = particle_fd_check(&spec, None, 23);
    assert_rel(fd, an, 1e-2, "oed_logdet");
}

#[test]
fn particle_finite_differences_for_mmd() {
    let pre = gaussian(40, 80, 2, &[1.0, 0.5], 0.6);
    let (fd, an) = particle_fd_check(&FunctionalSpec::new(FunctionalKind::MmdToPre), Some(&pre), 31);
    assert_rel(fd, an, 1e-2, "mmd_to_pre");
}

#[test]
fn particle_finite_differences_for_w1_with_a_frozen_critic() {
    let mut spec = FunctionalSpec::new(FunctionalKind::W1ToPre);
    spec.critic.steps = 200;
    let model = gaussian(50, 256, 2, &[0.0, 0.0], 1.0);
    let pre = gaussian(51, 256, 2, &[1.0, 0.0], 1.0);
    let critic = train_critic(&model, &pre, &spec.critic, &mut rng_from_seed(52)).unwrap();
    let fv = FirstVariation::with_critic(&spec, critic).unwrap();
    let x = gaussian(53, 60, 2, &[0.0, 0.0], 1.0);
    let v = gaussian(54, 60, 2, &[0.0, 0.0], 1.0);
    let g = fv.gradient(&x).unwrap();
    let analytic: f64 = g.data().iter().zip(v.data()).map(|(a, b)| a * b).sum::<f64>() / 60.0;
    let eps = 1e-5;
    let at = |e: f64| fv.value(&Snapshot::samples_only(&perturbed(&x, &v, e)).with_pre(&pre)).unwrap();
    assert_rel((at(eps) - at(-eps)) / (2.0 * eps), analytic, 1e-2, "w1_to_pre");
}

/// Probabilists' Gauss-Hermite rule via the Jacobi matrix.
fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        j[(k, k - 1)] = (k as f64).sqrt();
        j[(k - 1, k)] = (k as f64).sqrt();
    }
    let eig = j.symmetric_eigen();
    (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect()
}

fn entropy_of(cov: &Matrix2<f64>) -> f64 {
    0.5 * (cov.determinant() * (2.0 * std::f64::consts::PI * std::f64::consts::E).powi(2)).ln()
}

fn kl_between(m: &Vector2<f64>, c: &Matrix2<f64>, mp: &Vector2<f64>, cp: &Matrix2<f64>) -> f64 {
    let cpi = cp.try_inverse().unwrap();
    let dm = mp - m;
    0.5 * ((cpi * c).trace() + (dm.transpose() * cpi * dm)[0] - 2.0 + cp.determinant().ln() - c.determinant().ln())
}

/// A Gaussian pushed forward by `x -> x + eps (A x + b)` against the
/// quadrature average of `grad . (A x + b)`.
#[test]
fn gaussian_pushforward_checks_entropy_and_kl_gradients() {
    let (mu, s) = (Vector2::new(0.5, -1.0), Vector2::new(0.8, 1.3));
    let (mu_pre, s_pre) = (Vector2::new(-0.3, 0.2), Vector2::new(1.1, 0.7));
    let model = GaussianPathField::new(mu.as_slice().to_vec(), s.as_slice().to_vec()).unwrap();
    let pre = GaussianPathField::new(mu_pre.as_slice().to_vec(), s_pre.as_slice().to_vec()).unwrap();
    let a = Matrix2::new(0.3, -0.2, 0.5, 0.1);
    let b = Vector2::new(0.4, -0.6);

    // 6 x 10 tensor grid, exact for the polynomial integrands here.
    let (g1, g2) = (gauss_hermite(6), gauss_hermite(10));
    let mut pts = Vec::new();
    let mut weights = Vec::new();
    for &(z1, w1) in &g1 {
        for &(z2, w2) in &g2 {
            pts.extend([mu[0] + s[0] * z1, mu[1] + s[1] * z2]);
            weights.push(w1 * w2);
        }
    }
    let x = DenseArray::from_vec(&[60, 2], pts).unwrap();
    let dummy = DenseArray::zeros(&[1, 2]);
    let snap = Snapshot {
        samples: &dummy,
        pre_samples: None,
        model: Some(&model as &dyn Field),
        pre: Some(&pre as &dyn Field),
    };
    let directional = |kind| {
        let g = grad_first_variation(&FunctionalSpec::new(kind), &snap, &x, &mut rng_from_seed(0)).unwrap();
        (0..60)
            .map(|i| {
                let xi = Vector2::new(x.row(i)[0], x.row(i)[1]);
                let v = a * xi + b;
                weights[i] * (g.row(i)[0] * v[0] + g.row(i)[1] * v[1])
            })
            .sum::<f64>()
    };

    let cov = Matrix2::from_diagonal(&s.component_mul(&s));
    let cov_pre = Matrix2::from_diagonal(&s_pre.component_mul(&s_pre));
    let pushed = |e: f64| {
        let m = Matrix2::identity() + a * e;
        (m * mu + b * e, m * cov * m.transpose())
    };
    let eps = 1e-5;
    let central = |f: &dyn Fn(&Vector2<f64>, &Matrix2<f64>) -> f64| {
        let (mp, cp) = pushed(eps);
        let (mm, cm) = pushed(-eps);
        (f(&mp, &cp) - f(&mm, &cm)) / (2.0 * eps)
    };

    let fd_entropy = central(&|_, c| entropy_of(c));
    assert!((fd_entropy - a.trace()).abs() < 1e-6);
    assert_rel(fd_entropy, directional(FunctionalKind::Entropy), 1e-2, "entropy");

    let fd_kl = central(&|m, c| kl_between(m, c, &mu_pre, &cov_pre));
    assert_rel(fd_kl, directional(FunctionalKind::KlToPre), 1e-2, "kl_to_pre");
}

#[test]
fn entropy_gradient_is_the_negated_gaussian_score() {
    let mean = vec![1.0, -0.5];
    let model = GaussianPathField::new(mean.clone(), vec![1.0, 1.0]).unwrap();
    let x = gaussian(5, 50, 2, &mean, 1.0);
    let snap = Snapshot {
        model: Some(&model),
        ..Snapshot::samples_only(&x)
    };
    let g = grad_first_variation(&FunctionalSpec::new(FunctionalKind::Entropy), &snap, &x, &mut rng_from_seed(0))
        .unwrap();
    for i in 0..50 {
        for k in 0..2 {
            assert!((g.row(i)[k] - (x.row(i)[k] - mean[k])).abs() < 5e-2);
        }
    }
}

#[test]
fn expectation_gradient_is_the_reward_slope() {
    let r = Arc::new(LinearReward {
        weights: vec![2.0, -3.0],
        offset: 1.0,
    });
    let x = gaussian(1, 10, 2, &[0.0, 0.0], 1.0);
    let spec = spec_with(FunctionalKind::Expectation, r);
    let g = grad_first_variation(&spec, &Snapshot::samples_only(&x), &x, &mut rng_from_seed(0)).unwrap();
    for row in g.iter_rows() {
        assert_eq!(row, &[2.0, -3.0]);
    }
    let flat = Arc::new(LinearReward {
        weights: vec![0.0, 0.0],
        offset: 4.25,
    });
    assert_eq!(value(&spec_with(FunctionalKind::Expectation, flat), &Snapshot::samples_only(&x)).unwrap(), 4.25);
}

#[test]
fn cvar_mask_matches_a_sort_oracle() {
    let r: Arc<dyn Reward> = Arc::new(QuadraticReward {
        center: vec![0.0, 0.0],
        scale: 1.0,
    });
    let half = gaussian(7, 100, 2, &[0.0, 0.0], 1.0);
    let mirrored = DenseArray::from_vec(&[100, 2], half.data().iter().map(|v| -v).collect()).unwrap();
    let x = half.vstack(&mirrored).unwrap();
    let spec = spec_with(FunctionalKind::Cvar, r.clone()).with_beta(0.5);
    let g = grad_first_variation(&spec, &Snapshot::samples_only(&x), &x, &mut rng_from_seed(0)).unwrap();

    let vals = reward_values(r.as_ref(), &x);
    let mut order: Vec<usize> = (0..200).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let mut inner = vec![false; 200];
    for &i in &order[..100] {
        inner[i] = true;
    }
    // Mirrored pairs tie; the inner half holds whole pairs.
    for i in 0..200 {
        let nonzero = g.row(i).iter().any(|v| *v != 0.0);
        assert_eq!(nonzero, inner[i] || vals[i] == vals[order[99]], "row {i}");
    }
    assert_eq!((0..200).filter(|&i| g.row(i).iter().any(|v| *v != 0.0)).count(), 100);
}

#[test]
fn scaling_the_reward_scales_values_and_keeps_masks() {
    let x = gaussian(9, 300, 2, &[0.0, 0.0], 1.0);
    let snap = Snapshot::samples_only(&x);
    let base = Arc::new(Wavy);
    struct Scaled(f64);
    impl Reward for Scaled {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            self.0 * Wavy.value(x)
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            Wavy.gradient(x).into_iter().map(|g| self.0 * g).collect()
        }
    }
    let c = 3.7;
    for kind in [FunctionalKind::Expectation, FunctionalKind::Cvar, FunctionalKind::Sq] {
        let a = spec_with(kind, base.clone()).with_beta(0.2);
        let b = spec_with(kind, Arc::new(Scaled(c))).with_beta(0.2);
        let (va, vb) = (value(&a, &snap).unwrap(), value(&b, &snap).unwrap());
        assert!((vb - c * va).abs() < 1e-10 * va.abs().max(1.0), "{kind}");
        let ga = grad_first_variation(&a, &snap, &x, &mut rng_from_seed(0)).unwrap();
        let gb = grad_first_variation(&b, &snap, &x, &mut rng_from_seed(0)).unwrap();
        for (p, q) in ga.iter_rows().zip(gb.iter_rows()) {
            assert_eq!(p[0] == 0.0, q[0] == 0.0);
        }
    }
}

#[test]
fn tail_decomposition_holds_on_random_sets() {
    let mut rng = rng_from_seed(77);
    for _ in 0..1000 {
        let n = rng.gen_range(2..200);
        let beta = rng.gen_range(0.01..0.99);
        let mut vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        if rng.gen_bool(0.3) {
            // Force ties.
            vals.iter_mut().for_each(|v| *v = v.round());
        }
        match tail_means(&vals, beta) {
            Ok((c, s, m)) => {
                assert!((beta * c + (1.0 - beta) * s - m).abs() < 1e-9, "n {n} beta {beta}");
                assert!(c <= m + 1e-12 && s >= m - 1e-12);
            }
            Err(Error::EmptyTail { .. }) => assert!(beta * (n as f64) < 1.0 || (1.0 - beta) * (n as f64) < 1.0),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn quantile_matches_a_sort_oracle() {
    let mut rng = rng_from_seed(3);
    for _ in 0..200 {
        let n = rng.gen_range(1..50);
        let vals: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let beta: f64 = rng.gen();
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        let pos = beta * (n - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        let expect = sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]);
        assert!((quantile(&vals, beta).unwrap() - expect).abs() < 1e-15);
    }
}

#[test]
fn mmd_identities() {
    let a = gaussian(1, 200, 2, &[0.0, 0.0], 1.0);
    let b = gaussian(2, 150, 2, &[0.5, 0.0], 1.0);
    assert!(mmd_squared(&a, &a, 0.8).abs() <= 1e-12);
    let spec = FunctionalSpec::new(FunctionalKind::MmdToPre);
    let same = Snapshot::samples_only(&a).with_pre(&a);
    assert!(value(&spec, &same).unwrap().abs() <= 1e-12);

    let mut spec = spec;
    spec.bandwidth = Some(0.9);
    let x = gaussian(3, 20, 2, &[0.0, 0.0], 1.5);
    let ab = grad_first_variation(&spec, &Snapshot::samples_only(&a).with_pre(&b), &x, &mut rng_from_seed(0)).unwrap();
    let ba = grad_first_variation(&spec, &Snapshot::samples_only(&b).with_pre(&a), &x, &mut rng_from_seed(0)).unwrap();
    for (p, q) in ab.data().iter().zip(ba.data()) {
        assert!((p + q).abs() < 1e-14);
    }
}

#[test]
fn critic_on_identical_distributions_is_flat() {
    let cfg = CriticConfig::default();
    let a = gaussian(10, 1024, 2, &[0.0, 0.0], 1.0);
    let b = gaussian(11, 1024, 2, &[0.0, 0.0], 1.0);
    let critic = train_critic(&a, &b, &cfg, &mut rng_from_seed(12)).unwrap();
    let gap = critic
        .gap(&gaussian(13, 4096, 2, &[0.0, 0.0], 1.0), &gaussian(14, 4096, 2, &[0.0, 0.0], 1.0))
        .unwrap();
    assert!(gap.abs() <= 0.05, "gap {gap}");
}

#[test]
fn critic_recovers_a_one_dimensional_shift() {
    let model = gaussian(20, 1024, 1, &[0.0], 0.1);
    let pre = gaussian(21, 1024, 1, &[1.0], 0.1);
    let critic = train_critic(&model, &pre, &CriticConfig::default(), &mut rng_from_seed(22)).unwrap();
    let gap = critic.gap(&model, &pre).unwrap();
    assert!((0.8..=1.1).contains(&gap), "gap {gap}");
    let gp = critic.interpolate_gradient_norm(&model, &pre, &mut rng_from_seed(23)).unwrap();
    assert!(gp <= 1.2, "interpolate gradient norm {gp}");
}

#[test]
fn anisotropic_critic_charges_vertical_moves_seven_times_more() {
    let cfg = CriticConfig {
        metric_scale: vec![1.0, 7.0],
        ..CriticConfig::default()
    };
    let pre = gaussian(30, 1024, 2, &[0.0, 0.0], 0.1);
    let shifted = |dx: f64, dy: f64| {
        let d: Vec<f64> = pre.data().iter().enumerate().map(|(k, v)| v + if k % 2 == 0 { dx } else { dy }).collect();
        DenseArray::from_vec(&[1024, 2], d).unwrap()
    };
    let (h, v) = (shifted(1.0, 0.0), shifted(0.0, 1.0));
    let gh = train_critic(&h, &pre, &cfg, &mut rng_from_seed(31)).unwrap().gap(&h, &pre).unwrap();
    let gv = train_critic(&v, &pre, &cfg, &mut rng_from_seed(32)).unwrap().gap(&v, &pre).unwrap();
    let ratio = gv / gh;
    assert!((ratio - 7.0).abs() <= 0.25 * 7.0, "vertical {gv}, horizontal {gh}");
}

#[test]
fn untrained_critic_and_small_sets_are_rejected() {
    let spec = FunctionalSpec::new(FunctionalKind::W1ToPre);
    let a = gaussian(1, 100, 2, &[0.0, 0.0], 1.0);
    let snap = Snapshot::samples_only(&a).with_pre(&a);
    assert!(matches!(value(&spec, &snap), Err(Error::UntrainedCritic)));
    assert!(FirstVariation::freeze(&spec, &snap, &mut rng_from_seed(0)).is_err());
}

#[test]
fn singular_design_is_rejected_with_its_condition() {
    let mut spec = FunctionalSpec::new(FunctionalKind::OedLogdet);
    spec.lambda = 1e-14;
    spec.features = Some(Arc::new(PolynomialFeatures { dim: 2, degree: 1 }));
    // Points on a line make the feature second moment rank two of three.
    let x = DenseArray::from_vec(&[4, 2], vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
    match FirstVariation::freeze(&spec, &Snapshot::samples_only(&x), &mut rng_from_seed(0)) {
        Err(Error::SingularMatrix { condition }) => assert!(condition > 1e12),
        other => panic!("expected a singular matrix, got {:?}", other.err()),
    }
}

#[test]
fn polynomial_feature_jacobian_matches_differences() {
    let f = PolynomialFeatures { dim: 3, degree: 2 };
    let x = [0.3, -1.2, 0.7];
    let jac = f.jacobian(&x);
    for j in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[j] += 1e-6;
        xm[j] -= 1e-6;
        let (fp, fm) = (f.features(&xp), f.features(&xm));
        for i in 0..f.output_dim() {
            assert!((jac[i * 3 + j] - (fp[i] - fm[i]) / 2e-6).abs() < 1e-8);
        }
    }
}

#[test]
fn knn_entropy_of_standard_gaussian_and_its_scaling() {
    let x = gaussian(1, 5000, 2, &[0.0, 0.0], 1.0);
    let (h, jitter) = knn_entropy(&x, 3).unwrap();
    let exact = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    assert!(!jitter);
    assert!((h - exact).abs() < 0.05, "{h} vs {exact}");
    let scaled = DenseArray::from_vec(&[5000, 2], x.data().iter().map(|v| 2.0 * v).collect()).unwrap();
    let (hs, _) = knn_entropy(&scaled, 3).unwrap();
    assert!((hs - h - 2.0 * 2f64.ln()).abs() < 1e-9);
}

#[test]
fn knn_entropy_of_a_unit_square_is_near_zero() {
    let mut rng = rng_from_seed(4);
    let data: Vec<f64> = (0..2 * 5000).map(|_| rng.gen::<f64>()).collect();
    let (h, _) = knn_entropy(&DenseArray::from_vec(&[5000, 2], data).unwrap(), 3).unwrap();
    assert!(h.abs() < 0.05, "{h}");
}

#[test]
fn duplicate_points_are_jittered_and_flagged() {
    let x = DenseArray::from_vec(&[6, 1], vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0]).unwrap();
    let (h, jitter) = knn_entropy(&x, 3).unwrap();
    assert!(jitter && h.is_finite());
}

#[test]
fn knn_kl_between_shifted_gaussians() {
    let p = gaussian(1, 4000, 2, &[0.0, 0.0], 1.0);
    let q = gaussian(2, 4000, 2, &[1.0, 0.0], 1.0);
    let kl = knn_kl(&p, &q, 3).unwrap();
    assert!((kl - 0.5).abs() < 0.1, "{kl}");
    let q2 = gaussian(3, 4000, 2, &[0.0, 0.0], 1.0);
    assert!(knn_kl(&p, &q2, 3).unwrap().abs() < 0.05);
}

#[test]
fn unsupported_kinds_are_explained() {
    for name in ["renyi", "modes"] {
        match name.parse::<FunctionalKind>() {
            Err(Error::Unsupported { reason, .. }) => assert!(!reason.is_empty()),
            other => panic!("{other:?}"),
        }
    }
    assert!("nope".parse::<FunctionalKind>().is_err());
    for kind in FunctionalKind::ALL {
        assert_eq!(kind.name().parse::<FunctionalKind>().unwrap(), kind);
    }
}

#[test]
fn invalid_specs_list_every_problem() {
    let mut spec = FunctionalSpec::new(FunctionalKind::Cvar).with_beta(1.5);
    spec.t_eps = 0.0;
    match spec.validate() {
        Err(Error::Config(errs)) => assert_eq!(errs.len(), 3, "{errs:?}"),
        other => panic!("{other:?}"),
    }
    let x = DenseArray::from_vec(&[5, 1], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let r = Arc::new(LinearReward {
        weights: vec![1.0],
        offset: 0.0,
    });
    let tiny = spec_with(FunctionalKind::Cvar, r).with_beta(0.1);
    assert!(matches!(value(&tiny, &Snapshot::samples_only(&x)), Err(Error::EmptyTail { n: 5, .. })));
}

#[test]
fn objective_combines_weighted_terms() {
    let x = gaussian(5, 40, 2, &[0.0, 0.0], 1.0);
    let pre = gaussian(6, 40, 2, &[0.5, 0.5], 1.0);
    let mut mmd = FunctionalSpec::new(FunctionalKind::MmdToPre);
    mmd.bandwidth = Some(1.0);
    let util = spec_with(FunctionalKind::Expectation, Arc::new(Wavy));
    let obj = Objective::regularized(util.clone(), mmd.clone(), 0.4);
    let snap = Snapshot::samples_only(&x).with_pre(&pre);
    let frozen = obj.freeze(&snap, &mut rng_from_seed(0)).unwrap();
    let g = frozen.gradient(&x).unwrap();
    let gu = grad_first_variation(&util, &snap, &x, &mut rng_from_seed(0)).unwrap();
    let gm = grad_first_variation(&mmd, &snap, &x, &mut rng_from_seed(0)).unwrap();
    for k in 0..g.len() {
        assert!((g.data()[k] - (gu.data()[k] - 0.4 * gm.data()[k])).abs() < 1e-12);
    }
    let v = frozen.value(&snap).unwrap();
    assert!((v - (value(&util, &snap).unwrap() - 0.4 * value(&mmd, &snap).unwrap())).abs() < 1e-12);
    assert_eq!(frozen.fingerprint(), obj.freeze(&snap, &mut rng_from_seed(0)).unwrap().fingerprint());
}
