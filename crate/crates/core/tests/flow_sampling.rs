use fdc_core::flow::{
    integrate_ode, sample_memoryless, sample_ode, score_from_velocity, write_samples_csv, ConstantField, Field,
    GaussianPathField, LinearField, NoiseSchedule, VelocityField, ZeroField,
};
use fdc_core::numkit::{rng_from_seed, standard_normals, Activation, DenseArray};
use fdc_core::Error;

fn source_draws(seed: u64, n: usize, d: usize) -> Vec<f64> {
    standard_normals(&mut rng_from_seed(seed), n * d)
}

#[test]
fn zero_field_returns_the_source_draws() {
    let s = NoiseSchedule::deterministic(50).unwrap();
    let out = sample_ode(&ZeroField { dim: 2 }, 100, &s, &mut rng_from_seed(1)).unwrap();
    assert_eq!(out.data(), source_draws(1, 100, 2).as_slice());
}

#[test]
fn constant_field_translates() {
    let s = NoiseSchedule::deterministic(40).unwrap();
    let c = ConstantField { value: vec![1.5, -2.0] };
    let out = sample_ode(&c, 10, &s, &mut rng_from_seed(3)).unwrap();
    let x0 = source_draws(3, 10, 2);
    for (k, (y, x)) in out.data().iter().zip(&x0).enumerate() {
        assert!((y - x - c.value[k % 2]).abs() < 1e-12);
    }
}

#[test]
fn linear_contraction_matches_closed_form() {
    let steps = 1000;
    let s = NoiseSchedule::deterministic(steps).unwrap();
    let a = DenseArray::from_vec(&[2, 2], vec![-1.0, 0.0, 0.0, -1.0]).unwrap();
    let field = LinearField::new(a, vec![0.0, 0.0]).unwrap();
    let x0 = DenseArray::from_vec(&[3, 2], vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0]).unwrap();
    let out = integrate_ode(&field, &x0, &s).unwrap();
    let euler = (1.0 - 1.0 / steps as f64).powi(steps as i32);
    for (y, x) in out.data().iter().zip(x0.data()) {
        assert!((y - euler * x).abs() < 1e-12);
        assert!((y - (-1.0f64).exp() * x).abs() < 1e-2);
    }
}

#[test]
fn noiseless_sampler_with_zero_field_is_identity() {
    let s = NoiseSchedule::deterministic(20).unwrap();
    let traj = sample_memoryless(&ZeroField { dim: 2 }, 16, &s, &mut rng_from_seed(5)).unwrap();
    assert_eq!(traj.terminal().data(), traj.state(0));
    assert_eq!(traj.state(0), source_draws(5, 16, 2).as_slice());
}

#[test]
fn single_step_unrolls_exactly() {
    let s = NoiseSchedule::memoryless(1, 1.0).unwrap();
    let traj = sample_memoryless(&ZeroField { dim: 2 }, 8, &s, &mut rng_from_seed(9)).unwrap();
    let h = s.h();
    let (x0, eps) = (traj.state(0), traj.noise(0));
    for k in 0..16 {
        let want = x0[k] * (1.0 - h * s.drift_coeff(0.0)) + h.sqrt() * s.sigma(0.0) * eps[k];
        assert!((traj.terminal().data()[k] - want).abs() < 1e-14);
    }
}

#[test]
fn noiseless_sampler_reproduces_ode_pathwise() {
    let mut rng = rng_from_seed(12);
    let field = VelocityField::init(2, &[16, 16], Activation::Tanh, &mut rng).unwrap();
    let s = NoiseSchedule::deterministic(30).unwrap();
    let ode = sample_ode(&field, 64, &s, &mut rng_from_seed(4)).unwrap();
    let traj = sample_memoryless(&field, 64, &s, &mut rng_from_seed(4)).unwrap();
    assert_eq!(ode.data(), traj.terminal().data());
}

#[test]
fn trajectory_layouts_agree() {
    let s = NoiseSchedule::memoryless(5, 1.0).unwrap();
    let traj = sample_memoryless(&ZeroField { dim: 2 }, 3, &s, &mut rng_from_seed(0)).unwrap();
    let by_path = traj.states_by_path();
    assert_eq!(by_path.shape(), &[3, 6, 2]);
    for b in 0..3 {
        for i in 0..=5 {
            let j = (b * 6 + i) * 2;
            assert_eq!(&by_path.data()[j..j + 2], &traj.state(i)[b * 2..b * 2 + 2]);
        }
    }
    assert_eq!(traj.noises_by_path().shape(), &[3, 5, 2]);
    let t = traj.terminal();
    assert_eq!(t.data(), &by_path.data()[..].chunks(12).flat_map(|p| p[10..12].to_vec()).collect::<Vec<_>>()[..]);
}

/// Mean and standard deviation per coordinate.
fn moments(x: &DenseArray) -> (Vec<f64>, Vec<f64>) {
    let mean = x.column_means();
    let cov = x.covariance();
    (mean, (0..x.cols()).map(|i| cov[i][i].sqrt()).collect())
}

#[test]
fn stochastic_sampler_preserves_gaussian_marginal() {
    let field = GaussianPathField::new(vec![1.0, -0.5], vec![0.5, 1.5]).unwrap();
    let n = 100_000;
    for steps in [100, 400] {
        let s = NoiseSchedule::memoryless(steps, 1.0).unwrap();
        let x = sample_memoryless(&field, n, &s, &mut rng_from_seed(21)).unwrap().terminal();
        let (mean, std) = moments(&x);
        for i in 0..2 {
            let se_mean = field.std()[i] / (n as f64).sqrt();
            let se_std = field.std()[i] / (2.0 * n as f64).sqrt();
            assert!((mean[i] - field.mean()[i]).abs() < 3.0 * se_mean, "T={steps} mean {mean:?}");
            assert!((std[i] - field.std()[i]).abs() < 3.0 * se_std, "T={steps} std {std:?}");
        }
        let cov = x.covariance();
        assert!(cov[0][1].abs() < 3.0 * 0.75 / (n as f64).sqrt());
    }
}

#[test]
fn rescaled_noise_keeps_the_marginal() {
    let field = GaussianPathField::new(vec![2.0], vec![0.7]).unwrap();
    let n = 100_000;
    for sigma0 in [0.3, 2.0] {
        let s = NoiseSchedule::memoryless(200, sigma0).unwrap();
        let x = sample_memoryless(&field, n, &s, &mut rng_from_seed(8)).unwrap().terminal();
        let (mean, std) = moments(&x);
        assert!((mean[0] - 2.0).abs() < 3.0 * 0.7 / (n as f64).sqrt(), "sigma0={sigma0}: {mean:?}");
        assert!((std[0] - 0.7).abs() < 3.0 * 0.7 / (2.0 * n as f64).sqrt(), "sigma0={sigma0}: {std:?}");
    }
}

#[test]
fn score_of_standard_normal_data() {
    let field = GaussianPathField::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let x = DenseArray::from_vec(&[3, 2], vec![0.5, -1.0, 2.0, 0.3, -1.5, -0.2]).unwrap();
    let s = score_from_velocity(&field, &x, 1.0 - 1e-3).unwrap();
    for (si, xi) in s.data().iter().zip(x.data()) {
        assert!((si + xi).abs() < 1e-2);
    }
}

#[test]
fn score_of_shifted_normal_data() {
    let mu = [3.0, -1.0];
    let field = GaussianPathField::new(mu.to_vec(), vec![1.0, 1.0]).unwrap();
    let x = DenseArray::from_vec(&[2, 2], vec![2.5, 0.0, 4.0, -1.5]).unwrap();
    let s = score_from_velocity(&field, &x, 1.0 - 1e-3).unwrap();
    for (k, (si, xi)) in s.data().iter().zip(x.data()).enumerate() {
        assert!((si + (xi - mu[k % 2])).abs() < 1e-2);
    }
}

#[test]
fn score_scales_inversely_with_data() {
    let c = 3.0;
    let base = GaussianPathField::new(vec![0.5, 0.0], vec![0.8, 1.2]).unwrap();
    let scaled = GaussianPathField::new(vec![0.5 * c, 0.0], vec![0.8 * c, 1.2 * c]).unwrap();
    let t = 1.0 - 1e-4;
    let x = DenseArray::from_vec(&[2, 2], vec![0.3, -0.4, 1.0, 0.7]).unwrap();
    let cx = DenseArray::from_vec(&[2, 2], x.data().iter().map(|v| v * c).collect()).unwrap();
    let s = score_from_velocity(&base, &x, t).unwrap();
    let sc = score_from_velocity(&scaled, &cx, t).unwrap();
    for (a, b) in s.data().iter().zip(sc.data()) {
        assert!((b - a / c).abs() < 1e-2 * a.abs().max(1.0));
    }
}

#[test]
fn score_rejects_terminal_time() {
    let field = ZeroField { dim: 2 };
    let x = DenseArray::zeros(&[1, 2]);
    assert!(matches!(score_from_velocity(&field, &x, 1.0), Err(Error::InvalidArgument(_))));
    assert!(matches!(score_from_velocity(&field, &x, 1.5), Err(Error::InvalidArgument(_))));
    // At t = 0 the score is the source score -x.
    let x = DenseArray::from_vec(&[1, 2], vec![1.0, -2.0]).unwrap();
    assert_eq!(score_from_velocity(&field, &x, 0.0).unwrap().data(), &[-1.0, 2.0]);
}

#[test]
fn blow_up_names_the_step() {
    let a = DenseArray::from_vec(&[1, 1], vec![1e300]).unwrap();
    let field = LinearField::new(a, vec![0.0]).unwrap();
    let s = NoiseSchedule::deterministic(10).unwrap();
    let x0 = DenseArray::from_vec(&[1, 1], vec![1.0]).unwrap();
    match integrate_ode(&field, &x0, &s) {
        Err(Error::Diverged { step, .. }) => assert_eq!(step, 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn checkpoint_round_trip_preserves_velocities() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/v.ckpt");
    let field = VelocityField::init(2, &[8], Activation::Silu, &mut rng_from_seed(1)).unwrap();
    field.save(&path).unwrap();
    let back = VelocityField::load(&path).unwrap();
    let x = [0.2, -0.3];
    assert_eq!(field.velocity(&x, 1, 0.5), back.velocity(&x, 1, 0.5));
}

#[test]
fn samples_csv_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let x = DenseArray::from_vec(&[2, 2], vec![1.0, 2.5, -0.5, 0.0]).unwrap();
    write_samples_csv(&x, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "x0,x1\n1,2.5\n-0.5,0\n");
}
