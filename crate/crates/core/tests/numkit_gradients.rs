use fdc_core::numkit::{grad_params, rng_from_seed, Activation, DenseArray, Expr, Mlp};
use proptest::prelude::*;
use rand::Rng;

fn perturbed_net(seed: u64, dims: &[usize], act: Activation) -> Mlp {
    let mut rng = rng_from_seed(seed);
    let mut mlp = Mlp::init(dims, act, &mut rng).unwrap();
    for p in mlp.params_mut() {
        *p += rng.gen_range(-0.3..0.3);
    }
    mlp
}

#[test]
fn input_vjp_matches_finite_differences() {
    for seed in 0..20 {
        let act = if seed % 2 == 0 { Activation::Tanh } else { Activation::Silu };
        let mlp = perturbed_net(seed, &[3, 8, 8, 2], act);
        let mut rng = rng_from_seed(100 + seed);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cot: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let vjp = mlp.vjp_input_rows(&x, &cot, 1);
        let h = 1e-5;
        for i in 0..3 {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fp = mlp.forward_rows(&xp, 1);
            let fm = mlp.forward_rows(&xm, 1);
            let fd: f64 = (0..2).map(|o| cot[o] * (fp[o] - fm[o]) / (2.0 * h)).sum();
            let rel = (vjp[i] - fd).abs() / fd.abs().max(1e-3);
            assert!(rel < 1e-6, "seed {seed} coord {i}: {} vs {fd}", vjp[i]);
        }
        // The full Jacobian agrees with the VJP.
        let jac = mlp.jacobian(&x).unwrap();
        for i in 0..3 {
            let via_jac: f64 = (0..2).map(|o| cot[o] * jac.row(o)[i]).sum();
            assert!((via_jac - vjp[i]).abs() < 1e-12);
        }
    }
}

/// Penalty `sum_r (|g_r|^2 - 1)^2` on input gradients of a scalar network.
fn penalty_value(mlp: &Mlp, x: &[f64], n: usize) -> f64 {
    let (g, _) = mlp.input_grad_penalty(x, n, |g| vec![0.0; g.len()]);
    g.chunks(mlp.input_dim())
        .map(|r| {
            let s: f64 = r.iter().map(|v| v * v).sum();
            (s - 1.0).powi(2)
        })
        .sum()
}

#[test]
fn second_order_penalty_gradient_matches_finite_differences() {
    for seed in 0..20 {
        let act = if seed % 2 == 0 { Activation::Tanh } else { Activation::Silu };
        let mlp = perturbed_net(seed, &[2, 6, 5, 1], act);
        let mut rng = rng_from_seed(500 + seed);
        let n = 4;
        let x: Vec<f64> = (0..n * 2).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let (_, grad) = mlp.input_grad_penalty(&x, n, |g| {
            let s: f64 = g.iter().map(|v| v * v).sum();
            g.iter().map(|v| 4.0 * (s - 1.0) * v).collect()
        });
        let h = 1e-5;
        for i in 0..mlp.num_params() {
            let mut p = mlp.clone();
            p.params_mut()[i] += h;
            let mut m = mlp.clone();
            m.params_mut()[i] -= h;
            let fd = (penalty_value(&p, &x, n) - penalty_value(&m, &x, n)) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / fd.abs().max(1e-3);
            assert!(rel < 1e-5, "seed {seed} param {i}: {} vs {fd}", grad[i]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_is_batch_consistent(seed in 0u64..1000, n in 1usize..40) {
        let mlp = perturbed_net(seed, &[3, 7, 2], Activation::Tanh);
        let mut rng = rng_from_seed(seed + 1);
        let a: Vec<f64> = (0..n * 3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..5 * 3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut ab = a.clone();
        ab.extend_from_slice(&b);
        let mut stacked = mlp.forward_rows(&a, n);
        stacked.extend(mlp.forward_rows(&b, 5));
        prop_assert_eq!(mlp.forward_rows(&ab, n + 5), stacked);
    }

    #[test]
    fn gradient_of_sum_is_sum_of_gradients(seed in 0u64..1000) {
        let mlp = perturbed_net(seed, &[3, 5, 2], Activation::Silu);
        let mut rng = rng_from_seed(seed + 7);
        let x = DenseArray::from_vec(&[6, 3], (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let shift = DenseArray::from_vec(&[6, 2], (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let a = Expr::weighted_residual(vec![1.0; 6], shift, 1.0);
        let b = Expr::scale(0.3, Expr::sum(Expr::Output));
        let (_, ga) = grad_params(&mlp, &x, &a).unwrap();
        let (_, gb) = grad_params(&mlp, &x, &b).unwrap();
        let (_, gab) = grad_params(&mlp, &x, &Expr::add(a, b)).unwrap();
        for i in 0..ga.len() {
            prop_assert!((ga[i] + gb[i] - gab[i]).abs() < 1e-12);
        }
    }
}
