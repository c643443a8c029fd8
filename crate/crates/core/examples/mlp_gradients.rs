//! Reverse-mode gradients of a small MLP, checked against central
//! differences, then used with Adam to fit a 1D curve.

use fdc_core::numkit::{grad_params, loss_value, rng_from_seed, Activation, AdamState, DenseArray, Expr, Mlp};

fn main() -> fdc_core::Result<()> {
    let mut mlp = Mlp::init(&[1, 16, 16, 1], Activation::Tanh, &mut rng_from_seed(1))?;
    let xs: Vec<f64> = (0..64).map(|i| -3.0 + 6.0 * i as f64 / 63.0).collect();
    let x = DenseArray::from_vec(&[64, 1], xs.clone())?;
    let target = DenseArray::from_vec(&[64, 1], xs.iter().map(|v| -v.sin()).collect())?;
    // mean_r |f(x_r) - sin(x_r)|^2
    let loss = Expr::weighted_residual(vec![1.0; 64], target, 1.0 / 64.0);

    let (_, grad) = grad_params(&mlp, &x, &loss)?;
    let mut worst: f64 = 0.0;
    for k in (0..mlp.num_params()).step_by(17) {
        let mut up = mlp.clone();
        let mut dn = mlp.clone();
        up.params_mut()[k] += 1e-6;
        dn.params_mut()[k] -= 1e-6;
        let fd = (loss_value(&up, &x, &loss)? - loss_value(&dn, &x, &loss)?) / 2e-6;
        worst = worst.max((fd - grad[k]).abs());
    }
    println!("max |backprop - central difference| {worst:.2e}");

    let mut adam = AdamState::new(mlp.num_params(), 1e-2);
    for step in 0..=2000 {
        let (value, grad) = grad_params(&mlp, &x, &loss)?;
        adam.step(mlp.params_mut(), &grad);
        if step % 500 == 0 {
            println!("step {step:>4} loss {value:.5}");
        }
    }
    Ok(())
}
