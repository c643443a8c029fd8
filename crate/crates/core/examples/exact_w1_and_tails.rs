//! Evaluation helpers: exact W1 by assignment, tail means, k-NN entropy and
//! the mean-shift report.

use fdc_core::evalkit::{brute_force_w1, exact_w1, mc_entropy, mean_shift_report, tail_report, GroundMetric};
use fdc_core::numkit::{rng_from_seed, standard_normals, DenseArray};

fn cloud(seed: u64, n: usize, shift: [f64; 2], std: f64) -> DenseArray {
    let z = standard_normals(&mut rng_from_seed(seed), 2 * n);
    DenseArray::from_vec(&[n, 2], z.iter().enumerate().map(|(k, v)| shift[k % 2] + std * v).collect()).unwrap()
}

fn main() -> fdc_core::Result<()> {
    let small_a = cloud(0, 6, [0.0, 0.0], 1.0);
    let small_b = cloud(1, 6, [1.0, 0.0], 1.0);
    let e = GroundMetric::Euclidean;
    println!("n=6: assignment {:.6}, brute force {:.6}", exact_w1(&small_a, &small_b, &e)?, brute_force_w1(&small_a, &small_b, &e)?);

    // The same horizontal move is cheap under (1, 7) and expensive under (7, 1).
    let pre = cloud(2, 500, [0.0, 0.0], 0.5);
    let moved = cloud(3, 500, [1.0, 0.2], 0.5);
    for scale in [vec![1.0, 7.0], vec![7.0, 1.0]] {
        println!("W1 under {scale:?}: {:.3}", exact_w1(&pre, &moved, &GroundMetric::Weighted(scale.clone()))?);
    }
    let shift = mean_shift_report(&pre, &moved)?;
    println!("mean shift {:.3?}, horizontal/vertical {:.0}%", shift.delta, shift.ratio_percent);

    let values: Vec<f64> = moved.iter_rows().map(|r| r[0]).collect();
    let tails = tail_report(&values, 0.05)?;
    println!("{tails:?}");

    let (h, jittered) = mc_entropy(&pre, 3)?;
    let exact = (2.0 * std::f64::consts::PI * std::f64::consts::E * 0.25).ln();
    println!("k-NN entropy {h:.3} (exact {exact:.3}, jittered {jittered})");
    Ok(())
}
