use rand::Rng;

use crate::error::{Error, Result};
use crate::numkit::{norm, AdamState, Activation, DenseArray, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct CriticConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub lambda_gp: f64,
    /// Per-coordinate ground-metric weights; empty means Euclidean.
    pub metric_scale: Vec<f64>,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            activation: Activation::Tanh,
            steps: 800,
            batch: 256,
            lr: 1e-3,
            lambda_gp: 10.0,
            metric_scale: Vec::new(),
        }
    }
}

/// Potential `f` whose gap `E_model f - E_pre f` lower-bounds W1 under the
/// weighted metric `|s * (x - y)|`. The network sees scaled inputs `s * x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticNet {
    net: Mlp,
    scale: Vec<f64>,
    lambda_gp: f64,
    /// Output multiplier `1 / max(1, L)` with `L` the mean interpolate
    /// gradient norm measured after training.
    output_scale: f64,
    trained: bool,
}

impl CriticNet {
    pub fn untrained<R: Rng + ?Sized>(dim: usize, cfg: &CriticConfig, rng: &mut R) -> Result<Self> {
        let scale = if cfg.metric_scale.is_empty() {
            vec![1.0; dim]
        } else if cfg.metric_scale.len() == dim && cfg.metric_scale.iter().all(|&s| s > 0.0) {
            cfg.metric_scale.clone()
        } else {
            return Err(Error::InvalidArgument(format!(
                "metric scale must have {dim} positive entries, got {:?}",
                cfg.metric_scale
            )));
        };
        let mut dims = vec![dim];
        dims.extend_from_slice(&cfg.hidden);
        dims.push(1);
        Ok(Self {
            net: Mlp::init(&dims, cfg.activation, rng)?,
            scale,
            lambda_gp: cfg.lambda_gp,
            output_scale: 1.0,
            trained: false,
        })
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn lambda_gp(&self) -> f64 {
        self.lambda_gp
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn metric_scale(&self) -> &[f64] {
        &self.scale
    }

    fn scaled(&self, x: &DenseArray) -> Result<Vec<f64>> {
        let d = self.scale.len();
        x.expect_matrix("critic input", d)?;
        Ok(x.data().iter().enumerate().map(|(k, v)| v * self.scale[k % d]).collect())
    }

    pub fn values(&self, x: &DenseArray) -> Result<Vec<f64>> {
        let mut v = self.net.forward_rows(&self.scaled(x)?, x.rows());
        v.iter_mut().for_each(|f| *f *= self.output_scale);
        Ok(v)
    }

    /// Gradient with respect to the original coordinates.
    pub fn gradients(&self, x: &DenseArray) -> Result<DenseArray> {
        if !self.trained {
            return Err(Error::UntrainedCritic);
        }
        let d = self.scale.len();
        let n = x.rows();
        let g = self.net.vjp_input_rows(&self.scaled(x)?, &vec![1.0; n], n);
        let c = self.output_scale;
        let g = g.iter().enumerate().map(|(k, v)| c * v * self.scale[k % d]).collect();
        DenseArray::from_vec(&[n, d], g)
    }

    /// `mean f(model) - mean f(pre)`.
    pub fn gap(&self, model: &DenseArray, pre: &DenseArray) -> Result<f64> {
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        Ok(mean(self.values(model)?) - mean(self.values(pre)?))
    }

    /// Mean gradient norm (in scaled coordinates) on random interpolates
    /// between the two sets.
    pub fn interpolate_gradient_norm<R: Rng + ?Sized>(&self, model: &DenseArray, pre: &DenseArray, rng: &mut R) -> Result<f64> {
        let d = self.scale.len();
        let n = model.rows().min(pre.rows());
        let (um, up) = (self.scaled(model)?, self.scaled(pre)?);
        let mut hat = Vec::with_capacity(n * d);
        for r in 0..n {
            let e: f64 = rng.gen();
            for i in 0..d {
                hat.push(e * um[r * d + i] + (1.0 - e) * up[r * d + i]);
            }
        }
        let g = self.net.vjp_input_rows(&hat, &vec![self.output_scale; n], n);
        Ok(g.chunks_exact(d).map(norm).sum::<f64>() / n as f64)
    }
}

/// Trains a critic by maximizing `E_model f - E_pre f - lambda_gp E max(0, |grad f| - 1)^2`
/// with the penalty on random interpolates, then divides the output by the
/// measured Lipschitz constant when it exceeds one.
pub fn train_critic<R: Rng + ?Sized>(
    model: &DenseArray,
    pre: &DenseArray,
    cfg: &CriticConfig,
    rng: &mut R,
) -> Result<CriticNet> {
    let d = model.cols();
    pre.expect_matrix("train_critic pre samples", d)?;
    if model.rows() < 256 || pre.rows() < 256 {
        return Err(Error::InvalidArgument(format!(
            "critic training needs at least 256 samples per set, got {} and {}",
            model.rows(),
            pre.rows()
        )));
    }
    let mut critic = CriticNet::untrained(d, cfg, rng)?;
    let (um, up) = (critic.scaled(model)?, critic.scaled(pre)?);
    let b = cfg.batch.max(1);
    let mut adam = AdamState::new(critic.net.num_params(), cfg.lr);
    let lambda = cfg.lambda_gp;
    for step in 0..cfg.steps {
        let mut both = Vec::with_capacity(2 * b * d);
        let mut hat = Vec::with_capacity(b * d);
        let picks: Vec<(usize, usize, f64)> = (0..b)
            .map(|_| (rng.gen_range(0..model.rows()), rng.gen_range(0..pre.rows()), rng.gen::<f64>()))
            .collect();
        for &(i, _, _) in &picks {
            both.extend_from_slice(&um[i * d..(i + 1) * d]);
        }
        for &(_, j, _) in &picks {
            both.extend_from_slice(&up[j * d..(j + 1) * d]);
        }
        for &(i, j, e) in &picks {
            for k in 0..d {
                hat.push(e * um[i * d + k] + (1.0 - e) * up[j * d + k]);
            }
        }
        let tape = critic.net.tape(&both, 2 * b);
        let mut cot = vec![-1.0 / b as f64; b];
        cot.extend(vec![1.0 / b as f64; b]);
        let mut grad = critic.net.backward_params(&tape, &cot);
        let (_, gp) = critic.net.input_grad_penalty(&hat, b, |g| {
            let n = norm(g);
            let c = 2.0 * lambda * (n - 1.0).max(0.0) / (b as f64 * n.max(1e-12));
            g.iter().map(|v| c * v).collect()
        });
        for (a, p) in grad.iter_mut().zip(&gp) {
            *a += p;
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                stage: "critic training",
                step,
            });
        }
        adam.step(critic.net.params_mut(), &grad);
    }
    critic.trained = true;
    let lip = critic.interpolate_gradient_norm(model, pre, rng)?;
    critic.output_scale = 1.0 / lip.max(1.0);
    Ok(critic)
}
