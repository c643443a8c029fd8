//! Small fully connected network with hand-written reverse mode.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (row-major, `out x in`) followed by the bias. Hidden layers apply the
//! activation; the output layer is affine.
//!
//! Batched entry points split rows into fixed-size chunks that are processed in
//! parallel and reduced in chunk order, so results are bitwise independent of
//! the worker count.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;

use super::array::{axpy, dot, DenseArray};
use crate::error::{Error, Result};

/// Rows per parallel work unit.
pub const ROW_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Silu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => fast_tanh(z),
            Activation::Silu => z / (1.0 + (-z).exp()),
        }
    }

    /// Derivative given both the pre-activation and the activation value.
    #[inline]
    fn derivative_at(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Silu => self.derivative(z),
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = fast_tanh(z);
                1.0 - t * t
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
        }
    }

    #[inline]
    fn second_derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = fast_tanh(z);
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Silu => "silu",
        }
    }
}

/// `1 - 2 / (e^{2z} + 1)`; about twice as fast as libm `tanh`, absolute error
/// below 1e-15.
#[inline]
fn fast_tanh(z: f64) -> f64 {
    let e = (2.0 * z).exp();
    1.0 - 2.0 / (e + 1.0)
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "silu" => Ok(Activation::Silu),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation `{other}` (expected tanh or silu)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Activations recorded by a forward pass over a contiguous block of rows.
#[derive(Debug, Clone)]
pub struct Tape {
    rows: usize,
    /// `acts[0]` is the input, `acts[L]` the output.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
}

impl Tape {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape has at least one layer")
    }
}

/// Forward record for a whole batch, one tape per row chunk.
#[derive(Debug, Clone)]
pub struct BatchTape {
    chunks: Vec<Tape>,
    rows: usize,
}

impl BatchTape {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn output(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.chunks {
            out.extend_from_slice(c.output());
        }
        out
    }

    /// Joins tapes recorded by separate calls, in order.
    pub fn concat(parts: Vec<BatchTape>) -> BatchTape {
        let rows = parts.iter().map(|p| p.rows).sum();
        let chunks = parts.into_iter().flat_map(|p| p.chunks).collect();
        BatchTape { chunks, rows }
    }
}

impl Mlp {
    /// Zero-initialized network with the given layer widths.
    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!(
                "layer dims must list at least input and output widths, all positive: {dims:?}"
            )));
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0;
        for w in dims.windows(2) {
            offsets.push(total);
            total += (w[0] + 1) * w[1];
        }
        offsets.push(total);
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            params: vec![0.0; total],
            offsets,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(dims, activation)?;
        for l in 0..mlp.num_layers() {
            let (fan_in, fan_out) = (mlp.dims[l], mlp.dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            let start = mlp.offsets[l];
            for w in &mut mlp.params[start..start + fan_in * fan_out] {
                *w = dist.sample(rng);
            }
        }
        Ok(mlp)
    }

    /// Single affine layer `x -> x`.
    pub fn identity(dim: usize) -> Result<Self> {
        let mut mlp = Self::zeros(&[dim, dim], Activation::Tanh)?;
        for i in 0..dim {
            mlp.params[i * dim + i] = 1.0;
        }
        Ok(mlp)
    }

    pub fn from_params(dims: &[usize], activation: Activation, params: Vec<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(dims, activation)?;
        if params.len() != mlp.params.len() {
            return Err(Error::ShapeMismatch {
                context: "Mlp::from_params",
                expected: vec![mlp.params.len()],
                found: vec![params.len()],
            });
        }
        mlp.params = params;
        Ok(mlp)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight matrix (row-major `out x in`) and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (fi, fo) = (self.dims[l], self.dims[l + 1]);
        let start = self.offsets[l];
        let (w, rest) = self.params[start..self.offsets[l + 1]].split_at(fi * fo);
        (w, rest)
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (fi, fo) = (self.dims[l], self.dims[l + 1]);
        let (start, end) = (self.offsets[l], self.offsets[l + 1]);
        self.params[start..end].split_at_mut(fi * fo)
    }

    /// Shape-checked batched evaluation.
    pub fn forward(&self, x: &DenseArray) -> Result<DenseArray> {
        let n = x.expect_matrix("Mlp::forward input", self.input_dim())?;
        let out = self.forward_rows(x.data(), n);
        DenseArray::from_vec(&[n, self.output_dim()], out)
    }

    /// Evaluates `n` rows stored contiguously in `x`.
    pub fn forward_rows(&self, x: &[f64], n: usize) -> Vec<f64> {
        assert_eq!(x.len(), n * self.input_dim(), "forward_rows: input length");
        let din = self.input_dim();
        let dout = self.output_dim();
        let parts: Vec<Vec<f64>> = x
            .par_chunks(ROW_CHUNK * din)
            .map(|chunk| self.forward_block(chunk, chunk.len() / din))
            .collect();
        let mut out = Vec::with_capacity(n * dout);
        for p in parts {
            out.extend(p);
        }
        out
    }

    fn forward_block(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut cur = x.to_vec();
        let last = self.num_layers() - 1;
        for l in 0..=last {
            let (fi, fo) = (self.dims[l], self.dims[l + 1]);
            let (w, b) = self.layer(l);
            let mut next = vec![0.0; n * fo];
            for r in 0..n {
                let xin = &cur[r * fi..(r + 1) * fi];
                let y = &mut next[r * fo..(r + 1) * fo];
                for o in 0..fo {
                    let z = dot(&w[o * fi..(o + 1) * fi], xin) + b[o];
                    y[o] = if l < last { self.activation.apply(z) } else { z };
                }
            }
            cur = next;
        }
        cur
    }

    fn tape_block(&self, x: &[f64], n: usize) -> Tape {
        let last = self.num_layers() - 1;
        let mut acts = Vec::with_capacity(self.dims.len());
        let mut pre = Vec::with_capacity(last);
        acts.push(x.to_vec());
        for l in 0..=last {
            let (fi, fo) = (self.dims[l], self.dims[l + 1]);
            let (w, b) = self.layer(l);
            let cur = &acts[l];
            let mut z = vec![0.0; n * fo];
            for r in 0..n {
                let xin = &cur[r * fi..(r + 1) * fi];
                let zr = &mut z[r * fo..(r + 1) * fo];
                for o in 0..fo {
                    zr[o] = dot(&w[o * fi..(o + 1) * fi], xin) + b[o];
                }
            }
            if l < last {
                let a: Vec<f64> = z.iter().map(|&v| self.activation.apply(v)).collect();
                pre.push(z);
                acts.push(a);
            } else {
                acts.push(z);
            }
        }
        Tape { rows: n, acts, pre }
    }

    /// Forward pass over a batch that keeps what the backward pass needs.
    pub fn tape(&self, x: &[f64], n: usize) -> BatchTape {
        assert_eq!(x.len(), n * self.input_dim(), "tape: input length");
        let din = self.input_dim();
        let chunks = x
            .par_chunks(ROW_CHUNK * din)
            .map(|chunk| self.tape_block(chunk, chunk.len() / din))
            .collect();
        BatchTape { chunks, rows: n }
    }

    /// Reverse pass over one chunk. Accumulates into `param_grad` when given and
    /// returns the input cotangent when requested.
    fn backward_block(
        &self,
        tape: &Tape,
        grad_out: &[f64],
        mut param_grad: Option<&mut [f64]>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let n = tape.rows;
        let last = self.num_layers() - 1;
        let mut g = grad_out.to_vec();
        for l in (0..=last).rev() {
            let (fi, fo) = (self.dims[l], self.dims[l + 1]);
            let (w, _) = self.layer(l);
            let a_prev = &tape.acts[l];
            if let Some(pg) = param_grad.as_deref_mut() {
                let start = self.offsets[l];
                let (gw, gb) = pg[start..self.offsets[l + 1]].split_at_mut(fi * fo);
                for r in 0..n {
                    let gr = &g[r * fo..(r + 1) * fo];
                    let ar = &a_prev[r * fi..(r + 1) * fi];
                    for o in 0..fo {
                        if gr[o] != 0.0 {
                            axpy(gr[o], ar, &mut gw[o * fi..(o + 1) * fi]);
                        }
                        gb[o] += gr[o];
                    }
                }
            }
            if l == 0 && !want_input {
                return None;
            }
            let mut gp = vec![0.0; n * fi];
            for r in 0..n {
                let gr = &g[r * fo..(r + 1) * fo];
                let gpr = &mut gp[r * fi..(r + 1) * fi];
                for o in 0..fo {
                    if gr[o] != 0.0 {
                        axpy(gr[o], &w[o * fi..(o + 1) * fi], gpr);
                    }
                }
            }
            if l > 0 {
                let z = &tape.pre[l - 1];
                for ((gv, &zv), &av) in gp.iter_mut().zip(z).zip(a_prev) {
                    *gv *= self.activation.derivative_at(zv, av);
                }
            }
            g = gp;
        }
        Some(g)
    }

    /// Parameter gradient of `sum(grad_out * output)` for a recorded batch.
    pub fn backward_params(&self, tape: &BatchTape, grad_out: &[f64]) -> Vec<f64> {
        let dout = self.output_dim();
        assert_eq!(grad_out.len(), tape.rows * dout, "backward_params: cotangent length");
        let mut offsets = Vec::with_capacity(tape.chunks.len());
        let mut acc = 0;
        for c in &tape.chunks {
            offsets.push(acc);
            acc += c.rows * dout;
        }
        let partials: Vec<Vec<f64>> = tape
            .chunks
            .par_iter()
            .zip(offsets.par_iter())
            .map(|(chunk, &off)| {
                let mut pg = vec![0.0; self.num_params()];
                self.backward_block(chunk, &grad_out[off..off + chunk.rows * dout], Some(&mut pg), false);
                pg
            })
            .collect();
        let mut total = vec![0.0; self.num_params()];
        for p in partials {
            for (t, v) in total.iter_mut().zip(&p) {
                *t += v;
            }
        }
        total
    }

    /// Row-wise vector-Jacobian products `cot[r]^T d out / d x[r]`.
    pub fn vjp_input_rows(&self, x: &[f64], cot: &[f64], n: usize) -> Vec<f64> {
        self.forward_and_vjp_rows(x, cot, n).1
    }

    /// Outputs together with the row-wise input VJPs, from one forward pass.
    pub fn forward_and_vjp_rows(&self, x: &[f64], cot: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
        let (din, dout) = (self.input_dim(), self.output_dim());
        assert_eq!(x.len(), n * din, "vjp_input_rows: input length");
        assert_eq!(cot.len(), n * dout, "vjp_input_rows: cotangent length");
        let parts: Vec<(Vec<f64>, Vec<f64>)> = x
            .par_chunks(ROW_CHUNK * din)
            .zip(cot.par_chunks(ROW_CHUNK * dout))
            .map(|(xc, cc)| {
                let tape = self.tape_block(xc, xc.len() / din);
                let g = self.backward_block(&tape, cc, None, true).expect("input gradient requested");
                (tape.output().to_vec(), g)
            })
            .collect();
        let mut out = Vec::with_capacity(n * dout);
        let mut grad = Vec::with_capacity(n * din);
        for (o, g) in parts {
            out.extend(o);
            grad.extend(g);
        }
        (out, grad)
    }

    /// Shape-checked vector-Jacobian product with respect to the input.
    pub fn grad_input(&self, x: &DenseArray, cotangent: &DenseArray) -> Result<DenseArray> {
        let n = x.expect_matrix("Mlp::grad_input input", self.input_dim())?;
        cotangent.expect_shape("Mlp::grad_input cotangent", &[n, self.output_dim()])?;
        let g = self.vjp_input_rows(x.data(), cotangent.data(), n);
        DenseArray::from_vec(&[n, self.input_dim()], g)
    }

    /// Full Jacobian `[d_out, d_in]` at a single input row.
    pub fn jacobian(&self, x: &[f64]) -> Result<DenseArray> {
        let (din, dout) = (self.input_dim(), self.output_dim());
        if x.len() != din {
            return Err(Error::ShapeMismatch {
                context: "Mlp::jacobian",
                expected: vec![din],
                found: vec![x.len()],
            });
        }
        if din > 8 || dout > 8 {
            return Err(Error::InvalidArgument(format!(
                "full Jacobian limited to 8x8, network is {dout}x{din}"
            )));
        }
        let tape = self.tape_block(x, 1);
        let mut jac = DenseArray::zeros(&[dout, din]);
        for o in 0..dout {
            let mut e = vec![0.0; dout];
            e[o] = 1.0;
            let row = self.backward_block(&tape, &e, None, true).unwrap();
            jac.row_mut(o).copy_from_slice(&row);
        }
        Ok(jac)
    }

    /// For a scalar-output network: input gradients `g_r = d f / d x_r` for every
    /// row, and the parameter gradient of `sum_r P(g_r)` where `penalty` returns
    /// `dP/dg` for a row's input gradient.
    pub fn input_grad_penalty<F>(&self, x: &[f64], n: usize, penalty: F) -> (Vec<f64>, Vec<f64>)
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        assert_eq!(self.output_dim(), 1, "input_grad_penalty needs a scalar output");
        let din = self.input_dim();
        let parts: Vec<(Vec<f64>, Vec<f64>)> = x
            .par_chunks(ROW_CHUNK * din)
            .map(|xc| {
                let rows = xc.len() / din;
                let tape = self.tape_block(xc, rows);
                let mut pg = vec![0.0; self.num_params()];
                let mut grads = Vec::with_capacity(xc.len());
                for r in 0..rows {
                    let g = self.penalty_row(&tape, r, &penalty, &mut pg);
                    grads.extend(g);
                }
                (grads, pg)
            })
            .collect();
        let mut grads = Vec::with_capacity(n * din);
        let mut total = vec![0.0; self.num_params()];
        for (g, pg) in parts {
            grads.extend(g);
            for (t, v) in total.iter_mut().zip(&pg) {
                *t += v;
            }
        }
        (grads, total)
    }

    /// Second-order pass for one row: backpropagates through the input-gradient
    /// computation itself.
    fn penalty_row<F>(&self, tape: &Tape, r: usize, penalty: &F, pg: &mut [f64]) -> Vec<f64>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let last = self.num_layers() - 1;
        let act = self.activation;
        // delta[l]: gradient of f w.r.t. acts[l]; s[l]: w.r.t. pre[l].
        let mut delta: Vec<Vec<f64>> = vec![Vec::new(); last + 1];
        let mut s: Vec<Vec<f64>> = vec![Vec::new(); last];
        delta[last] = self.layer(last).0.to_vec();
        for l in (0..last).rev() {
            let (fi, fo) = (self.dims[l], self.dims[l + 1]);
            let z = &tape.pre[l][r * fo..(r + 1) * fo];
            let sl: Vec<f64> = z.iter().zip(&delta[l + 1]).map(|(&zv, &d)| act.derivative(zv) * d).collect();
            let (w, _) = self.layer(l);
            let mut dl = vec![0.0; fi];
            for o in 0..fo {
                axpy(sl[o], &w[o * fi..(o + 1) * fi], &mut dl);
            }
            s[l] = sl;
            delta[l] = dl;
        }
        let g = delta[0].clone();
        let gbar = penalty(&g);

        // Reverse of the input-gradient chain.
        let mut zbar: Vec<Vec<f64>> = (0..last).map(|l| vec![0.0; self.dims[l + 1]]).collect();
        let mut dbar = gbar;
        for l in 0..last {
            let (fi, fo) = (self.dims[l], self.dims[l + 1]);
            let start = self.offsets[l];
            {
                let gw = &mut pg[start..start + fi * fo];
                for o in 0..fo {
                    axpy(s[l][o], &dbar, &mut gw[o * fi..(o + 1) * fi]);
                }
            }
            let (w, _) = self.layer(l);
            let sbar: Vec<f64> = (0..fo).map(|o| dot(&w[o * fi..(o + 1) * fi], &dbar)).collect();
            let z = &tape.pre[l][r * fo..(r + 1) * fo];
            let mut next = vec![0.0; fo];
            for o in 0..fo {
                next[o] = act.derivative(z[o]) * sbar[o];
                zbar[l][o] += act.second_derivative(z[o]) * delta[l + 1][o] * sbar[o];
            }
            dbar = next;
        }
        // delta[last] is the output weight row.
        {
            let fi = self.dims[last];
            let start = self.offsets[last];
            for (gw, d) in pg[start..start + fi].iter_mut().zip(&dbar) {
                *gw += d;
            }
        }
        // Pre-activation cotangents flow back through the forward graph.
        for l in (0..last).rev() {
            let (fi, fo) = (self.dims[l], self.dims[l + 1]);
            let a_prev = &tape.acts[l][r * fi..(r + 1) * fi];
            let start = self.offsets[l];
            let zb = std::mem::take(&mut zbar[l]);
            {
                let (gw, gb) = pg[start..self.offsets[l + 1]].split_at_mut(fi * fo);
                for o in 0..fo {
                    axpy(zb[o], a_prev, &mut gw[o * fi..(o + 1) * fi]);
                    gb[o] += zb[o];
                }
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                let zprev = &tape.pre[l - 1][r * fi..(r + 1) * fi];
                let mut abar = vec![0.0; fi];
                for o in 0..fo {
                    axpy(zb[o], &w[o * fi..(o + 1) * fi], &mut abar);
                }
                for i in 0..fi {
                    zbar[l - 1][i] += act.derivative(zprev[i]) * abar[i];
                }
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-line re-implementation used as an independent oracle.
    fn naive_forward(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for l in 0..mlp.num_layers() {
            let (fi, fo) = (mlp.dims()[l], mlp.dims()[l + 1]);
            let (w, b) = mlp.layer(l);
            let mut next = Vec::new();
            for o in 0..fo {
                let mut z = b[o];
                for i in 0..fi {
                    z += w[o * fi + i] * cur[i];
                }
                next.push(if l + 1 < mlp.num_layers() { z.tanh() } else { z });
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn parameter_count_formula() {
        let mlp = Mlp::zeros(&[3, 64, 64, 2], Activation::Tanh).unwrap();
        assert_eq!(mlp.num_params(), 4 * 64 + 65 * 64 + 65 * 2);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::zeros(&[3, 8, 2], Activation::Silu).unwrap();
        let x = DenseArray::from_vec(&[2, 3], vec![1.0, -2.0, 0.5, 3.0, 0.1, 0.0]).unwrap();
        assert!(mlp.forward(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_network_is_identity() {
        let mlp = Mlp::identity(3).unwrap();
        let x = DenseArray::from_vec(&[1, 3], vec![0.3, -0.1, 0.5]).unwrap();
        assert_eq!(mlp.forward(&x).unwrap().data(), x.data());
    }

    #[test]
    fn seeded_net_matches_naive_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut mlp = Mlp::init(&[3, 16, 2], Activation::Tanh, &mut rng).unwrap();
        for p in mlp.params_mut() {
            *p += 0.1;
        }
        let x = [0.3, -0.1, 0.5];
        let got = mlp.forward_rows(&x, 1);
        let want = naive_forward(&mlp, &x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14, "{g} vs {w}");
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let mlp = Mlp::zeros(&[3, 4, 2], Activation::Tanh).unwrap();
        let x = DenseArray::zeros(&[5, 2]);
        assert!(matches!(mlp.forward(&x), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn linear_net_jacobian_is_weight() {
        let mut mlp = Mlp::zeros(&[2, 3], Activation::Tanh).unwrap();
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        mlp.layer_mut(0).0.copy_from_slice(&w);
        let jac = mlp.jacobian(&[0.7, -0.2]).unwrap();
        assert_eq!(jac.data(), &w);
    }

    #[test]
    fn tanh_jacobian_at_origin_is_weight_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = Mlp::init(&[2, 3, 2], Activation::Tanh, &mut rng).unwrap();
        let jac = mlp.jacobian(&[0.0, 0.0]).unwrap();
        let (w0, _) = mlp.layer(0);
        let (w1, _) = mlp.layer(1);
        for o in 0..2 {
            for i in 0..2 {
                let want: f64 = (0..3).map(|h| w1[o * 3 + h] * w0[h * 2 + i]).sum();
                assert!((jac.row(o)[i] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn batched_forward_equals_rowwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::init(&[3, 10, 10, 2], Activation::Silu, &mut rng).unwrap();
        let n = 600;
        let x: Vec<f64> = (0..n * 3).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
        let batched = mlp.forward_rows(&x, n);
        for r in (0..n).step_by(97) {
            let single = mlp.forward_rows(&x[r * 3..r * 3 + 3], 1);
            assert_eq!(&batched[r * 2..r * 2 + 2], single.as_slice());
        }
    }
}
