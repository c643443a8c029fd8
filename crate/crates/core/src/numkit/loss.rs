//! Scalar losses built from a fixed vocabulary on top of a network's output.

use super::array::DenseArray;
use super::mlp::Mlp;
use crate::error::{Error, Result};

/// Loss expression over the output `[B, d_out]` of a network.
#[derive(Debug, Clone)]
pub enum Expr {
    /// The network output itself.
    Output,
    /// `row_scale[r] * inner[r, :] + shift[r, :]`.
    Affine {
        inner: Box<Expr>,
        row_scale: Vec<f64>,
        shift: Option<DenseArray>,
    },
    /// Row-wise squared Euclidean norm, `[B, k] -> [B, 1]`.
    SquaredNorm(Box<Expr>),
    /// Sum of all entries, `-> [1]`.
    Sum(Box<Expr>),
    Scale(f64, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn affine(inner: Expr, row_scale: Vec<f64>, shift: Option<DenseArray>) -> Expr {
        Expr::Affine {
            inner: Box::new(inner),
            row_scale,
            shift,
        }
    }

    pub fn squared_norm(inner: Expr) -> Expr {
        Expr::SquaredNorm(Box::new(inner))
    }

    pub fn sum(inner: Expr) -> Expr {
        Expr::Sum(Box::new(inner))
    }

    pub fn scale(c: f64, inner: Expr) -> Expr {
        Expr::Scale(c, Box::new(inner))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    /// `weight * sum_r || row_scale[r] * out[r] + shift[r] ||^2`
    pub fn weighted_residual(row_scale: Vec<f64>, shift: DenseArray, weight: f64) -> Expr {
        Expr::scale(
            weight,
            Expr::sum(Expr::squared_norm(Expr::affine(Expr::Output, row_scale, Some(shift)))),
        )
    }

    pub fn eval(&self, out: &DenseArray) -> Result<DenseArray> {
        match self {
            Expr::Output => Ok(out.clone()),
            Expr::Affine {
                inner,
                row_scale,
                shift,
            } => {
                let mut v = inner.eval(out)?;
                if row_scale.len() != v.rows() {
                    return Err(Error::ShapeMismatch {
                        context: "Expr::Affine row scale",
                        expected: vec![v.rows()],
                        found: vec![row_scale.len()],
                    });
                }
                let c = v.cols();
                for (r, s) in row_scale.iter().enumerate() {
                    v.data_mut()[r * c..(r + 1) * c].iter_mut().for_each(|x| *x *= s);
                }
                if let Some(shift) = shift {
                    shift.expect_shape("Expr::Affine shift", v.shape())?;
                    for (x, s) in v.data_mut().iter_mut().zip(shift.data()) {
                        *x += s;
                    }
                }
                Ok(v)
            }
            Expr::SquaredNorm(inner) => {
                let v = inner.eval(out)?;
                let rows: Vec<f64> = v.iter_rows().map(|r| r.iter().map(|x| x * x).sum()).collect();
                DenseArray::from_vec(&[v.rows(), 1], rows)
            }
            Expr::Sum(inner) => {
                let v = inner.eval(out)?;
                Ok(DenseArray::scalar(v.data().iter().sum()))
            }
            Expr::Scale(c, inner) => {
                let mut v = inner.eval(out)?;
                v.data_mut().iter_mut().for_each(|x| *x *= c);
                Ok(v)
            }
            Expr::Add(a, b) => {
                let mut va = a.eval(out)?;
                let vb = b.eval(out)?;
                vb.expect_shape("Expr::Add", va.shape())?;
                for (x, y) in va.data_mut().iter_mut().zip(vb.data()) {
                    *x += y;
                }
                Ok(va)
            }
        }
    }

    /// Accumulates `upstream^T d self / d out` into `acc`.
    fn pullback(&self, out: &DenseArray, upstream: &DenseArray, acc: &mut DenseArray) -> Result<()> {
        match self {
            Expr::Output => {
                for (a, u) in acc.data_mut().iter_mut().zip(upstream.data()) {
                    *a += u;
                }
                Ok(())
            }
            Expr::Affine { inner, row_scale, .. } => {
                let mut g = upstream.clone();
                let c = g.cols();
                for (r, s) in row_scale.iter().enumerate() {
                    g.data_mut()[r * c..(r + 1) * c].iter_mut().for_each(|x| *x *= s);
                }
                inner.pullback(out, &g, acc)
            }
            Expr::SquaredNorm(inner) => {
                let mut v = inner.eval(out)?;
                let c = v.cols();
                for r in 0..v.rows() {
                    let u = upstream.data()[r];
                    v.data_mut()[r * c..(r + 1) * c].iter_mut().for_each(|x| *x *= 2.0 * u);
                }
                inner.pullback(out, &v, acc)
            }
            Expr::Sum(inner) => {
                let shape = inner.eval(out)?.shape().to_vec();
                let g = DenseArray::filled(&shape, upstream.data()[0]);
                inner.pullback(out, &g, acc)
            }
            Expr::Scale(c, inner) => {
                let mut g = upstream.clone();
                g.data_mut().iter_mut().for_each(|x| *x *= c);
                inner.pullback(out, &g, acc)
            }
            Expr::Add(a, b) => {
                a.pullback(out, upstream, acc)?;
                b.pullback(out, upstream, acc)
            }
        }
    }

    /// Value and gradient with respect to the network output.
    pub fn value_and_output_grad(&self, out: &DenseArray) -> Result<(f64, DenseArray)> {
        let v = self.eval(out)?;
        if v.len() != 1 {
            return Err(Error::NonScalarLoss(v.shape().to_vec()));
        }
        let mut acc = DenseArray::zeros(out.shape());
        self.pullback(out, &DenseArray::scalar(1.0), &mut acc)?;
        Ok((v.data()[0], acc))
    }
}

/// Loss value and parameter gradient of `loss(mlp(x))`.
pub fn grad_params(mlp: &Mlp, x: &DenseArray, loss: &Expr) -> Result<(f64, Vec<f64>)> {
    let n = x.expect_matrix("grad_params input", mlp.input_dim())?;
    let tape = mlp.tape(x.data(), n);
    let out = DenseArray::from_vec(&[n, mlp.output_dim()], tape.output())?;
    let (value, gout) = loss.value_and_output_grad(&out)?;
    Ok((value, mlp.backward_params(&tape, gout.data())))
}

/// Loss value only.
pub fn loss_value(mlp: &Mlp, x: &DenseArray, loss: &Expr) -> Result<f64> {
    let out = mlp.forward(x)?;
    let v = loss.eval(&out)?;
    if v.len() != 1 {
        return Err(Error::NonScalarLoss(v.shape().to_vec()));
    }
    Ok(v.data()[0])
}
