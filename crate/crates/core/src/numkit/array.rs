use crate::error::{Error, Result};

/// Row-major dense array of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseArray {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.iter().any(|&s| s == 0) || len != data.len() {
            return Err(Error::ShapeMismatch {
                context: "DenseArray::from_vec",
                expected: shape.to_vec(),
                found: vec![data.len()],
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Builds a `[rows.len(), d]` matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::ShapeMismatch {
                    context: "DenseArray::from_rows",
                    expected: vec![d],
                    found: vec![row.len()],
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(&[rows.len(), d], data)
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Number of rows of a matrix (first axis).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Product of all trailing axes.
    pub fn cols(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols().max(1))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn expect_shape(&self, context: &'static str, expected: &[usize]) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                context,
                expected: expected.to_vec(),
                found: self.shape.clone(),
            });
        }
        Ok(())
    }

    /// Requires a 2-D array with `cols` columns and returns its row count.
    pub fn expect_matrix(&self, context: &'static str, cols: usize) -> Result<usize> {
        if self.shape.len() != 2 || self.shape[1] != cols {
            return Err(Error::ShapeMismatch {
                context,
                expected: vec![self.rows(), cols],
                found: self.shape.clone(),
            });
        }
        Ok(self.shape[0])
    }

    /// Stacks two matrices with the same column count.
    pub fn vstack(&self, other: &DenseArray) -> Result<DenseArray> {
        if self.cols() != other.cols() {
            return Err(Error::ShapeMismatch {
                context: "DenseArray::vstack",
                expected: vec![other.rows(), self.cols()],
                found: other.shape.clone(),
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        let mut shape = self.shape.clone();
        shape[0] += other.rows();
        Ok(DenseArray { shape, data })
    }

    /// Column means of a matrix.
    pub fn column_means(&self) -> Vec<f64> {
        let c = self.cols();
        let mut mean = vec![0.0; c];
        for row in self.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Sample covariance (divisor n - 1) of the rows of a matrix.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let c = self.cols();
        let mean = self.column_means();
        let mut cov = vec![vec![0.0; c]; c];
        for row in self.iter_rows() {
            for i in 0..c {
                for j in 0..c {
                    cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        let denom = (self.rows().max(2) - 1) as f64;
        for r in cov.iter_mut() {
            r.iter_mut().for_each(|v| *v /= denom);
        }
        cov
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}
