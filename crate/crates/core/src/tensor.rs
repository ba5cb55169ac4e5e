//! Dense row-major matrices and symmetric 8-bit tensors.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "matrix {rows}x{cols} needs {} elements, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Copy of columns `start..start + width`.
    pub fn column_block(&self, start: usize, width: usize) -> Self {
        Self::from_fn(self.rows, width, |i, j| self.get(i, start + j))
    }

    /// Copy of rows `start..start + height`.
    pub fn row_block(&self, start: usize, height: usize) -> Self {
        Self::from_fn(height, self.cols, |i, j| self.get(start + i, j))
    }
}

/// Symmetric per-tensor quantized 8-bit matrix: real value = `data * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTensor {
    values: Matrix<i8>,
    scale: f64,
}

impl QTensor {
    pub fn new(rows: usize, cols: usize, data: Vec<i8>, scale: f64) -> Result<Self> {
        Self::from_matrix(Matrix::new(rows, cols, data)?, scale)
    }

    pub fn from_matrix(values: Matrix<i8>, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tensor scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Self { values, scale })
    }

    pub fn values(&self) -> &Matrix<i8> {
        &self.values
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.values.get(i, j)
    }

    pub fn transpose(&self) -> Self {
        Self {
            values: self.values.transpose(),
            scale: self.scale,
        }
    }

    pub fn column_block(&self, start: usize, width: usize) -> Self {
        Self {
            values: self.values.column_block(start, width),
            scale: self.scale,
        }
    }

    pub fn row_block(&self, start: usize, height: usize) -> Self {
        Self {
            values: self.values.row_block(start, height),
            scale: self.scale,
        }
    }

    pub fn dequantize(&self) -> Matrix<f64> {
        Matrix::from_fn(self.rows(), self.cols(), |i, j| {
            f64::from(self.get(i, j)) * self.scale
        })
    }

    /// Symmetric per-tensor quantization of real values.
    pub fn quantize(m: &Matrix<f64>) -> Self {
        let max_abs = m.as_slice().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let scale = symmetric_scale(max_abs);
        let values = Matrix::from_fn(m.rows(), m.cols(), |i, j| quantize_value(m.get(i, j), scale));
        Self { values, scale }
    }
}

/// `max_abs / 127`, or 1 for an all-zero tensor.
pub fn symmetric_scale(max_abs: f64) -> f64 {
    if max_abs > 0.0 {
        max_abs / 127.0
    } else {
        1.0
    }
}

/// Round half away from zero, then clamp to `[-127, 127]`.
#[inline]
pub fn quantize_value(value: f64, scale: f64) -> i8 {
    let q = (value / scale).round();
    q.clamp(-127.0, 127.0) as i8
}

/// Per-row symmetric quantization: one scale per row.
pub fn quantize_row(row: &[f64], out: &mut [i8]) -> f64 {
    let max_abs = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let scale = symmetric_scale(max_abs);
    for (o, &v) in out.iter_mut().zip(row) {
        *o = quantize_value(v, scale);
    }
    scale
}
