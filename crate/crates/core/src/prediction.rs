//! Attention prediction on the shift-add datapath.
//!
//! Inputs and weights are HLog-quantized, multiplied on the SJA and summed by
//! the converter. The predicted Q and K are requantized to 8 bits and pushed
//! through the same datapath once more to give the predicted attention matrix
//! (PAM). Row-wise top-k over the PAM gives the sparsified prediction (SPA).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quant::{hlog_quantize, sja_multiply, Converter, HLogCode};
use crate::tensor::{quantize_value, symmetric_scale, Matrix, QTensor};

/// Pre-softmax predicted scores of one head, `L x L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pam {
    pub head: usize,
    pub scores: Matrix<i32>,
}

impl Pam {
    pub fn len(&self) -> usize {
        self.scores.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.rows() == 0
    }
}

/// PAM plus a per-row keep mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Spa {
    pam: Pam,
    keep: Matrix<bool>,
    k_ratio: f64,
}

impl Spa {
    /// Wraps an arbitrary mask. Only [`topk_rows`] guarantees the per-row kept count.
    pub fn from_mask(pam: Pam, keep: Matrix<bool>, k_ratio: f64) -> Result<Self> {
        if pam.scores.shape() != keep.shape() || pam.scores.rows() != pam.scores.cols() {
            return Err(Error::DimensionMismatch {
                op: "spa mask",
                left: pam.scores.shape(),
                right: keep.shape(),
            });
        }
        Ok(Self { pam, keep, k_ratio })
    }

    pub fn head(&self) -> usize {
        self.pam.head
    }

    pub fn len(&self) -> usize {
        self.pam.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pam.is_empty()
    }

    pub fn pam(&self) -> &Pam {
        &self.pam
    }

    pub fn mask(&self) -> &Matrix<bool> {
        &self.keep
    }

    pub fn k_ratio(&self) -> f64 {
        self.k_ratio
    }

    #[inline]
    pub fn is_kept(&self, i: usize, j: usize) -> bool {
        self.keep.get(i, j)
    }

    /// Score if kept, else zero.
    #[inline]
    pub fn masked(&self, i: usize, j: usize) -> i64 {
        if self.keep.get(i, j) {
            i64::from(self.pam.scores.get(i, j))
        } else {
            0
        }
    }

    pub fn kept_columns(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        self.keep
            .row(row)
            .iter()
            .enumerate()
            .filter_map(|(j, &k)| k.then_some(j))
    }

    pub fn kept_in_row(&self, row: usize) -> usize {
        self.keep.row(row).iter().filter(|&&k| k).count()
    }
}

fn hlog_matrix(t: &QTensor) -> Matrix<HLogCode> {
    Matrix::from_fn(t.rows(), t.cols(), |i, j| hlog_quantize(t.get(i, j)))
}

/// `out[i][j] = sum_t SJA(HLog(a[i][t]), HLog(b[t][j]))`, summed by the converter.
pub fn predict_matmul(a: &QTensor, b: &QTensor) -> Result<Matrix<i32>> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            op: "predict_matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    if a.cols() > Converter::MAX_TERMS {
        return Err(Error::InvalidParameter(format!(
            "inner dimension {} exceeds converter capacity",
            a.cols()
        )));
    }
    let qa = hlog_matrix(a);
    // columns of b laid out as rows
    let qb = hlog_matrix(&b.transpose());
    let mut conv = Converter::new();
    Ok(Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        conv.clear();
        for (&x, &w) in qa.row(i).iter().zip(qb.row(j)) {
            conv.push(sja_multiply(x, w));
        }
        conv.finish()
    }))
}

/// Symmetric per-tensor 8-bit requantization of predicted integers.
pub fn requantize8(m: &Matrix<i32>) -> QTensor {
    let max_abs = m
        .as_slice()
        .iter()
        .map(|v| f64::from(v.unsigned_abs()))
        .fold(0.0, f64::max);
    let scale = symmetric_scale(max_abs);
    let data = m
        .as_slice()
        .iter()
        .map(|&v| quantize_value(f64::from(v), scale))
        .collect();
    QTensor::new(m.rows(), m.cols(), data, scale).expect("scale is positive by construction")
}

/// Predicted attention of one head from the input and that head's `D x Dh` weight slices.
pub fn predict_attention(head: usize, x: &QTensor, wq: &QTensor, wk: &QTensor) -> Result<Pam> {
    if wq.shape() != wk.shape() {
        return Err(Error::DimensionMismatch {
            op: "predict_attention",
            left: wq.shape(),
            right: wk.shape(),
        });
    }
    let q = requantize8(&predict_matmul(x, wq)?);
    let k = requantize8(&predict_matmul(x, wk)?);
    let scores = predict_matmul(&q, &k.transpose())?;
    Ok(Pam { head, scores })
}

/// Predicted attention for every head; full `D x D` projections are split by column blocks.
pub fn predict_heads(x: &QTensor, wq: &QTensor, wk: &QTensor, heads: usize) -> Result<Vec<Pam>> {
    let d = wq.cols();
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(Error::InvalidParameter(format!(
            "{d} columns do not split into {heads} heads"
        )));
    }
    let dh = d / heads;
    (0..heads)
        .into_par_iter()
        .map(|h| {
            predict_attention(
                h,
                x,
                &wq.column_block(h * dh, dh),
                &wk.column_block(h * dh, dh),
            )
        })
        .collect()
}

/// Entries kept per row: `min(len, ceil(k_ratio * len))`, at least one.
///
/// Ratios parsed from decimal text carry binary rounding (`0.15 * 20` is
/// `3.0000000000000004`), so products within 1e-9 of an integer snap to it.
pub fn keep_count(k_ratio: f64, len: usize) -> usize {
    let exact = k_ratio * len as f64;
    let snapped = if (exact - exact.round()).abs() < 1e-9 {
        exact.round()
    } else {
        exact.ceil()
    };
    (snapped as usize).clamp(1, len.max(1)).min(len)
}

pub fn validate_k_ratio(k_ratio: f64) -> Result<()> {
    if k_ratio > 0.0 && k_ratio <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "top-k ratio {k_ratio} outside (0, 1]"
        )))
    }
}

/// Row-wise top-k: keeps the largest scores, ties to the smaller column.
pub fn topk_rows(pam: &Pam, k_ratio: f64) -> Result<Spa> {
    validate_k_ratio(k_ratio)?;
    let len = pam.len();
    let count = keep_count(k_ratio, len);
    let mut keep = Matrix::filled(len, len, false);
    let mut order: Vec<usize> = Vec::with_capacity(len);
    for i in 0..len {
        let row = pam.scores.row(i);
        order.clear();
        order.extend(0..len);
        // stable sort keeps ascending column order among equal scores
        order.sort_by(|&a, &b| row[b].cmp(&row[a]));
        for &j in &order[..count] {
            keep.set(i, j, true);
        }
    }
    Spa::from_mask(pam.clone(), keep, k_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(rows: usize, cols: usize, data: &[i8]) -> QTensor {
        QTensor::new(rows, cols, data.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn worked_operands() {
        let out = predict_matmul(&q(1, 1, &[42]), &q(1, 1, &[-18])).unwrap();
        assert_eq!(out.as_slice(), &[-768]);
        let zero = predict_matmul(&q(1, 1, &[0]), &q(1, 1, &[0])).unwrap();
        assert_eq!(zero.as_slice(), &[0]);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            predict_matmul(&q(1, 2, &[1, 2]), &q(1, 1, &[1])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn requantize_examples() {
        let t = requantize8(&Matrix::new(1, 2, vec![127, -127]).unwrap());
        assert_eq!((t.values().as_slice(), t.scale()), (&[127i8, -127][..], 1.0));
        let t = requantize8(&Matrix::new(1, 1, vec![254]).unwrap());
        assert_eq!((t.get(0, 0), t.scale()), (127, 2.0));
        let t = requantize8(&Matrix::filled(2, 2, 0));
        assert_eq!((t.values().as_slice(), t.scale()), (&[0i8; 4][..], 1.0));
    }

    #[test]
    fn topk_tie_rules() {
        let pam = Pam {
            head: 0,
            scores: Matrix::new(4, 4, vec![5, 9, 9, 1, 3, 3, 3, 3, 0, 0, 0, 0, 1, 2, 3, 4]).unwrap(),
        };
        let spa = topk_rows(&pam, 0.5).unwrap();
        assert_eq!(spa.kept_columns(0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(spa.kept_columns(1).collect::<Vec<_>>(), vec![0, 1]);
        let one = topk_rows(&pam, 0.25).unwrap();
        assert_eq!(one.kept_columns(1).collect::<Vec<_>>(), vec![0]);
        let all = topk_rows(&pam, 1.0).unwrap();
        assert!(all.mask().as_slice().iter().all(|&k| k));
        assert!(topk_rows(&pam, 0.0).is_err());
        assert!(topk_rows(&pam, 1.5).is_err());
    }

    #[test]
    fn keep_count_rounding() {
        assert_eq!(keep_count(0.1, 128), 13);
        assert_eq!(keep_count(0.15, 20), 3);
        assert_eq!(keep_count(0.2, 5), 1);
        assert_eq!(keep_count(0.01, 4), 1);
        assert_eq!(keep_count(1.0, 7), 7);
    }

    #[test]
    fn single_token_attention() {
        let x = q(1, 2, &[3, -4]);
        let w = q(2, 1, &[5, 6]);
        let pam = predict_attention(0, &x, &w, &w).unwrap();
        // HLog(3)*HLog(6) + HLog(-4)*HLog(6) = 18 - 24 = -6, requantized to -127 -> HLog 128
        assert_eq!(pam.scores.as_slice(), &[128 * 128]);
        assert_eq!(pam.scores.shape(), (1, 1));
    }

    #[test]
    fn zero_input_gives_zero_pam() {
        let x = q(3, 2, &[0; 6]);
        let w = q(2, 2, &[1, -2, 3, 4]);
        let pam = predict_attention(1, &x, &w, &w).unwrap();
        assert!(pam.scores.as_slice().iter().all(|&s| s == 0));
    }
}
