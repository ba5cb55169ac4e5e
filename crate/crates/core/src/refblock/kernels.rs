//! Shared arithmetic for the dense and sparse block paths.
//!
//! Both paths call these kernels row by row, so a row computed by either path
//! goes through the same operations in the same order.

use std::ops::Range;

use crate::tensor::{quantize_row, QTensor};

pub(crate) const LN_EPS: f64 = 1e-12;

/// `out[j] = (sum_t x[t] * w[rows.start + t][cols.start + j]) * sx * sw`.
///
/// Integer accumulation makes the sum exact; the one dequantizing multiply is
/// applied per output. Adds `x.len() * cols.len()` to `macs`.
pub(crate) fn gemv(
    x: &[i8],
    sx: f64,
    w: &QTensor,
    rows: Range<usize>,
    cols: Range<usize>,
    out: &mut [f64],
    macs: &mut u64,
) {
    debug_assert_eq!(x.len(), rows.len());
    debug_assert_eq!(out.len(), cols.len());
    let mut acc = vec![0i32; cols.len()];
    let values = w.values();
    for (&xv, r) in x.iter().zip(rows) {
        if xv == 0 {
            continue;
        }
        let xv = i32::from(xv);
        for (a, &wv) in acc.iter_mut().zip(&values.row(r)[cols.clone()]) {
            *a += xv * i32::from(wv);
        }
    }
    *macs += (x.len() * out.len()) as u64;
    let s = sx * w.scale();
    for (o, a) in out.iter_mut().zip(acc) {
        *o = f64::from(a) * s;
    }
}

/// Real row requantized per row, then [`gemv`].
pub(crate) fn gemv_real(
    x: &[f64],
    w: &QTensor,
    rows: Range<usize>,
    cols: Range<usize>,
    out: &mut [f64],
    macs: &mut u64,
) {
    let mut q = vec![0i8; x.len()];
    let s = quantize_row(x, &mut q);
    gemv(&q, s, w, rows, cols, out, macs);
}

/// Left-to-right dot product.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Softmax over the listed scores; unlisted positions are `-inf` and get zero weight.
pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

pub(crate) fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], out: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    for (((o, &v), &g), &b) in out.iter_mut().zip(x).zip(gain).zip(bias) {
        *o = (v - mean) * inv * g + b;
    }
}

/// Tanh approximation: `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`.
pub(crate) fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemv_counts_and_scales() {
        let w = QTensor::new(2, 3, vec![1, 2, 3, 4, 5, 6], 0.5).unwrap();
        let mut out = [0.0; 2];
        let mut macs = 0;
        gemv(&[1, -1], 2.0, &w, 0..2, 1..3, &mut out, &mut macs);
        // (2 - 5, 3 - 6) * 2 * 0.5
        assert_eq!(out, [-3.0, -3.0]);
        assert_eq!(macs, 4);
    }

    #[test]
    fn softmax_normalizes() {
        let mut s = [1.0, 2.0, 3.0];
        softmax_in_place(&mut s);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s[2] > s[1] && s[1] > s[0]);
        let mut one = [-5.0];
        softmax_in_place(&mut one);
        assert_eq!(one, [1.0]);
    }

    #[test]
    fn layer_norm_zero_mean_unit_var() {
        let mut out = [0.0; 4];
        layer_norm(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4], &[0.0; 4], &mut out);
        let mean: f64 = out.iter().sum::<f64>() / 4.0;
        let var: f64 = out.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_191_990_608_276_8).abs() < 1e-12);
        assert!((gelu(-3.0) + 0.003_637_392_081_772_994).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn softmax_is_a_distribution(mut v in proptest::collection::vec(-1e3f64..1e3, 1..64)) {
            softmax_in_place(&mut v);
            let sum: f64 = v.iter().sum();
            proptest::prop_assert!((sum - 1.0).abs() < 1e-9);
            proptest::prop_assert!(v.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }

        #[test]
        fn layer_norm_centers(v in proptest::collection::vec(-50f64..50.0, 2..64)) {
            let n = v.len();
            let mut out = vec![0.0; n];
            layer_norm(&v, &vec![1.0; n], &vec![0.0; n], &mut out);
            let mean = out.iter().sum::<f64>() / n as f64;
            proptest::prop_assert!(mean.abs() < 1e-9);
        }
    }
}
