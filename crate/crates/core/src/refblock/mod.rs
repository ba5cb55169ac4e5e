//! Reference transformer block with dense and plan-driven sparse execution.
//!
//! Weight GEMMs run on 8-bit integers with exact 32-bit accumulation and are
//! dequantized with the tensor scales. Activations entering a weight GEMM are
//! requantized per row (per row and head for attention outputs), so each row
//! of a GEMM depends on that row alone. Softmax, layer norm and the attention
//! products run in `f64` with fixed left-to-right accumulation.

mod kernels;
mod macs;
mod synthetic;

pub use macs::{reduction_report, MacCount, ReductionReport};
pub use synthetic::{synthetic_block, synthetic_input, synthetic_weights};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use self::kernels::{dot, gelu, gemv, gemv_real, layer_norm, softmax_in_place};
use crate::error::{Error, Result};
use crate::sparsity::{Role, SparsityPlan};
use crate::tensor::{Matrix, QTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    /// `D x D`; head `h` owns columns `h Dh .. (h+1) Dh`.
    pub wq: QTensor,
    pub wk: QTensor,
    pub wv: QTensor,
    /// `D x D`; head `h` owns rows `h Dh .. (h+1) Dh`.
    pub wo: QTensor,
    /// `D x d_ff`
    pub w1: QTensor,
    /// `d_ff x D`
    pub w2: QTensor,
    pub ln1_gain: Vec<f64>,
    pub ln1_bias: Vec<f64>,
    pub ln2_gain: Vec<f64>,
    pub ln2_bias: Vec<f64>,
    pub heads: usize,
}

impl BlockWeights {
    pub fn d_model(&self) -> usize {
        self.wq.rows()
    }

    pub fn d_ff(&self) -> usize {
        self.w1.cols()
    }

    pub fn head_dim(&self) -> usize {
        self.d_model() / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d_model();
        let f = self.d_ff();
        if self.heads == 0 || !d.is_multiple_of(self.heads) {
            return Err(Error::InvalidParameter(format!(
                "d_model {d} is not divisible into {} heads",
                self.heads
            )));
        }
        let shapes = [
            ("wq", &self.wq, (d, d)),
            ("wk", &self.wk, (d, d)),
            ("wv", &self.wv, (d, d)),
            ("wo", &self.wo, (d, d)),
            ("w1", &self.w1, (d, f)),
            ("w2", &self.w2, (f, d)),
        ];
        for (op, t, want) in shapes {
            if t.shape() != want {
                return Err(Error::DimensionMismatch {
                    op,
                    left: t.shape(),
                    right: want,
                });
            }
        }
        for v in [&self.ln1_gain, &self.ln1_bias, &self.ln2_gain, &self.ln2_bias] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    op: "layer norm",
                    left: (1, v.len()),
                    right: (1, d),
                });
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &QTensor) -> Result<()> {
        self.validate()?;
        if x.cols() != self.d_model() || x.rows() == 0 {
            return Err(Error::DimensionMismatch {
                op: "block input",
                left: x.shape(),
                right: (x.rows(), self.d_model()),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutput {
    /// `L x D` after the second layer norm.
    pub output: Matrix<f64>,
    pub macs: MacCount,
    /// Per head, `L x Dh` attention outputs before the output projection.
    pub head_outputs: Vec<Matrix<f64>>,
}

/// Difference between two block outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub max_abs_diff: f64,
    pub mean_abs_diff: f64,
    pub cosine: f64,
}

impl FidelityReport {
    pub fn compare(reference: &Matrix<f64>, other: &Matrix<f64>) -> Result<Self> {
        if reference.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op: "fidelity",
                left: reference.shape(),
                right: other.shape(),
            });
        }
        let (a, b) = (reference.as_slice(), other.as_slice());
        let mut max = 0.0f64;
        let mut sum = 0.0;
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for (&x, &y) in a.iter().zip(b) {
            let d = (x - y).abs();
            max = max.max(d);
            sum += d;
            ab += x * y;
            aa += x * x;
            bb += y * y;
        }
        let cosine = if a == b {
            1.0
        } else if aa == 0.0 || bb == 0.0 {
            0.0
        } else {
            (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
        };
        Ok(Self {
            max_abs_diff: max,
            mean_abs_diff: if a.is_empty() { 0.0 } else { sum / a.len() as f64 },
            cosine,
        })
    }
}

struct HeadResult {
    out: Matrix<f64>,
    /// Output-projection partial sums, `L x D`.
    psum: Matrix<f64>,
    qkv: u64,
    attention: u64,
}

fn x_row(x: &QTensor, i: usize) -> &[i8] {
    x.values().row(i)
}

fn head_cols(w: &BlockWeights, h: usize) -> std::ops::Range<usize> {
    let dh = w.head_dim();
    h * dh..(h + 1) * dh
}

fn dense_head(x: &QTensor, w: &BlockWeights, h: usize) -> HeadResult {
    let (l, d, dh) = (x.rows(), w.d_model(), w.head_dim());
    let cols = head_cols(w, h);
    let mut qkv = 0;
    let mut attention = 0;
    let mut proj = |wt: &QTensor| {
        let mut m = Matrix::filled(l, dh, 0.0);
        for i in 0..l {
            gemv(x_row(x, i), x.scale(), wt, 0..d, cols.clone(), m.row_mut(i), &mut qkv);
        }
        m
    };
    let q = proj(&w.wq);
    let k = proj(&w.wk);
    let v = proj(&w.wv);
    let inv = 1.0 / (dh as f64).sqrt();
    let mut out = Matrix::filled(l, dh, 0.0);
    let mut scores = vec![0.0; l];
    for i in 0..l {
        for (j, s) in scores.iter_mut().enumerate() {
            *s = dot(q.row(i), k.row(j)) * inv;
        }
        attention += (l * dh) as u64;
        softmax_in_place(&mut scores);
        let o = out.row_mut(i);
        for (j, &p) in scores.iter().enumerate() {
            for (od, &vd) in o.iter_mut().zip(v.row(j)) {
                *od += p * vd;
            }
        }
        attention += (l * dh) as u64;
    }
    let mut psum = Matrix::filled(l, d, 0.0);
    for i in 0..l {
        gemv_real(out.row(i), &w.wo, cols.clone(), 0..d, psum.row_mut(i), &mut qkv);
    }
    HeadResult {
        out,
        psum,
        qkv,
        attention,
    }
}

fn sparse_head(x: &QTensor, w: &BlockWeights, plan: &SparsityPlan, h: usize) -> HeadResult {
    let hp = plan.head(h);
    let (l, d, dh) = (x.rows(), w.d_model(), w.head_dim());
    let cols = head_cols(w, h);
    let mut qkv = 0;
    let mut attention = 0;
    let mut proj = |wt: &QTensor, rows: &[usize]| {
        let mut m = Matrix::filled(l, dh, 0.0);
        for &i in rows {
            gemv(x_row(x, i), x.scale(), wt, 0..d, cols.clone(), m.row_mut(i), &mut qkv);
        }
        m
    };
    let q = proj(&w.wq, hp.q_rows());
    let k = proj(&w.wk, hp.kv_rows());
    let v = proj(&w.wv, hp.kv_rows());
    let inv = 1.0 / (dh as f64).sqrt();
    let mut out = Matrix::filled(l, dh, 0.0);
    let mut psum = Matrix::filled(l, d, 0.0);
    for &i in hp.q_rows() {
        let kept: Vec<usize> = (0..l).filter(|&j| hp.is_kept(i, j)).collect();
        // masked positions are -inf and drop out of the softmax
        let mut scores: Vec<f64> = kept.iter().map(|&j| dot(q.row(i), k.row(j)) * inv).collect();
        attention += (kept.len() * dh) as u64;
        softmax_in_place(&mut scores);
        let o = out.row_mut(i);
        for (&j, &p) in kept.iter().zip(&scores) {
            for (od, &vd) in o.iter_mut().zip(v.row(j)) {
                *od += p * vd;
            }
        }
        attention += (kept.len() * dh) as u64;
        gemv_real(out.row(i), &w.wo, cols.clone(), 0..d, psum.row_mut(i), &mut qkv);
    }
    for (i, role) in hp.sim_map().roles().iter().enumerate() {
        if let Role::Similar(c) = *role {
            let (o, p) = (out.row(c).to_vec(), psum.row(c).to_vec());
            out.row_mut(i).copy_from_slice(&o);
            psum.row_mut(i).copy_from_slice(&p);
        }
    }
    HeadResult {
        out,
        psum,
        qkv,
        attention,
    }
}

/// Residual plus first layer norm over head partial sums summed in head order.
fn attention_residual(x: &QTensor, w: &BlockWeights, heads: &[HeadResult]) -> Matrix<f64> {
    let (l, d) = (x.rows(), w.d_model());
    let mut h1 = Matrix::filled(l, d, 0.0);
    let mut pre = vec![0.0; d];
    for i in 0..l {
        for (j, p) in pre.iter_mut().enumerate() {
            let mut a = 0.0;
            for hr in heads {
                a += hr.psum.get(i, j);
            }
            *p = f64::from(x.get(i, j)) * x.scale() + a;
        }
        layer_norm(&pre, &w.ln1_gain, &w.ln1_bias, h1.row_mut(i));
    }
    h1
}

fn ffn_row(h1: &[f64], w: &BlockWeights, out: &mut [f64], macs: &mut u64) {
    let (d, f) = (w.d_model(), w.d_ff());
    let mut u = vec![0.0; f];
    gemv_real(h1, &w.w1, 0..d, 0..f, &mut u, macs);
    for v in &mut u {
        *v = gelu(*v);
    }
    gemv_real(&u, &w.w2, 0..f, 0..d, out, macs);
}

fn finish(w: &BlockWeights, h1: &Matrix<f64>, ffn: &Matrix<f64>) -> Matrix<f64> {
    let (l, d) = h1.shape();
    let mut out = Matrix::filled(l, d, 0.0);
    let mut pre = vec![0.0; d];
    for i in 0..l {
        for ((p, &a), &b) in pre.iter_mut().zip(h1.row(i)).zip(ffn.row(i)) {
            *p = a + b;
        }
        layer_norm(&pre, &w.ln2_gain, &w.ln2_bias, out.row_mut(i));
    }
    out
}

fn assemble(heads: Vec<HeadResult>, output: Matrix<f64>, ffn: u64) -> BlockOutput {
    let qkv = heads.iter().map(|h| h.qkv).sum();
    let attention = heads.iter().map(|h| h.attention).sum();
    BlockOutput {
        output,
        macs: MacCount::new(qkv, attention, ffn),
        head_outputs: heads.into_iter().map(|h| h.out).collect(),
    }
}

/// Every row, head and token computed.
pub fn dense_forward(x: &QTensor, w: &BlockWeights) -> Result<BlockOutput> {
    w.check_input(x)?;
    let heads: Vec<HeadResult> = (0..w.heads)
        .into_par_iter()
        .map(|h| dense_head(x, w, h))
        .collect();
    let h1 = attention_residual(x, w, &heads);
    let (l, d) = h1.shape();
    let mut ffn = Matrix::filled(l, d, 0.0);
    let mut ffn_macs = 0;
    for i in 0..l {
        ffn_row(h1.row(i), w, ffn.row_mut(i), &mut ffn_macs);
    }
    let output = finish(w, &h1, &ffn);
    Ok(assemble(heads, output, ffn_macs))
}

/// Computes only what the plan keeps and fills the rest by copying.
///
/// Per head: Q for critical rows, K/V for `kv_rows`, scores at the kept
/// positions of critical rows; similar rows copy their critical row's head
/// output and its output-projection partial sum. The FFN runs on `ffn_keep`
/// and pruned tokens copy the FFN output of their representative.
pub fn sparse_forward(x: &QTensor, w: &BlockWeights, plan: &SparsityPlan) -> Result<BlockOutput> {
    w.check_input(x)?;
    if plan.seq_len() != x.rows() || plan.heads().len() != w.heads {
        return Err(Error::PlanMismatch(format!(
            "plan for {} tokens and {} heads, block has {} tokens and {} heads",
            plan.seq_len(),
            plan.heads().len(),
            x.rows(),
            w.heads
        )));
    }
    let heads: Vec<HeadResult> = (0..w.heads)
        .into_par_iter()
        .map(|h| sparse_head(x, w, plan, h))
        .collect();
    let h1 = attention_residual(x, w, &heads);
    let (l, d) = h1.shape();
    let mut ffn = Matrix::filled(l, d, 0.0);
    let mut ffn_macs = 0;
    for &t in plan.ffn_keep() {
        ffn_row(h1.row(t), w, ffn.row_mut(t), &mut ffn_macs);
    }
    for (t, &r) in plan.ffn_rep().iter().enumerate() {
        if r != t {
            let src = ffn.row(r).to_vec();
            ffn.row_mut(t).copy_from_slice(&src);
        }
    }
    let output = finish(w, &h1, &ffn);
    Ok(assemble(heads, output, ffn_macs))
}
