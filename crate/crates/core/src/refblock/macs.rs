use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparsity::SparsityPlan;

/// Multiplies performed, grouped as Q/K/V plus output projection, attention, FFN.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacCount {
    pub qkv: u64,
    pub attention: u64,
    pub ffn: u64,
    pub total: u64,
}

impl MacCount {
    pub fn new(qkv: u64, attention: u64, ffn: u64) -> Self {
        Self {
            qkv,
            attention,
            ffn,
            total: qkv + attention + ffn,
        }
    }

    /// `4 L D^2`, `2 L^2 D`, `2 L D d_ff`.
    pub fn dense(seq_len: usize, d_model: usize, d_ff: usize) -> Self {
        let (l, d, f) = (seq_len as u64, d_model as u64, d_ff as u64);
        Self::new(4 * l * d * d, 2 * l * l * d, 2 * l * d * f)
    }

    /// Closed form for a plan from its set sizes.
    ///
    /// Per head: `|q| D Dh` for Q, `2 |kv| D Dh` for K and V, `|q| Dh D` for the
    /// head's share of the output projection, and `2 Dh` per computed score.
    pub fn for_plan(plan: &SparsityPlan, d_model: usize, d_ff: usize) -> Self {
        let d = d_model as u64;
        let dh = d / plan.heads().len() as u64;
        let mut qkv = 0;
        let mut attention = 0;
        for h in plan.heads() {
            let q = h.q_rows().len() as u64;
            let kv = h.kv_rows().len() as u64;
            qkv += q * d * dh + 2 * kv * d * dh + q * dh * d;
            attention += 2 * h.attention_positions() as u64 * dh;
        }
        let ffn = 2 * plan.ffn_keep().len() as u64 * d * d_ff as u64;
        Self::new(qkv, attention, ffn)
    }

    /// Fraction of the total spent in attention-side work (`qkv + attention`).
    pub fn mha_share(&self) -> f64 {
        (self.qkv + self.attention) as f64 / self.total as f64
    }

    pub fn scaled(&self, layers: u64) -> Self {
        Self::new(self.qkv * layers, self.attention * layers, self.ffn * layers)
    }
}

/// `1 - sparse / dense` per component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub qkv: f64,
    pub attention: f64,
    pub ffn: f64,
    pub total: f64,
}

pub fn reduction_report(dense: &MacCount, sparse: &MacCount) -> Result<ReductionReport> {
    let reduce = |name: &'static str, d: u64, s: u64| {
        if d == 0 {
            Err(Error::ZeroDenseCount(name))
        } else {
            Ok(1.0 - s as f64 / d as f64)
        }
    };
    Ok(ReductionReport {
        qkv: reduce("qkv", dense.qkv, sparse.qkv)?,
        attention: reduce("attention", dense.attention, sparse.attention)?,
        ffn: reduce("ffn", dense.ffn, sparse.ffn)?,
        total: reduce("total", dense.total, sparse.total)?,
    })
}
