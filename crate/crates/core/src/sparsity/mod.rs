//! Window-local similarity, Q/KV/FFN sparsity plans and MFI token pruning.

mod mfi;
mod plan;
mod synthetic;
mod window;

pub use mfi::mfi_tokens;
pub use plan::{build_plan, HeadPlan, HeadSummary, PlanSource, PlanSummary, SparsityPlan};
pub use synthetic::{synthetic_plan, SyntheticProfile};
pub use window::{
    partition_windows, row_distance, validate_threshold, window_similarity, window_similarity_with,
    AttachRule, Role, SimilarityMap, WindowPartition,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{predict_heads, topk_rows, validate_k_ratio, Pam};
use crate::tensor::QTensor;

/// Hyperparameters and block dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplsConfig {
    pub k_ratio: f64,
    pub similarity_threshold: f64,
    pub ffn_threshold: usize,
    pub window: usize,
    pub seq_len: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
    #[serde(default)]
    pub attach: AttachRule,
}

impl Default for SplsConfig {
    fn default() -> Self {
        Self {
            k_ratio: 0.2,
            similarity_threshold: 0.4,
            ffn_threshold: 6,
            window: 8,
            seq_len: 128,
            d_model: 768,
            heads: 12,
            d_ff: 3072,
            attach: AttachRule::FirstFit,
        }
    }
}

impl SplsConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        validate_k_ratio(self.k_ratio)?;
        validate_threshold(self.similarity_threshold)?;
        if self.seq_len == 0 || self.d_model == 0 || self.d_ff == 0 || self.window == 0 {
            return fail("seq_len, d_model, d_ff and window must be at least 1".into());
        }
        if self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return fail(format!(
                "d_model {} is not divisible into {} heads",
                self.d_model, self.heads
            ));
        }
        if self.ffn_threshold == 0 || self.ffn_threshold > self.heads {
            return fail(format!(
                "ffn_threshold {} outside 1..={}",
                self.ffn_threshold, self.heads
            ));
        }
        Ok(())
    }
}

/// Top-k, window similarity and plan assembly from per-head PAMs.
pub fn plan_from_pams(pams: &[Pam], cfg: &SplsConfig) -> Result<SparsityPlan> {
    cfg.validate()?;
    if let Some(p) = pams.iter().find(|p| p.len() != cfg.seq_len) {
        return Err(Error::PlanMismatch(format!(
            "PAM of head {} has {} rows, config says {}",
            p.head,
            p.len(),
            cfg.seq_len
        )));
    }
    let partition = partition_windows(cfg.seq_len, cfg.window);
    let (spas, maps): (Vec<_>, Vec<_>) = pams
        .par_iter()
        .map(|pam| {
            let spa = topk_rows(pam, cfg.k_ratio)?;
            let map = window_similarity_with(&spa, &partition, cfg.similarity_threshold, cfg.attach)?;
            Ok((spa, map))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    build_plan(&spas, maps, cfg)
}

/// Full prediction path: quantized input and Q/K projections to a plan.
pub fn predict_plan(x: &QTensor, wq: &QTensor, wk: &QTensor, cfg: &SplsConfig) -> Result<SparsityPlan> {
    cfg.validate()?;
    let pams = predict_heads(x, wq, wk, cfg.heads)?;
    plan_from_pams(&pams, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        SplsConfig::default().validate().unwrap();
    }

    #[test]
    fn validation() {
        let bad = |f: fn(&mut SplsConfig)| {
            let mut c = SplsConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.heads = 5));
        assert!(bad(|c| c.ffn_threshold = 13));
        assert!(bad(|c| c.ffn_threshold = 0));
        assert!(bad(|c| c.k_ratio = 0.0));
        assert!(bad(|c| c.similarity_threshold = 1.5));
        assert!(bad(|c| c.window = 0));
    }
}
