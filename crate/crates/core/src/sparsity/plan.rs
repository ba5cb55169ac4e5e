use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::mfi::mfi_tokens;
use super::window::{partition_windows, Role, SimilarityMap, WindowPartition};
use super::SplsConfig;
use crate::error::{Error, Result};
use crate::prediction::Spa;
use crate::tensor::Matrix;

/// Per-head sparsity decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadPlan {
    head: usize,
    /// Rows whose Q vector is generated (the critical rows), ascending.
    q_rows: Vec<usize>,
    /// K/V rows referenced by any kept SPA position, ascending.
    kv_rows: Vec<usize>,
    window_active_cols: Vec<Vec<usize>>,
    sim_map: SimilarityMap,
    mask: Matrix<bool>,
}

impl HeadPlan {
    pub fn new(sim_map: SimilarityMap, mask: Matrix<bool>, partition: &WindowPartition) -> Result<Self> {
        let len = sim_map.len();
        if mask.shape() != (len, len) || partition.seq_len() != len {
            return Err(Error::PlanMismatch(format!(
                "head {}: mask {:?} vs {} rows",
                sim_map.head(),
                mask.shape(),
                len
            )));
        }
        let window_active_cols: Vec<Vec<usize>> = partition
            .ranges()
            .iter()
            .map(|range| {
                (0..len)
                    .filter(|&j| range.clone().any(|i| mask.get(i, j)))
                    .collect()
            })
            .collect();
        let kv_rows: BTreeSet<usize> = window_active_cols.iter().flatten().copied().collect();
        Ok(Self {
            head: sim_map.head(),
            q_rows: sim_map.critical_rows(),
            kv_rows: kv_rows.into_iter().collect(),
            window_active_cols,
            sim_map,
            mask,
        })
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn q_rows(&self) -> &[usize] {
        &self.q_rows
    }

    pub fn kv_rows(&self) -> &[usize] {
        &self.kv_rows
    }

    pub fn window_active_cols(&self) -> &[Vec<usize>] {
        &self.window_active_cols
    }

    pub fn sim_map(&self) -> &SimilarityMap {
        &self.sim_map
    }

    pub fn mask(&self) -> &Matrix<bool> {
        &self.mask
    }

    pub fn seq_len(&self) -> usize {
        self.sim_map.len()
    }

    #[inline]
    pub fn is_kept(&self, i: usize, j: usize) -> bool {
        self.mask.get(i, j)
    }

    pub fn kept_in_row(&self, row: usize) -> usize {
        self.mask.row(row).iter().filter(|&&k| k).count()
    }

    /// Attention scores actually computed: kept positions of critical rows.
    pub fn attention_positions(&self) -> usize {
        self.q_rows.iter().map(|&r| self.kept_in_row(r)).sum()
    }

    /// K/V rows first needed by each window; earlier windows already generated the rest.
    pub fn kv_first_activation(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.seq_len()];
        self.window_active_cols
            .iter()
            .map(|cols| {
                cols.iter()
                    .copied()
                    .filter(|&c| !std::mem::replace(&mut seen[c], true))
                    .collect()
            })
            .collect()
    }

    /// Critical rows per window.
    pub fn critical_per_window(&self, partition: &WindowPartition) -> Vec<usize> {
        partition
            .ranges()
            .iter()
            .map(|r| r.clone().filter(|&i| self.sim_map.is_critical(i)).count())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    /// No prediction ran; every computation is kept.
    Dense,
    /// Derived from predicted attention; the prediction pass is part of the cost.
    Predicted,
}

/// End-to-end sparsity decisions for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPlan {
    partition: WindowPartition,
    heads: Vec<HeadPlan>,
    ffn_keep: Vec<usize>,
    ffn_rep: Vec<usize>,
    source: PlanSource,
}

impl SparsityPlan {
    pub fn new(
        partition: WindowPartition,
        heads: Vec<HeadPlan>,
        ffn_keep: Vec<usize>,
        ffn_rep: Vec<usize>,
        source: PlanSource,
    ) -> Result<Self> {
        let plan = Self {
            partition,
            heads,
            ffn_keep,
            ffn_rep,
            source,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan that prunes nothing: all rows critical, all positions kept, all tokens in the FFN.
    pub fn dense(seq_len: usize, heads: usize, window: usize) -> Self {
        let partition = partition_windows(seq_len, window);
        let heads = (0..heads)
            .map(|h| {
                let map = SimilarityMap::from_roles(h, vec![Role::Critical; seq_len], &partition)
                    .expect("all-critical roles are valid");
                HeadPlan::new(map, Matrix::filled(seq_len, seq_len, true), &partition)
                    .expect("square mask")
            })
            .collect();
        Self {
            partition,
            heads,
            ffn_keep: (0..seq_len).collect(),
            ffn_rep: (0..seq_len).collect(),
            source: PlanSource::Dense,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.seq_len();
        let bad = |msg: String| Err(Error::Invariant(msg));
        if self.ffn_rep.len() != len {
            return bad(format!("ffn_rep has {} entries for {len} tokens", self.ffn_rep.len()));
        }
        let mut kept = vec![false; len];
        for &t in &self.ffn_keep {
            if t >= len {
                return bad(format!("ffn_keep token {t} out of range"));
            }
            kept[t] = true;
        }
        for (t, &r) in self.ffn_rep.iter().enumerate() {
            if r >= len || !kept[r] || ((r == t) != kept[t]) {
                return bad(format!("token {t} maps to {r}, which is not a kept representative"));
            }
        }
        for (h, head) in self.heads.iter().enumerate() {
            if head.seq_len() != len || head.head != h {
                return bad(format!("head {h} covers {} rows, expected {len}", head.seq_len()));
            }
        }
        Ok(())
    }

    pub fn partition(&self) -> &WindowPartition {
        &self.partition
    }

    pub fn seq_len(&self) -> usize {
        self.partition.seq_len()
    }

    pub fn window(&self) -> usize {
        self.partition.window()
    }

    pub fn heads(&self) -> &[HeadPlan] {
        &self.heads
    }

    pub fn head(&self, h: usize) -> &HeadPlan {
        &self.heads[h]
    }

    pub fn ffn_keep(&self) -> &[usize] {
        &self.ffn_keep
    }

    pub fn ffn_rep(&self) -> &[usize] {
        &self.ffn_rep
    }

    pub fn source(&self) -> PlanSource {
        self.source
    }

    /// Heads in which each token is a critical row.
    pub fn critical_counts(&self) -> Vec<usize> {
        (0..self.seq_len())
            .map(|t| self.heads.iter().filter(|h| h.sim_map.is_critical(t)).count())
            .collect()
    }

    pub fn summary(&self) -> PlanSummary {
        let len = self.seq_len();
        let heads: Vec<HeadSummary> = self
            .heads
            .iter()
            .map(|h| HeadSummary {
                head: h.head,
                q_rows: h.q_rows.len(),
                kv_rows: h.kv_rows.len(),
                attention_positions: h.attention_positions(),
                distance_evals: h.sim_map.distance_evals(),
            })
            .collect();
        let denom = (len * self.heads.len()).max(1) as f64;
        let q: usize = heads.iter().map(|h| h.q_rows).sum();
        let kv: usize = heads.iter().map(|h| h.kv_rows).sum();
        let pos: usize = heads.iter().map(|h| h.attention_positions).sum();
        PlanSummary {
            seq_len: len,
            window: self.window(),
            source: self.source,
            q_sparsity: 1.0 - q as f64 / denom,
            kv_sparsity: 1.0 - kv as f64 / denom,
            attention_sparsity: 1.0 - pos as f64 / (denom * len.max(1) as f64),
            ffn_sparsity: 1.0 - self.ffn_keep.len() as f64 / len.max(1) as f64,
            ffn_keep: self.ffn_keep.len(),
            heads,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSummary {
    pub head: usize,
    pub q_rows: usize,
    pub kv_rows: usize,
    pub attention_positions: usize,
    pub distance_evals: usize,
}

/// Counts and sparsity ratios of a plan, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub seq_len: usize,
    pub window: usize,
    pub source: PlanSource,
    pub q_sparsity: f64,
    pub kv_sparsity: f64,
    pub attention_sparsity: f64,
    pub ffn_sparsity: f64,
    pub ffn_keep: usize,
    pub heads: Vec<HeadSummary>,
}

/// Assembles per-head Q/KV decisions and the token-level FFN keep-set.
pub fn build_plan(spas: &[Spa], maps: Vec<SimilarityMap>, cfg: &SplsConfig) -> Result<SparsityPlan> {
    if spas.len() != cfg.heads || maps.len() != cfg.heads {
        return Err(Error::PlanMismatch(format!(
            "{} SPAs and {} similarity maps for {} heads",
            spas.len(),
            maps.len(),
            cfg.heads
        )));
    }
    let partition = partition_windows(cfg.seq_len, cfg.window);
    let (ffn_keep, ffn_rep) = mfi_tokens(&maps, cfg.ffn_threshold)?;
    let heads = spas
        .iter()
        .zip(maps)
        .enumerate()
        .map(|(h, (spa, map))| {
            if spa.head() != h || map.head() != h || spa.len() != cfg.seq_len {
                return Err(Error::PlanMismatch(format!("head {h} inputs out of order or mis-sized")));
            }
            HeadPlan::new(map, spa.mask().clone(), &partition)
        })
        .collect::<Result<Vec<_>>>()?;
    SparsityPlan::new(partition, heads, ffn_keep, ffn_rep, PlanSource::Predicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::Pam;
    use crate::sparsity::window::window_similarity;
    use crate::sparsity::AttachRule;

    fn cfg(len: usize, heads: usize, window: usize) -> SplsConfig {
        SplsConfig {
            k_ratio: 1.0,
            similarity_threshold: 0.0,
            ffn_threshold: heads,
            window,
            seq_len: len,
            d_model: 4 * heads,
            heads,
            d_ff: 8,
            attach: AttachRule::FirstFit,
        }
    }

    fn spa(head: usize, keep: Matrix<bool>) -> Spa {
        let n = keep.rows();
        let scores = Matrix::from_fn(n, n, |i, j| (i * n + j) as i32 + 1);
        Spa::from_mask(Pam { head, scores }, keep, 1.0).unwrap()
    }

    #[test]
    fn dense_masks_give_dense_plan() {
        let c = cfg(4, 2, 2);
        let part = partition_windows(4, 2);
        let spas: Vec<Spa> = (0..2)
            .map(|h| {
                // strictly distinct rows so nothing merges at s = 0
                let n = 4;
                let scores = Matrix::from_fn(n, n, |i, j| ((i + 1) * (j + 2) * (i + j + 1)) as i32);
                Spa::from_mask(Pam { head: h, scores }, Matrix::filled(n, n, true), 1.0).unwrap()
            })
            .collect();
        let maps = spas.iter().map(|s| window_similarity(s, &part, 0.0).unwrap()).collect();
        let plan = build_plan(&spas, maps, &c).unwrap();
        for h in plan.heads() {
            assert_eq!(h.q_rows(), &[0, 1, 2, 3]);
            assert_eq!(h.kv_rows(), &[0, 1, 2, 3]);
        }
        assert_eq!(plan.ffn_keep(), &[0, 1, 2, 3]);
    }

    #[test]
    fn unused_column_is_pruned_from_kv() {
        let mut keep = Matrix::filled(4, 4, true);
        for i in 0..4 {
            keep.set(i, 3, false);
        }
        let part = partition_windows(4, 4);
        let s = spa(0, keep);
        let map = window_similarity(&s, &part, 0.0).unwrap();
        let head = HeadPlan::new(map, s.mask().clone(), &part).unwrap();
        assert_eq!(head.kv_rows(), &[0, 1, 2]);
    }

    #[test]
    fn progressive_kv_activation() {
        // window 0 leaves columns 1 and 3 (0-based) empty; window 1 activates column 1
        let n = 6;
        let mut keep = Matrix::filled(n, n, false);
        for i in 0..3 {
            for j in [0, 2, 4, 5] {
                keep.set(i, j, true);
            }
        }
        for i in 3..6 {
            for j in [0, 1] {
                keep.set(i, j, true);
            }
        }
        let part = partition_windows(n, 3);
        let s = spa(0, keep);
        let map = window_similarity(&s, &part, 0.0).unwrap();
        let head = HeadPlan::new(map, s.mask().clone(), &part).unwrap();
        let one_based: Vec<usize> = head.window_active_cols()[0].iter().map(|c| c + 1).collect();
        assert_eq!(one_based, vec![1, 3, 5, 6]);
        assert_eq!(head.kv_first_activation(), vec![vec![0, 2, 4, 5], vec![1]]);
        assert_eq!(head.kv_rows(), &[0, 1, 2, 4, 5]);
    }

    #[test]
    fn head_count_mismatch() {
        let c = cfg(2, 2, 2);
        let part = partition_windows(2, 2);
        let s = spa(0, Matrix::filled(2, 2, true));
        let map = window_similarity(&s, &part, 0.0).unwrap();
        assert!(matches!(
            build_plan(&[s], vec![map], &c),
            Err(Error::PlanMismatch(_))
        ));
    }

    #[test]
    fn dense_plan_summary() {
        let plan = SparsityPlan::dense(8, 2, 4);
        plan.validate().unwrap();
        let s = plan.summary();
        assert_eq!((s.q_sparsity, s.kv_sparsity, s.attention_sparsity, s.ffn_sparsity), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(plan.critical_counts(), vec![2; 8]);
    }
}
