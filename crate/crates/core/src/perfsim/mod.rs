//! Cycle model of one accelerator unit: weight-stationary PE array plus the
//! shift-add prediction unit.
//!
//! Stages are counted from plan set sizes. Progressive generation pipelines
//! per-window prediction against the previous window's generation; dynamic
//! allocation compresses per-head output vectors across PE lines in the
//! concat stage.

mod schedule;

pub use schedule::{
    dynamic_allocation_cycles, progressive_schedule, sequential_cycles, Allocation, WindowStage,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::keep_count;
use crate::refblock::MacCount;
use crate::sparsity::{PlanSource, SparsityPlan, SplsConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConfig {
    pub pe_rows: usize,
    pub pe_cols: usize,
    pub clock_hz: f64,
    /// Off-chip bytes per second available to one unit.
    pub bandwidth: f64,
    pub fifo_depth: usize,
    /// Cycles to load one stationary weight tile.
    pub load_latency: u64,
    /// SJA products per cycle in the prediction unit.
    pub prediction_lanes: u64,
    /// Element comparisons per cycle for similarity.
    pub similarity_ops: u64,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            pe_rows: 16,
            pe_cols: 64,
            clock_hz: 5e8,
            bandwidth: 9e11 / 125.0,
            fifo_depth: 8,
            load_latency: 16,
            prediction_lanes: 1024,
            similarity_ops: 64,
        }
    }
}

impl HardwareConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.pe_rows >= 1
            && self.pe_cols >= 1
            && self.fifo_depth >= 1
            && self.prediction_lanes >= 1
            && self.similarity_ops >= 1
            && self.clock_hz > 0.0
            && self.bandwidth > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "hardware sizes, clock and bandwidth must be positive".into(),
            ))
        }
    }

    pub fn pes(&self) -> u64 {
        (self.pe_rows * self.pe_cols) as u64
    }
}

/// Cycles per stage; `makespan` accounts for any overlap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCycles {
    pub prediction: u64,
    pub qkv: u64,
    pub attention: u64,
    pub concat_ffn: u64,
    pub makespan: u64,
}

impl StageCycles {
    pub fn sum(&self) -> u64 {
        self.prediction + self.qkv + self.attention + self.concat_ffn
    }
}

/// Useful work over array capacity; idle stages report 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    pub prediction: f64,
    pub qkv: f64,
    pub attention: f64,
    pub concat_ffn: f64,
    /// All PE-array MACs over array capacity across the final makespan.
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub dense: StageCycles,
    /// Sparse stages run back to back, static concat assignment.
    pub sparse: StageCycles,
    /// Sparse with progressive generation.
    pub progressive: StageCycles,
    /// Progressive plus dynamic allocation.
    pub dynamic: StageCycles,
    pub utilization: Utilization,
    pub allocation: Allocation,
    pub speedup_spls: f64,
    pub speedup_progressive: f64,
    pub speedup_dynamic: f64,
    pub speedup_total: f64,
    /// Bytes per second, max over stages.
    pub peak_bandwidth_demand: f64,
    pub bandwidth_exceeded: bool,
}

/// `ceil(n / cols) * ceil(m / rows) * k` plus one weight load per tile.
pub fn gemm_cycles(m: usize, n: usize, k: usize, hw: &HardwareConfig) -> u64 {
    if m == 0 || n == 0 || k == 0 {
        return 0;
    }
    let tiles = (n.div_ceil(hw.pe_cols) * m.div_ceil(hw.pe_rows)) as u64;
    tiles * k as u64 + tiles * hw.load_latency
}

/// Scores and weighted sum for `rows` query rows with at most `kept` positions each.
///
/// Short rows are packed `pe_cols / kept` to a PE line for the scores.
pub fn attention_cycles(rows: usize, kept: usize, dh: usize, hw: &HardwareConfig) -> u64 {
    if rows == 0 || kept == 0 {
        return 0;
    }
    let per_line = (hw.pe_cols / kept).max(1);
    let lines = rows.div_ceil(per_line);
    let tiles = (lines.div_ceil(hw.pe_rows) * kept.div_ceil(hw.pe_cols)) as u64;
    let scores = tiles * dh as u64 + tiles * hw.load_latency;
    scores + gemm_cycles(rows, dh, kept, hw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Assign {
    Static,
    Balanced,
}

/// Generation work of the rows before `end`.
fn generation_prefix(
    plan: &SparsityPlan,
    cfg: &SplsConfig,
    hw: &HardwareConfig,
    end: usize,
    kv_done: &[usize],
    assign: Assign,
) -> (StageCycles, Allocation) {
    let dh = cfg.head_dim();
    let d = cfg.d_model;
    let mut c = StageCycles::default();
    for (h, hp) in plan.heads().iter().enumerate() {
        let q: Vec<usize> = hp.q_rows().iter().copied().take_while(|&r| r < end).collect();
        let kept = q.iter().map(|&r| hp.kept_in_row(r)).max().unwrap_or(0);
        c.qkv += gemm_cycles(q.len(), dh, d, hw) + 2 * gemm_cycles(kv_done[h], dh, d, hw);
        c.attention += attention_cycles(q.len(), kept, dh, hw);
    }
    let counts: Vec<u64> = plan.critical_counts()[..end].iter().map(|&n| n as u64).collect();
    let alloc = dynamic_allocation_cycles(&counts, hw.pe_rows);
    let vectors = match assign {
        Assign::Static => alloc.unbalanced,
        Assign::Balanced => alloc.balanced,
    };
    let col_tiles = d.div_ceil(hw.pe_cols) as u64;
    let concat = if counts.iter().all(|&n| n == 0) {
        0
    } else {
        vectors * dh as u64 * col_tiles + plan.heads().len() as u64 * col_tiles * hw.load_latency
    };
    let ffn_tokens = plan.ffn_keep().iter().take_while(|&&t| t < end).count();
    c.concat_ffn = concat + gemm_cycles(ffn_tokens, cfg.d_ff, d, hw) + gemm_cycles(ffn_tokens, d, cfg.d_ff, hw);
    (c, alloc)
}

/// Prediction-unit cycles: K for all rows, then one entry per window.
pub fn prediction_cycles(cfg: &SplsConfig, hw: &HardwareConfig, windows: &[usize]) -> (u64, Vec<u64>) {
    let (l, d) = (cfg.seq_len as u64, cfg.d_model as u64);
    let hd = (cfg.head_dim() * cfg.heads) as u64;
    let lanes = hw.prediction_lanes;
    let k_pred = (l * d * hd).div_ceil(lanes);
    let per_window = windows
        .iter()
        .map(|&wi| {
            let wi = wi as u64;
            let q = wi * d * hd;
            let scores = wi * l * hd;
            let similarity = wi * (cfg.window as u64 - 1) * l * cfg.heads as u64;
            (q + scores).div_ceil(lanes) + similarity.div_ceil(hw.similarity_ops)
        })
        .collect();
    (k_pred, per_window)
}

fn check(plan: &SparsityPlan, cfg: &SplsConfig, hw: &HardwareConfig) -> Result<()> {
    cfg.validate()?;
    hw.validate()?;
    if plan.seq_len() != cfg.seq_len || plan.heads().len() != cfg.heads || plan.window() != cfg.window {
        return Err(Error::PlanMismatch(format!(
            "plan ({} tokens, {} heads, window {}) does not match config",
            plan.seq_len(),
            plan.heads().len(),
            plan.window()
        )));
    }
    Ok(())
}

/// Per-window stages plus the whole-plan stage totals.
fn windowed(plan: &SparsityPlan, cfg: &SplsConfig, hw: &HardwareConfig, assign: Assign) -> (u64, Vec<WindowStage>, StageCycles, Allocation) {
    let ranges = plan.partition().ranges();
    let sizes: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
    let (k_pred, preds) = match plan.source() {
        PlanSource::Predicted => prediction_cycles(cfg, hw, &sizes),
        PlanSource::Dense => (0, vec![0; sizes.len()]),
    };
    let activation: Vec<Vec<usize>> = plan.heads().iter().map(|h| h.kv_first_activation().iter().map(Vec::len).collect()).collect();
    let mut kv_done = vec![0; plan.heads().len()];
    let mut prev = StageCycles::default();
    let mut stages = Vec::with_capacity(ranges.len());
    let mut alloc = dynamic_allocation_cycles(&[], hw.pe_rows);
    for (i, r) in ranges.iter().enumerate() {
        for (h, a) in activation.iter().enumerate() {
            kv_done[h] += a[i];
        }
        let (cum, al) = generation_prefix(plan, cfg, hw, r.end, &kv_done, assign);
        let gen = (cum.qkv + cum.attention + cum.concat_ffn) - (prev.qkv + prev.attention + prev.concat_ffn);
        stages.push(WindowStage { pred: preds[i], gen });
        prev = cum;
        alloc = al;
    }
    let mut totals = prev;
    totals.prediction = k_pred + preds.iter().sum::<u64>();
    (k_pred, stages, totals, alloc)
}

/// Stage cycles of a plan run back to back, static concat assignment.
pub fn sparse_stage_cycles(plan: &SparsityPlan, cfg: &SplsConfig, hw: &HardwareConfig) -> Result<StageCycles> {
    check(plan, cfg, hw)?;
    let (_, _, mut totals, _) = windowed(plan, cfg, hw, Assign::Static);
    totals.makespan = totals.sum();
    Ok(totals)
}

/// The dense baseline: every row, position and token, no prediction.
pub fn dense_stage_cycles(cfg: &SplsConfig, hw: &HardwareConfig) -> Result<StageCycles> {
    let plan = SparsityPlan::dense(cfg.seq_len, cfg.heads, cfg.window);
    sparse_stage_cycles(&plan, cfg, hw)
}

/// Off-chip bytes per stage at one byte per element: weights, the block input
/// and the block output once; intermediates stay on chip.
fn stage_bytes(cfg: &SplsConfig) -> [u64; 4] {
    let (l, d, f) = (cfg.seq_len as u64, cfg.d_model as u64, cfg.d_ff as u64);
    [2 * d * d + l * d, 3 * d * d + l * d, 0, d * d + 2 * d * f + l * d]
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

fn busy(work: u64, capacity: u64, cycles: u64) -> f64 {
    if cycles == 0 {
        1.0
    } else {
        work as f64 / (capacity * cycles) as f64
    }
}

pub fn simulate(plan: &SparsityPlan, cfg: &SplsConfig, hw: &HardwareConfig) -> Result<CycleReport> {
    check(plan, cfg, hw)?;
    let dense = dense_stage_cycles(cfg, hw)?;

    let (k_pred, stat, mut sparse, _) = windowed(plan, cfg, hw, Assign::Static);
    sparse.makespan = sequential_cycles(k_pred, &stat);
    let mut progressive = sparse;
    progressive.makespan = progressive_schedule(k_pred, &stat);
    let (_, bal, mut dynamic, allocation) = windowed(plan, cfg, hw, Assign::Balanced);
    dynamic.makespan = progressive_schedule(k_pred, &bal);

    let macs = MacCount::for_plan(plan, cfg.d_model, cfg.d_ff);
    let dh = cfg.head_dim() as u64;
    let d = cfg.d_model as u64;
    let oproj: u64 = plan.heads().iter().map(|h| h.q_rows().len() as u64 * dh * d).sum();
    let pred_ops = match plan.source() {
        PlanSource::Predicted => {
            let (l, h) = (cfg.seq_len as u64, cfg.heads as u64);
            2 * l * d * dh * h + l * l * dh * h
        }
        PlanSource::Dense => 0,
    };
    let pred_busy = dynamic.prediction - prediction_similarity(cfg, hw, plan);
    let utilization = Utilization {
        prediction: busy(pred_ops, hw.prediction_lanes, pred_busy),
        qkv: busy(macs.qkv - oproj, hw.pes(), dynamic.qkv),
        attention: busy(macs.attention, hw.pes(), dynamic.attention),
        concat_ffn: busy(macs.ffn + oproj, hw.pes(), dynamic.concat_ffn),
        overall: busy(macs.total, hw.pes(), dynamic.makespan),
    };

    let seconds = |cycles: u64| cycles as f64 / hw.clock_hz;
    let bytes = stage_bytes(cfg);
    let times = [dynamic.prediction, dynamic.qkv, dynamic.attention, dynamic.concat_ffn];
    let peak = bytes
        .iter()
        .zip(times)
        .filter(|&(&b, t)| b > 0 && t > 0)
        .map(|(&b, t)| b as f64 / seconds(t))
        .fold(0.0, f64::max);

    let speedup_spls = ratio(dense.makespan, sparse.makespan);
    let speedup_progressive = ratio(sparse.makespan, progressive.makespan);
    let speedup_dynamic = ratio(progressive.makespan, dynamic.makespan);
    Ok(CycleReport {
        dense,
        sparse,
        progressive,
        dynamic,
        utilization,
        allocation,
        speedup_spls,
        speedup_progressive,
        speedup_dynamic,
        speedup_total: speedup_spls * speedup_progressive * speedup_dynamic,
        peak_bandwidth_demand: peak,
        bandwidth_exceeded: peak > hw.bandwidth,
    })
}

/// Similarity share of the prediction cycles.
fn prediction_similarity(cfg: &SplsConfig, hw: &HardwareConfig, plan: &SparsityPlan) -> u64 {
    if plan.source() == PlanSource::Dense {
        return 0;
    }
    plan.partition()
        .ranges()
        .iter()
        .map(|r| {
            let ops = (r.len() * (cfg.window - 1) * cfg.seq_len * cfg.heads) as u64;
            ops.div_ceil(hw.similarity_ops)
        })
        .sum()
}

/// Attention positions a critical row computes under ratio `k`.
pub fn positions_per_row(k_ratio: f64, seq_len: usize) -> usize {
    keep_count(k_ratio, seq_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsity::{synthetic_plan, SyntheticProfile};

    fn hw() -> HardwareConfig {
        HardwareConfig::default()
    }

    #[test]
    fn gemm_examples() {
        assert_eq!(gemm_cycles(16, 64, 1, &hw()), 17);
        assert_eq!(gemm_cycles(128, 768, 768, &hw()), 12 * 8 * 768 + 96 * 16);
        assert_eq!(gemm_cycles(128, 768, 768, &hw()), 75_264);
        assert_eq!(gemm_cycles(1, 768, 768, &hw()), 12 * 768 + 12 * 16);
    }

    #[test]
    fn dense_attention_is_two_gemms() {
        let h = hw();
        assert_eq!(attention_cycles(128, 128, 64, &h), gemm_cycles(128, 128, 64, &h) + gemm_cycles(128, 64, 128, &h));
    }

    #[test]
    fn packed_scores() {
        // 13 positions: four query rows share a 64-wide line
        let h = hw();
        let qk = attention_cycles(64, 13, 64, &h) - gemm_cycles(64, 64, 13, &h);
        assert_eq!(qk, 64 + 16);
        assert_eq!(positions_per_row(0.1, 128), 13);
    }

    #[test]
    fn dense_plan_has_unit_speedups() {
        let cfg = SplsConfig {
            seq_len: 64,
            d_model: 256,
            heads: 4,
            d_ff: 512,
            ffn_threshold: 2,
            ..SplsConfig::default()
        };
        let plan = SparsityPlan::dense(64, 4, 8);
        let r = simulate(&plan, &cfg, &hw()).unwrap();
        assert_eq!(r.sparse, r.dense);
        assert_eq!(r.dynamic.makespan, r.dense.makespan);
        for s in [r.speedup_spls, r.speedup_progressive, r.speedup_dynamic, r.speedup_total] {
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn baseline_workload_report() {
        let cfg = SplsConfig {
            k_ratio: 0.1,
            ..SplsConfig::default()
        };
        let profile = SyntheticProfile {
            q_keep: 0.4,
            kv_keep: 0.4,
            ffn_keep: 0.5,
        };
        let plan = synthetic_plan(&cfg, profile, 1).unwrap();
        let r = simulate(&plan, &cfg, &hw()).unwrap();
        assert!(r.speedup_spls > 1.0);
        assert!(r.speedup_progressive >= 1.0);
        assert!(r.speedup_dynamic >= 1.0);
        assert!((r.speedup_total - r.speedup_spls * r.speedup_progressive * r.speedup_dynamic).abs() < 1e-9);
        for s in [&r.sparse, &r.progressive, &r.dynamic] {
            assert!(s.makespan <= s.sum());
            assert!(s.makespan >= s.prediction.max(s.qkv).max(s.attention).max(s.concat_ffn));
        }
        let u = r.utilization;
        for v in [u.prediction, u.qkv, u.attention, u.concat_ffn, u.overall] {
            assert!(v > 0.0 && v <= 1.0, "{u:?}");
        }
    }

    #[test]
    fn halving_q_rows_halves_q_cycles() {
        let h = hw();
        let full = gemm_cycles(128, 64, 768, &h);
        let half = gemm_cycles(64, 64, 768, &h);
        assert_eq!(full, 2 * half);
    }
}
