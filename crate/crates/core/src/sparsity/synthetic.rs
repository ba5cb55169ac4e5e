use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::plan::{HeadPlan, PlanSource, SparsityPlan};
use super::window::{partition_windows, Role, SimilarityMap};
use super::SplsConfig;
use crate::error::{Error, Result};
use crate::prediction::keep_count;
use crate::tensor::Matrix;

/// Target kept fractions for a plan built without prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticProfile {
    /// Fraction of rows that stay critical per head.
    pub q_keep: f64,
    /// Fraction of K/V rows referenced per head.
    pub kv_keep: f64,
    /// Fraction of tokens entering the FFN.
    pub ffn_keep: f64,
}

impl SyntheticProfile {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("q_keep", self.q_keep), ("kv_keep", self.kv_keep), ("ffn_keep", self.ffn_keep)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn count(frac: f64, len: usize, floor: usize) -> usize {
    ((frac * len as f64).round() as usize).clamp(floor.min(len), len)
}

/// Similar rows attach to the closest earlier critical row; row 0 must be critical.
fn roles_from(critical: &[bool]) -> Vec<Role> {
    let mut last = 0;
    critical
        .iter()
        .enumerate()
        .map(|(r, &c)| {
            if c {
                last = r;
                Role::Critical
            } else {
                Role::Similar(last)
            }
        })
        .collect()
}

/// Plan with prescribed sparsity, for simulation without a model.
///
/// Every window start is critical; each head draws the remaining criticals
/// and its K/V set at random; critical rows keep `ceil(k L)` of those columns, taken cyclically,
/// and similar rows copy the mask of the closest earlier critical. The FFN
/// keeps the tokens with the smallest in-window offsets and maps the rest to
/// their window start.
pub fn synthetic_plan(cfg: &SplsConfig, profile: SyntheticProfile, seed: u64) -> Result<SparsityPlan> {
    cfg.validate()?;
    profile.validate()?;
    let len = cfg.seq_len;
    let partition = partition_windows(len, cfg.window);
    let windows = partition.len();

    // rows ordered by (offset in window, row): window starts first
    let mut by_offset: Vec<usize> = (0..len).collect();
    by_offset.sort_by_key(|&r| (r % cfg.window, r));
    let starts: Vec<usize> = partition.ranges().iter().map(|r| r.start).collect();
    let others: Vec<usize> = (0..len).filter(|r| r % cfg.window != 0).collect();
    let n_q = count(profile.q_keep, len, windows);

    let kept = keep_count(cfg.k_ratio, len);
    let n_kv = count(profile.kv_keep, len, kept);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heads = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let mut critical = vec![false; len];
        for &r in &starts {
            critical[r] = true;
        }
        for i in sample(&mut rng, others.len(), n_q - windows) {
            critical[others[i]] = true;
        }
        let roles = roles_from(&critical);
        let mut kv = sample(&mut rng, len, n_kv).into_vec();
        kv.sort_unstable();
        let mut mask = Matrix::filled(len, len, false);
        let mut start = 0;
        for (r, role) in roles.iter().enumerate() {
            match *role {
                Role::Critical => {
                    for i in 0..kept {
                        mask.set(r, kv[(start + i) % n_kv], true);
                    }
                    start = (start + kept) % n_kv;
                }
                Role::Similar(c) => {
                    let src = mask.row(c).to_vec();
                    mask.row_mut(r).copy_from_slice(&src);
                }
            }
        }
        let map = SimilarityMap::from_roles(h, roles, &partition)?;
        heads.push(HeadPlan::new(map, mask, &partition)?);
    }

    let n_ffn = count(profile.ffn_keep, len, windows);
    let mut ffn_keep: Vec<usize> = by_offset[..n_ffn].to_vec();
    ffn_keep.sort_unstable();
    let mut in_ffn = vec![false; len];
    for &t in &ffn_keep {
        in_ffn[t] = true;
    }
    let ffn_rep = (0..len)
        .map(|t| if in_ffn[t] { t } else { t - t % cfg.window })
        .collect();
    SparsityPlan::new(partition, heads, ffn_keep, ffn_rep, PlanSource::Predicted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SplsConfig {
        SplsConfig {
            k_ratio: 0.1,
            seq_len: 128,
            ..SplsConfig::default()
        }
    }

    const BASE: SyntheticProfile = SyntheticProfile {
        q_keep: 0.4,
        kv_keep: 0.4,
        ffn_keep: 0.5,
    };

    #[test]
    fn hits_requested_sparsity() {
        let plan = synthetic_plan(&cfg(), BASE, 7).unwrap();
        let s = plan.summary();
        assert!((s.q_sparsity - 0.6).abs() < 0.01);
        assert!((s.kv_sparsity - 0.6).abs() < 0.01);
        assert!((s.ffn_sparsity - 0.5).abs() < 0.01);
        for h in plan.heads() {
            for &r in h.q_rows() {
                assert_eq!(h.kept_in_row(r), 13);
            }
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(synthetic_plan(&cfg(), BASE, 3).unwrap(), synthetic_plan(&cfg(), BASE, 3).unwrap());
    }

    #[test]
    fn full_profile_keeps_every_row() {
        let full = SyntheticProfile {
            q_keep: 1.0,
            kv_keep: 1.0,
            ffn_keep: 1.0,
        };
        let plan = synthetic_plan(&cfg(), full, 1).unwrap();
        let s = plan.summary();
        assert_eq!((s.q_sparsity, s.ffn_sparsity), (0.0, 0.0));
    }

    #[test]
    fn floors_at_one_critical_per_window() {
        let none = SyntheticProfile {
            q_keep: 0.0,
            kv_keep: 0.0,
            ffn_keep: 0.0,
        };
        let plan = synthetic_plan(&cfg(), none, 1).unwrap();
        assert_eq!(plan.head(0).q_rows().len(), 16);
        assert_eq!(plan.ffn_keep().len(), 16);
        assert_eq!(plan.head(0).kv_rows().len(), 13);
    }
}
