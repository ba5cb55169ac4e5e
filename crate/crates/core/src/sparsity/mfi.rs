//! Token-level FFN pruning by most frequent critical index (MFI).

use super::window::SimilarityMap;
use crate::error::{Error, Result};

/// Returns `(ffn_keep, ffn_rep)`.
///
/// Each head names a representative for token `t`: its critical row, or `t`
/// itself. The most frequent representative across heads (ties to the smaller
/// index) prunes `t` when it differs from `t` and appears in at least `f`
/// heads. Pruned tokens point at a kept token; chains are followed so every
/// representative is itself kept.
pub fn mfi_tokens(maps: &[SimilarityMap], f: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let heads = maps.len();
    if f == 0 || f > heads {
        return Err(Error::InvalidParameter(format!(
            "ffn threshold {f} outside 1..={heads}"
        )));
    }
    let len = maps[0].len();
    if maps.iter().any(|m| m.len() != len) {
        return Err(Error::PlanMismatch("similarity maps differ in length".into()));
    }
    let mut rep = Vec::with_capacity(len);
    let mut keep = Vec::new();
    let mut reps: Vec<usize> = Vec::with_capacity(heads);
    for t in 0..len {
        reps.clear();
        reps.extend(maps.iter().map(|m| m.representative(t)));
        reps.sort_unstable();
        let (mfi, count) = mode_smallest(&reps);
        // representatives precede t, so rep[mfi] is already resolved
        if mfi != t && count >= f {
            rep.push(rep[mfi]);
        } else {
            rep.push(t);
            keep.push(t);
        }
    }
    Ok((keep, rep))
}

/// Most frequent value of a sorted slice; ties to the smallest value.
fn mode_smallest(sorted: &[usize]) -> (usize, usize) {
    let mut best = (sorted[0], 0);
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let run = sorted[i..].iter().take_while(|&&x| x == v).count();
        if run > best.1 {
            best = (v, run);
        }
        i += run;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsity::window::{partition_windows, Role};

    fn maps_for(roles_per_head: &[Vec<Role>], window: usize) -> Vec<SimilarityMap> {
        let part = partition_windows(roles_per_head[0].len(), window);
        roles_per_head
            .iter()
            .enumerate()
            .map(|(h, r)| SimilarityMap::from_roles(h, r.clone(), &part).unwrap())
            .collect()
    }

    /// Token 6 is Similar(5) in six of eight heads.
    fn eight_heads() -> Vec<SimilarityMap> {
        let mut per_head = Vec::new();
        for h in 0..8 {
            let mut roles = vec![Role::Critical; 8];
            if h < 6 {
                roles[6] = Role::Similar(5);
            }
            per_head.push(roles);
        }
        maps_for(&per_head, 8)
    }

    #[test]
    fn all_critical_keeps_everything() {
        let maps = maps_for(&vec![vec![Role::Critical; 4]; 3], 4);
        let (keep, rep) = mfi_tokens(&maps, 1).unwrap();
        assert_eq!(keep, vec![0, 1, 2, 3]);
        assert_eq!(rep, vec![0, 1, 2, 3]);
    }

    #[test]
    fn threshold_decides() {
        let maps = eight_heads();
        let (keep, rep) = mfi_tokens(&maps, 5).unwrap();
        assert!(!keep.contains(&6));
        assert_eq!(rep[6], 5);
        let (keep, rep) = mfi_tokens(&maps, 7).unwrap();
        assert!(keep.contains(&6));
        assert_eq!(rep[6], 6);
    }

    #[test]
    fn chains_resolve_to_kept_tokens() {
        // t1 -> {0, 0, 1, 1}: 0 wins the tie; t2 -> {2, 2, 1, 1}: 1, itself pruned to 0
        let a = vec![Role::Critical, Role::Similar(0), Role::Critical];
        let b = vec![Role::Critical, Role::Critical, Role::Similar(1)];
        let maps = maps_for(&[a.clone(), a, b.clone(), b], 4);
        let (keep, rep) = mfi_tokens(&maps, 2).unwrap();
        assert_eq!(keep, vec![0]);
        assert_eq!(rep, vec![0, 0, 0]);
    }

    #[test]
    fn tie_goes_to_smaller_index() {
        assert_eq!(mode_smallest(&[1, 1, 3, 3]), (1, 2));
        assert_eq!(mode_smallest(&[2, 4, 4]), (4, 2));
    }

    #[test]
    fn threshold_range() {
        let maps = eight_heads();
        assert!(mfi_tokens(&maps, 0).is_err());
        assert!(mfi_tokens(&maps, 9).is_err());
    }
}
