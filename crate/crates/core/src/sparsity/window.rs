use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::Spa;

/// Non-overlapping row windows of a fixed size; the remainder forms a last, shorter window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPartition {
    window: usize,
    ranges: Vec<Range<usize>>,
}

impl WindowPartition {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn seq_len(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn window_of(&self, row: usize) -> usize {
        row / self.window
    }
}

/// # Panics
/// If `window` is zero.
pub fn partition_windows(len: usize, window: usize) -> WindowPartition {
    assert!(window >= 1, "window size must be at least 1");
    let ranges = (0..len)
        .step_by(window)
        .map(|start| start..(start + window).min(len))
        .collect();
    WindowPartition { window, ranges }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Critical,
    /// Represented by the given earlier critical row of the same window.
    Similar(usize),
}

/// Which qualifying critical row a similar row attaches to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttachRule {
    /// First earlier critical within the threshold, in row order.
    #[default]
    FirstFit,
    /// Closest critical within the threshold; equal distances go to the earlier row.
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityMap {
    head: usize,
    roles: Vec<Role>,
    distance_evals: usize,
}

impl SimilarityMap {
    /// Checks that similar rows point at earlier critical rows of their own window.
    pub fn from_roles(head: usize, roles: Vec<Role>, partition: &WindowPartition) -> Result<Self> {
        if partition.seq_len() != roles.len() {
            return Err(Error::InvalidParameter(format!(
                "{} roles for a partition of {} rows",
                roles.len(),
                partition.seq_len()
            )));
        }
        for (row, role) in roles.iter().enumerate() {
            if let Role::Similar(c) = *role {
                let ok = c < row
                    && partition.window_of(c) == partition.window_of(row)
                    && roles[c] == Role::Critical;
                if !ok {
                    return Err(Error::InvalidParameter(format!(
                        "row {row} cannot be represented by row {c}"
                    )));
                }
            }
        }
        Ok(Self {
            head,
            roles,
            distance_evals: 0,
        })
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    /// Row-pair distances evaluated while building the map.
    pub fn distance_evals(&self) -> usize {
        self.distance_evals
    }

    pub fn is_critical(&self, row: usize) -> bool {
        self.roles[row] == Role::Critical
    }

    /// The critical row standing in for `row` (itself when critical).
    pub fn representative(&self, row: usize) -> usize {
        match self.roles[row] {
            Role::Critical => row,
            Role::Similar(c) => c,
        }
    }

    pub fn critical_rows(&self) -> Vec<usize> {
        (0..self.roles.len()).filter(|&r| self.is_critical(r)).collect()
    }

    pub fn similar_count(&self) -> usize {
        self.roles.iter().filter(|r| matches!(r, Role::Similar(_))).count()
    }
}

fn masked_row(spa: &Spa, row: usize) -> Vec<i64> {
    (0..spa.len()).map(|j| spa.masked(row, j)).collect()
}

fn l1_distance(a: &[i64], b: &[i64]) -> f64 {
    let mut diff = 0i64;
    let mut mass = 0i64;
    for (&x, &y) in a.iter().zip(b) {
        diff += (x - y).abs();
        mass += x.abs() + y.abs();
    }
    if mass == 0 {
        0.0
    } else {
        diff as f64 / mass as f64
    }
}

/// L1 distance between two masked SPA rows, normalized by their combined L1 mass.
///
/// Lies in `[0, 1]`; zero for identical rows (or two empty rows), one for disjoint supports.
pub fn row_distance(spa: &Spa, i: usize, c: usize) -> f64 {
    l1_distance(&masked_row(spa, i), &masked_row(spa, c))
}

pub fn validate_threshold(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "similarity threshold {s} outside [0, 1]"
        )))
    }
}

pub fn window_similarity(spa: &Spa, partition: &WindowPartition, s: f64) -> Result<SimilarityMap> {
    window_similarity_with(spa, partition, s, AttachRule::FirstFit)
}

/// Greedy critical/similar split inside each window, rows in ascending order.
///
/// A row compares itself against the critical rows already chosen in its
/// window and becomes `Similar` to one within distance `s`; otherwise it is
/// critical. At most `w' - 1` distances per row in a window of `w'` rows.
pub fn window_similarity_with(
    spa: &Spa,
    partition: &WindowPartition,
    s: f64,
    rule: AttachRule,
) -> Result<SimilarityMap> {
    validate_threshold(s)?;
    if partition.seq_len() != spa.len() {
        return Err(Error::InvalidParameter(format!(
            "partition covers {} rows, SPA has {}",
            partition.seq_len(),
            spa.len()
        )));
    }
    let mut roles = Vec::with_capacity(spa.len());
    let mut evals = 0;
    for range in partition.ranges() {
        let rows: Vec<Vec<i64>> = range.clone().map(|r| masked_row(spa, r)).collect();
        // indices into `rows` of this window's critical rows
        let mut criticals: Vec<usize> = Vec::new();
        for (local, row) in rows.iter().enumerate() {
            let mut chosen: Option<(usize, f64)> = None;
            for &c in &criticals {
                let d = l1_distance(row, &rows[c]);
                evals += 1;
                if d > s {
                    continue;
                }
                match rule {
                    AttachRule::FirstFit => {
                        chosen = Some((c, d));
                        break;
                    }
                    AttachRule::Nearest => {
                        if chosen.is_none_or(|(_, best)| d < best) {
                            chosen = Some((c, d));
                        }
                    }
                }
            }
            match chosen {
                Some((c, _)) => roles.push(Role::Similar(range.start + c)),
                None => {
                    criticals.push(local);
                    roles.push(Role::Critical);
                }
            }
        }
    }
    Ok(SimilarityMap {
        head: spa.head(),
        roles,
        distance_evals: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::Pam;
    use crate::tensor::Matrix;

    fn spa_from_rows(rows: &[&[i32]]) -> Spa {
        let n = rows.len();
        let scores = Matrix::from_fn(n, n, |i, j| rows[i][j]);
        let keep = Matrix::from_fn(n, n, |i, j| rows[i][j] != 0);
        Spa::from_mask(Pam { head: 0, scores }, keep, 1.0).unwrap()
    }

    #[test]
    fn partitions() {
        assert_eq!(partition_windows(16, 8).ranges(), &[0..8, 8..16]);
        assert_eq!(partition_windows(13, 8).ranges(), &[0..8, 8..13]);
        assert_eq!(partition_windows(4, 8).ranges()[0], 0..4);
        assert_eq!(partition_windows(4, 8).len(), 1);
        assert_eq!(partition_windows(13, 8).window_of(12), 1);
    }

    #[test]
    fn distances() {
        let spa = spa_from_rows(&[&[4, 0, 4, 0], &[4, 0, 0, 4], &[4, 0, 4, 0], &[0, 3, 0, 0]]);
        assert_eq!(row_distance(&spa, 0, 2), 0.0);
        assert_eq!(row_distance(&spa, 0, 1), 0.5);
        let disjoint = spa_from_rows(&[&[2, 0], &[0, 2]]);
        assert_eq!(row_distance(&disjoint, 0, 1), 1.0);
        let empty = spa_from_rows(&[&[0, 0], &[0, 0]]);
        assert_eq!(row_distance(&empty, 0, 1), 0.0);
    }

    #[test]
    fn greedy_roles() {
        let spa = spa_from_rows(&[&[5, 1, 0, 0], &[5, 1, 0, 0], &[5, 1, 0, 0], &[0, 0, 7, 7]]);
        let part = partition_windows(4, 8);
        let map = window_similarity(&spa, &part, 0.1).unwrap();
        assert_eq!(
            map.roles(),
            &[Role::Critical, Role::Similar(0), Role::Similar(0), Role::Critical]
        );
        let all = window_similarity(&spa, &part, 1.0).unwrap();
        assert_eq!(all.critical_rows(), vec![0]);
        let none = window_similarity(&spa, &part, 0.0).unwrap();
        assert_eq!(none.critical_rows(), vec![0, 3]);
    }

    #[test]
    fn nearest_rule_prefers_closer_critical() {
        // rows 0 and 1 are critical at s = 0.3; row 2 sits closer to row 1
        let spa = spa_from_rows(&[&[8, 0, 0], &[0, 8, 0], &[1, 7, 0]]);
        let part = partition_windows(3, 8);
        let first = window_similarity_with(&spa, &part, 1.0, AttachRule::FirstFit).unwrap();
        assert_eq!(first.roles()[1], Role::Similar(0));
        let near = window_similarity_with(&spa, &part, 0.9, AttachRule::Nearest).unwrap();
        assert_eq!(near.roles(), &[Role::Critical, Role::Critical, Role::Similar(1)]);
    }

    #[test]
    fn similarity_stays_inside_windows() {
        let rows: Vec<Vec<i32>> = (0..5).map(|_| vec![1; 5]).collect();
        let refs: Vec<&[i32]> = rows.iter().map(|r| r.as_slice()).collect();
        let spa = spa_from_rows(&refs);
        let map = window_similarity(&spa, &partition_windows(5, 2), 1.0).unwrap();
        assert_eq!(map.critical_rows(), vec![0, 2, 4]);
        assert_eq!(map.representative(3), 2);
    }

    #[test]
    fn threshold_range() {
        let spa = spa_from_rows(&[&[1]]);
        let part = partition_windows(1, 8);
        assert!(window_similarity(&spa, &part, -0.1).is_err());
        assert!(window_similarity(&spa, &part, 1.1).is_err());
    }

    #[test]
    fn from_roles_validation() {
        let part = partition_windows(4, 2);
        assert!(SimilarityMap::from_roles(0, vec![Role::Critical, Role::Similar(0), Role::Critical, Role::Similar(2)], &part).is_ok());
        // crosses a window boundary
        assert!(SimilarityMap::from_roles(0, vec![Role::Critical, Role::Critical, Role::Similar(1), Role::Critical], &part).is_err());
        // points at a similar row
        assert!(SimilarityMap::from_roles(0, vec![Role::Critical, Role::Similar(0), Role::Critical, Role::Similar(3)], &part).is_err());
    }
}
