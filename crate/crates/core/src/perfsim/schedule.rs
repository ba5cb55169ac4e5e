use serde::{Deserialize, Serialize};

/// Cycles of one window: prediction-unit work and PE-array generation work.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowStage {
    pub pred: u64,
    pub gen: u64,
}

/// K prediction, then every window in order with no overlap.
pub fn sequential_cycles(k_pred: u64, windows: &[WindowStage]) -> u64 {
    k_pred + windows.iter().map(|w| w.pred + w.gen).sum::<u64>()
}

/// Two-unit pipeline: window `i + 1` is predicted while window `i` is generated.
///
/// `k_pred + pred(0) + sum_i max(pred(i+1), gen(i)) + gen(last)`.
pub fn progressive_schedule(k_pred: u64, windows: &[WindowStage]) -> u64 {
    let Some(first) = windows.first() else {
        return k_pred;
    };
    let overlapped: u64 = windows
        .windows(2)
        .map(|pair| pair[1].pred.max(pair[0].gen))
        .sum();
    k_pred + first.pred + overlapped + windows[windows.len() - 1].gen
}

/// Per-row vector counts spread over the PE lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub balanced: u64,
    pub unbalanced: u64,
    pub utilization: f64,
}

/// Static versus compressed assignment of row work to `lines` PE lines.
///
/// Unbalanced: rows go to lines in order, `lines` at a time, and each group
/// takes as long as its largest row. Balanced: the compressed pool is split
/// evenly at some per-line capacity `c >= ceil(total / lines)`; every row
/// longer than `c` is split and reassigned at one extra cycle. The best `c`
/// is taken, and never more than the unbalanced time.
pub fn dynamic_allocation_cycles(counts: &[u64], lines: usize) -> Allocation {
    let lines = lines.max(1);
    let total: u64 = counts.iter().sum();
    let unbalanced: u64 = counts
        .chunks(lines)
        .map(|g| g.iter().copied().max().unwrap_or(0))
        .sum();
    if total == 0 {
        return Allocation {
            balanced: 0,
            unbalanced,
            utilization: 1.0,
        };
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let floor = total.div_ceil(lines as u64);
    let mut best = unbalanced;
    // candidate capacities: the floor and each distinct count above it
    let mut over = sorted.iter().take_while(|&&c| c > floor).count() as u64;
    best = best.min(floor + over);
    for (i, &c) in sorted.iter().enumerate() {
        if c <= floor {
            break;
        }
        // rows strictly larger than capacity c
        over = sorted[..i].iter().filter(|&&x| x > c).count() as u64;
        best = best.min(c + over);
    }
    Allocation {
        balanced: best,
        unbalanced,
        utilization: total as f64 / (lines as u64 * best) as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws(pairs: &[(u64, u64)]) -> Vec<WindowStage> {
        pairs.iter().map(|&(pred, gen)| WindowStage { pred, gen }).collect()
    }

    #[test]
    fn two_equal_windows() {
        let w = ws(&[(100, 100), (100, 100)]);
        assert_eq!(progressive_schedule(50, &w), 350);
        assert_eq!(sequential_cycles(50, &w), 450);
    }

    #[test]
    fn one_window_has_no_overlap() {
        let w = ws(&[(30, 70)]);
        assert_eq!(progressive_schedule(5, &w), sequential_cycles(5, &w));
    }

    #[test]
    fn hidden_prediction() {
        let w = ws(&[(10, 1000), (10, 1000), (10, 1000)]);
        assert_eq!(progressive_schedule(40, &w), 40 + 10 + 3000);
    }

    #[test]
    fn allocation_examples() {
        let mut one = vec![0; 16];
        one[0] = 8;
        let a = dynamic_allocation_cycles(&one, 16);
        assert_eq!((a.unbalanced, a.balanced), (8, 2));
        let uniform = vec![4; 32];
        let a = dynamic_allocation_cycles(&uniform, 16);
        assert_eq!((a.unbalanced, a.balanced, a.utilization), (8, 8, 1.0));
        let empty = dynamic_allocation_cycles(&[], 16);
        assert_eq!((empty.unbalanced, empty.balanced), (0, 0));
    }

    #[test]
    fn skewed_rows_split() {
        // 12 rows of 1 and one of 20 over 4 lines: total 32, floor 8, one row over
        let mut counts = vec![1; 12];
        counts.push(20);
        let a = dynamic_allocation_cycles(&counts, 4);
        assert_eq!(a.unbalanced, 1 + 1 + 1 + 20);
        assert_eq!(a.balanced, 9);
    }
}
