//! Hungarian method for square assignment problems.

use crate::error::{Error, Result};

/// Minimum-cost assignment on a row-major `n x n` matrix.
///
/// Returns the total cost and `perm` with row `i` assigned to column
/// `perm[i]`. Rows are inserted one at a time along shortest augmenting
/// paths (potentials keep reduced costs nonnegative); columns are scanned in
/// index order and ties keep the first minimum, so the result is
/// deterministic. `O(n^3)`.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Result<(f64, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Empty);
    }
    if cost.len() != n * n {
        return Err(Error::LengthMismatch(cost.len(), n * n));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite);
    }
    // 1-based bookkeeping with a virtual column 0 holding the row being inserted.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[row_of[j] - 1] = j - 1;
    }
    let total = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total, perm))
}

/// Maximum-weight assignment, via the minimum of the negated matrix.
pub fn max_weight_assignment(weight: &[f64], n: usize) -> Result<(f64, Vec<usize>)> {
    let neg: Vec<f64> = weight.iter().map(|w| -w).collect();
    let (value, perm) = min_cost_assignment(&neg, n)?;
    Ok((-value, perm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, n, row + 1, used, acc + cost[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn classic_instance() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let (v, perm) = min_cost_assignment(&cost, 3).unwrap();
        assert_eq!(v, 5.0);
        assert_eq!(perm, vec![1, 0, 2]);
    }

    #[test]
    fn agrees_with_brute_force() {
        for n in 1..=6 {
            let cost: Vec<f64> = (0..n * n)
                .map(|k| ((k * 37 + 11) % 23) as f64 - 7.5)
                .collect();
            let (v, perm) = min_cost_assignment(&cost, n).unwrap();
            assert!((v - brute(&cost, n)).abs() < 1e-12);
            let mut seen = perm.clone();
            seen.sort_unstable();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn maximization() {
        let w = [0.0, 0.0, 0.0, 2.0, 5.0, 2.0, 1.0, 4.0, 0.0];
        let (v, _) = max_weight_assignment(&w, 3).unwrap();
        assert_eq!(v, -brute(&w.iter().map(|x| -x).collect::<Vec<_>>(), 3));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(min_cost_assignment(&[], 0).is_err());
        assert!(min_cost_assignment(&[1.0, 2.0], 2).is_err());
        assert!(min_cost_assignment(&[f64::NAN], 1).is_err());
    }
}
