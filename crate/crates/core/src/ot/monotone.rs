//! Cyclical monotonicity of finite sets of pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Point;

/// Longest cycle accepted by the enumerating checkers.
pub const MAX_CYCLE: usize = 6;

/// A violating cycle: `cycle[t]` is sent to `cycle[t + 1]` (cyclically).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleWitness {
    pub cycle: Vec<usize>,
    pub value: f64,
}

impl CycleWitness {
    /// The permutation `sigma` restricted to the witness indices, as
    /// `(n, sigma(n))` pairs.
    pub fn permutation(&self) -> Vec<(usize, usize)> {
        let k = self.cycle.len();
        (0..k)
            .map(|t| (self.cycle[t], self.cycle[(t + 1) % k]))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub monotone: bool,
    pub cycles_checked: usize,
    pub witness: Option<CycleWitness>,
}

/// Searches all cycles of length `2..=max_len` over `0..n` for one whose
/// edge sum `sum_t edge(c_t, c_{t+1})` is below `-tol`.
///
/// Every permutation splits into disjoint cycles and fixed points contribute
/// nothing, so checking cycles covers all permutations of all subsets. Each
/// cycle is visited once, rooted at its smallest index.
pub fn find_negative_cycle<F>(
    n: usize,
    max_len: usize,
    tol: f64,
    edge: F,
) -> Result<MonotonicityReport>
where
    F: Fn(usize, usize) -> f64,
{
    if max_len > MAX_CYCLE {
        return Err(Error::TooLarge(format!(
            "cycle length {max_len} exceeds {MAX_CYCLE}"
        )));
    }
    let mut checked = 0usize;
    let mut path = Vec::with_capacity(max_len);
    let mut used = vec![false; n];
    for root in 0..n {
        path.clear();
        path.push(root);
        used[root] = true;
        let found = extend(
            root,
            0.0,
            &mut path,
            &mut used,
            max_len,
            tol,
            &edge,
            &mut checked,
        );
        used[root] = false;
        if let Some(w) = found {
            return Ok(MonotonicityReport {
                monotone: false,
                cycles_checked: checked,
                witness: Some(w),
            });
        }
    }
    Ok(MonotonicityReport {
        monotone: true,
        cycles_checked: checked,
        witness: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn extend<F>(
    root: usize,
    partial: f64,
    path: &mut Vec<usize>,
    used: &mut [bool],
    max_len: usize,
    tol: f64,
    edge: &F,
    checked: &mut usize,
) -> Option<CycleWitness>
where
    F: Fn(usize, usize) -> f64,
{
    let last = *path.last().unwrap();
    if path.len() >= 2 {
        *checked += 1;
        let value = partial + edge(last, root);
        if value < -tol {
            return Some(CycleWitness {
                cycle: path.clone(),
                value,
            });
        }
    }
    if path.len() == max_len {
        return None;
    }
    for next in root + 1..used.len() {
        if used[next] {
            continue;
        }
        used[next] = true;
        path.push(next);
        let found = extend(
            root,
            partial + edge(last, next),
            path,
            used,
            max_len,
            tol,
            edge,
            checked,
        );
        path.pop();
        used[next] = false;
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Checks `sum_n <y_n, x_n - x_{sigma(n)}> >= -tol` over all subsets of at
/// most `max_cycle` pairs and all permutations `sigma` of them.
pub fn check_cyclical_monotonicity(
    pairs: &[(Point, Point)],
    max_cycle: usize,
    tol: f64,
) -> Result<MonotonicityReport> {
    find_negative_cycle(pairs.len(), max_cycle, tol, |a, b| {
        let (xa, ya) = &pairs[a];
        let xb = &pairs[b].0;
        ya.dot(&xa.sub(xb))
    })
}
