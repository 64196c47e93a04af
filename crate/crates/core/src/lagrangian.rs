//! Uniform-weight measures represented as maps on `n` equally likely labels.
//!
//! For uniform label weights the supremum over measure-preserving
//! rearrangements is a maximum over permutations, so the pairing and `w_2`
//! between the laws of two maps reduce to assignment problems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{max_weight_assignment, min_cost_assignment};
use crate::convex::{evaluate, ConvexityReport, Functional};
use crate::error::{Error, Result};
use crate::measure::{Coupling, DiscreteMeasure, Point};

/// Largest label count accepted by [`PermutationMethod::Brute`].
pub const MAX_BRUTE_LABELS: usize = 8;

/// A map `X: {0, .., n-1} -> R^d` on uniformly weighted labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMap", into = "RawMap")]
pub struct LagrangianMap {
    values: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct RawMap {
    n: usize,
    values: Vec<Point>,
}

impl TryFrom<RawMap> for LagrangianMap {
    type Error = Error;
    fn try_from(raw: RawMap) -> Result<Self> {
        if raw.n != raw.values.len() {
            return Err(Error::LengthMismatch(raw.n, raw.values.len()));
        }
        LagrangianMap::new(raw.values)
    }
}

impl From<LagrangianMap> for RawMap {
    fn from(x: LagrangianMap) -> Self {
        RawMap {
            n: x.values.len(),
            values: x.values,
        }
    }
}

impl LagrangianMap {
    pub fn new(values: Vec<Point>) -> Result<Self> {
        let Some(first) = values.first() else {
            return Err(Error::Empty);
        };
        let d = first.dim();
        if d == 0 || d > crate::measure::MAX_DIM {
            return Err(Error::UnsupportedDimension(d));
        }
        if let Some(p) = values.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.dim(),
            });
        }
        if !values.iter().all(Point::is_finite) {
            return Err(Error::NonFinite);
        }
        Ok(LagrangianMap { values })
    }

    /// Scalar map from a list of reals.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| Point::scalar(x)).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub fn values(&self) -> &[Point] {
        &self.values
    }

    /// `||X||^2 = (1/n) sum_q |X(q)|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(Point::norm_sq).sum::<f64>() / self.n() as f64
    }

    /// `X o g` for a permutation `g` of the labels.
    pub fn compose(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n())?;
        Ok(LagrangianMap {
            values: perm.iter().map(|&j| self.values[j].clone()).collect(),
        })
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::LengthMismatch(perm.len(), n));
    }
    let mut seen = vec![false; n];
    for &j in perm {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
    }
    Ok(())
}

fn check_pair(x1: &LagrangianMap, x2: &LagrangianMap) -> Result<()> {
    if x1.n() != x2.n() {
        return Err(Error::LengthMismatch(x1.n(), x2.n()));
    }
    if x1.dim() != x2.dim() {
        return Err(Error::DimensionMismatch {
            expected: x1.dim(),
            found: x2.dim(),
        });
    }
    Ok(())
}

/// The law `(1/n) sum_q delta_{X(q)}`, repeated values merged.
pub fn law(x: &LagrangianMap) -> DiscreteMeasure {
    DiscreteMeasure::uniform(x.values.clone()).expect("validated map has a valid law")
}

/// The coupling `(X1, X2)_# uniform` of the two laws.
pub fn joint_law(x1: &LagrangianMap, x2: &LagrangianMap) -> Result<Coupling> {
    check_pair(x1, x2)?;
    let n = x1.n();
    let pairs = x1
        .values
        .iter()
        .cloned()
        .zip(x2.values.iter().cloned())
        .collect();
    Coupling::new(pairs, vec![1.0 / n as f64; n])
}

/// The segment point `(1 - t) X0 + t X1`, exact at the endpoints.
pub fn segment(x0: &LagrangianMap, x1: &LagrangianMap, t: f64) -> Result<LagrangianMap> {
    check_pair(x0, x1)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "interpolation time {t} outside [0, 1]"
        )));
    }
    let values = x0
        .values
        .iter()
        .zip(&x1.values)
        .map(|(a, b)| match t {
            0.0 => a.clone(),
            1.0 => b.clone(),
            _ => a.lerp(b, t),
        })
        .collect();
    Ok(LagrangianMap { values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMethod {
    /// Exhaustive search over all `n!` permutations (`n <= 8`).
    Brute,
    /// Hungarian method.
    Assignment,
}

/// An optimal permutation with its value; `X2(perm[q])` is paired with `X1(q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationOptimum {
    pub value: f64,
    pub permutation: Vec<usize>,
}

/// Row-major `n x n` matrix of `f(X1(i), X2(j))`.
fn label_matrix(
    x1: &LagrangianMap,
    x2: &LagrangianMap,
    f: impl Fn(&Point, &Point) -> f64,
) -> Vec<f64> {
    x1.values
        .iter()
        .flat_map(|a| x2.values.iter().map(|b| f(a, b)).collect::<Vec<_>>())
        .collect()
}

/// Advances `perm` to the next permutation in lexicographic order.
fn next_permutation(perm: &mut [usize]) -> bool {
    let Some(i) = (1..perm.len()).rev().find(|&i| perm[i - 1] < perm[i]) else {
        return false;
    };
    let j = (i..perm.len())
        .rev()
        .find(|&j| perm[j] > perm[i - 1])
        .unwrap();
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Best permutation by exhaustive search; `better(a, b)` is true when `a`
/// strictly improves on `b`. The lexicographically first optimum is kept.
fn brute_force(
    matrix: &[f64],
    n: usize,
    better: impl Fn(f64, f64) -> bool,
) -> Result<(f64, Vec<usize>)> {
    if n > MAX_BRUTE_LABELS {
        return Err(Error::TooLarge(format!(
            "exhaustive permutation search needs n <= {MAX_BRUTE_LABELS}, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let total: f64 = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| matrix[i * n + j])
            .sum();
        if best.as_ref().is_none_or(|(b, _)| better(total, *b)) {
            best = Some((total, perm.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// `max_g (1/n) sum_q <X1(q), X2(g(q))>`, which equals `<law(X1), law(X2)>`.
pub fn pairing_by_permutation(
    x1: &LagrangianMap,
    x2: &LagrangianMap,
    method: PermutationMethod,
) -> Result<PermutationOptimum> {
    check_pair(x1, x2)?;
    let n = x1.n();
    let matrix = label_matrix(x1, x2, Point::dot);
    let (total, permutation) = match method {
        PermutationMethod::Brute => brute_force(&matrix, n, |a, b| a > b)?,
        PermutationMethod::Assignment => max_weight_assignment(&matrix, n)?,
    };
    Ok(PermutationOptimum {
        value: total / n as f64,
        permutation,
    })
}

/// `min_g (1/n) sum_q |X1(q) - X2(g(q))|^2`, which equals `w_2^2` of the laws.
pub fn w2_by_permutation(
    x1: &LagrangianMap,
    x2: &LagrangianMap,
    method: PermutationMethod,
) -> Result<PermutationOptimum> {
    check_pair(x1, x2)?;
    let n = x1.n();
    let matrix = label_matrix(x1, x2, Point::dist_sq);
    let (total, permutation) = match method {
        PermutationMethod::Brute => brute_force(&matrix, n, |a, b| a < b)?,
        PermutationMethod::Assignment => min_cost_assignment(&matrix, n)?,
    };
    Ok(PermutationOptimum {
        value: total / n as f64,
        permutation,
    })
}

/// Convexity of `t -> phi(law((1 - t) X0 + t X1))` at the given times.
pub fn lifted_convexity_check(
    phi: &Functional,
    x0: &LagrangianMap,
    x1: &LagrangianMap,
    ts: &[f64],
    tol: f64,
) -> Result<ConvexityReport> {
    check_pair(x0, x1)?;
    let f0 = evaluate(phi, &law(x0))?;
    let f1 = evaluate(phi, &law(x1))?;
    let excess = ts
        .par_iter()
        .map(|&t| {
            let ft = evaluate(phi, &law(&segment(x0, x1, t)?))?;
            Ok((t, ft - (1.0 - t) * f0 - t * f1))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_excess = excess.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(ConvexityReport {
        holds: excess.iter().all(|e| e.1 <= tol),
        excess,
        max_excess,
    })
}
