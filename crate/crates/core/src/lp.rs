//! Dense two-phase simplex for small linear programs in standard form.
//!
//! Solves `min c^T x` subject to `A x = b`, `x >= 0`. Bland's rule is used
//! for both the entering and the leaving variable, so the method terminates
//! on degenerate problems and its pivot sequence is a pure function of the
//! input. Intended for problems with at most a few hundred rows.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Equality multipliers `y` with `A^T y <= c` and `b^T y = value`.
    pub duals: Vec<f64>,
}

/// Row-major constraint matrix with `rows` rows and `cols` columns.
#[derive(Clone, Debug)]
pub struct Constraints {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Constraints {
    pub fn new(cols: usize) -> Self {
        Constraints {
            rows: 0,
            cols,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    /// Appends the row `sum_k coeffs[k].1 * x[coeffs[k].0] = rhs`.
    pub fn push(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        let start = self.a.len();
        self.a.resize(start + self.cols, 0.0);
        for &(k, v) in coeffs {
            self.a[start + k] += v;
        }
        self.b.push(rhs);
        self.rows += 1;
    }
}

struct Tableau {
    rows: usize,
    /// Structural columns followed by one artificial column per row.
    width: usize,
    cols: usize,
    t: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r * w + c];
        for k in 0..w {
            self.t[r * w + k] /= p;
        }
        self.rhs[r] /= p;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f == 0.0 {
                continue;
            }
            for k in 0..w {
                self.t[i * w + k] -= f * self.t[r * w + k];
            }
            self.rhs[i] -= f * self.rhs[r];
        }
        self.basis[r] = c;
    }

    fn reduced_cost(&self, cost: &[f64], c: usize) -> f64 {
        let mut z = cost[c];
        for r in 0..self.rows {
            z -= cost[self.basis[r]] * self.at(r, c);
        }
        z
    }

    /// Runs Bland's rule with the given column costs over `allowed` columns.
    fn optimize(&mut self, cost: &[f64], allowed: usize, max_iter: usize) -> Result<()> {
        let scale = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        for _ in 0..max_iter {
            let entering = (0..allowed)
                .filter(|c| !self.basis.contains(c))
                .find(|&c| self.reduced_cost(cost, c) < -PIVOT_TOL * scale);
            let Some(c) = entering else { return Ok(()) };
            let mut leave: Option<(f64, usize, usize)> = None;
            for r in 0..self.rows {
                let a = self.at(r, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs[r] / a;
                    let better = match leave {
                        None => true,
                        Some((best, _, var)) => {
                            ratio < best - PIVOT_TOL
                                || (ratio <= best + PIVOT_TOL && self.basis[r] < var)
                        }
                    };
                    if better {
                        leave = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            let Some((_, r, _)) = leave else {
                return Err(Error::Solver("linear program is unbounded".into()));
            };
            self.pivot(r, c);
        }
        Err(Error::Solver(format!("simplex exceeded {max_iter} pivots")))
    }
}

/// Minimizes `c^T x` subject to `cons`, `x >= 0`.
pub fn minimize(c: &[f64], cons: &Constraints) -> Result<LpSolution> {
    let (m, n) = (cons.rows, cons.cols);
    if c.len() != n {
        return Err(Error::LengthMismatch(c.len(), n));
    }
    if c.iter()
        .chain(&cons.a)
        .chain(&cons.b)
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite);
    }
    let width = n + m;
    let mut t = vec![0.0; m * width];
    let mut rhs = cons.b.clone();
    // Flip rows with negative right-hand side; remember it for the duals.
    let mut flip = vec![1.0; m];
    for r in 0..m {
        if rhs[r] < 0.0 {
            flip[r] = -1.0;
            rhs[r] = -rhs[r];
        }
        for k in 0..n {
            t[r * width + k] = flip[r] * cons.a[r * n + k];
        }
        t[r * width + n + r] = 1.0;
    }
    let mut tab = Tableau {
        rows: m,
        width,
        cols: n,
        t,
        rhs,
        basis: (n..n + m).collect(),
    };
    let max_iter = 50 * (n + m) * (m + 1) + 10_000;

    // Phase one: drive the artificials out.
    let mut phase_one = vec![0.0; width];
    phase_one[n..].iter_mut().for_each(|v| *v = 1.0);
    tab.optimize(&phase_one, width, max_iter)?;
    let infeasibility: f64 = (0..m)
        .filter(|&r| tab.basis[r] >= n)
        .map(|r| tab.rhs[r])
        .sum();
    let bscale = cons.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if infeasibility > 1e-9 * bscale {
        return Err(Error::Solver(format!(
            "linear program is infeasible (residual {infeasibility:e})"
        )));
    }
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(k) = (0..n).find(|&k| tab.at(r, k).abs() > PIVOT_TOL) {
                tab.pivot(r, k);
            }
            // Otherwise the row is redundant and its artificial stays at zero.
        }
    }

    // Phase two over the structural columns only.
    let mut phase_two = c.to_vec();
    phase_two.resize(width, 0.0);
    tab.optimize(&phase_two, tab.cols, max_iter)?;

    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs[r].max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    // The artificial block of the tableau holds B^{-1}, so y = c_B B^{-1}.
    let duals = (0..m)
        .map(|i| {
            let y: f64 = (0..m)
                .map(|r| phase_two[tab.basis[r]] * tab.at(r, n + i))
                .sum();
            flip[i] * y
        })
        .collect();
    Ok(LpSolution { x, value, duals })
}

/// Maximizes `c^T x` subject to `cons`, `x >= 0`; duals satisfy `A^T y >= c`.
pub fn maximize(c: &[f64], cons: &Constraints) -> Result<LpSolution> {
    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
    let sol = minimize(&neg, cons)?;
    Ok(LpSolution {
        x: sol.x,
        value: -sol.value,
        duals: sol.duals.into_iter().map(|y| -y).collect(),
    })
}

/// Transportation problem as a dense LP: `x[i*m + j]` with row and column
/// sums. Independent of the network simplex; used as a cross-check.
pub fn transport_lp(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<LpSolution> {
    let (n, m) = (supply.len(), demand.len());
    if cost.len() != n * m {
        return Err(Error::LengthMismatch(cost.len(), n * m));
    }
    let mut cons = Constraints::new(n * m);
    for (i, &a) in supply.iter().enumerate() {
        let row: Vec<(usize, f64)> = (0..m).map(|j| (i * m + j, 1.0)).collect();
        cons.push(&row, a);
    }
    for (j, &b) in demand.iter().enumerate() {
        let col: Vec<(usize, f64)> = (0..n).map(|i| (i * m + j, 1.0)).collect();
        cons.push(&col, b);
    }
    minimize(cost, &cons)
}
