//! Exhaustive vertex search for small transportation problems.
//!
//! Every vertex of the transportation polytope is supported on a spanning
//! forest of the bipartite graph of rows and columns. Peeling that forest one
//! leaf at a time, always taking the leaf with the smallest line index,
//! gives a unique elimination sequence in which each step picks a cell
//! `(i, j)`, ships `min(a_i, b_j)` and deletes the saturated line. The search
//! below walks exactly these canonical sequences (a line claimed to be
//! interior must later serve as a partner before it may be peeled), so each
//! vertex is reached once. Subtrees whose cost lower bound cannot beat the
//! incumbent are cut; this prunes but never skips a vertex that could
//! improve on the incumbent.
//!
//! This is an oracle for the network simplex and shares no code with it.

use crate::error::{Error, Result};

/// Largest `n * m` accepted by [`enumerate_vertices_min`].
pub const MAX_ENUMERATION_CELLS: usize = 64;

/// Node budget; exceeding it is reported as [`Error::TooLarge`] rather than
/// returning a possibly incomplete answer.
const MAX_NODES: u64 = 2_000_000_000;

struct Search<'a> {
    n: usize,
    m: usize,
    cost: &'a [f64],
    ra: Vec<f64>,
    rb: Vec<f64>,
    /// Remaining lines; rows are lines `0..n`, columns `n..n + m`.
    alive: Vec<bool>,
    /// Lines that were passed over as non-leaves and must act as a partner
    /// before being peeled.
    owes_partner: Vec<bool>,
    flows: Vec<(usize, usize, f64)>,
    /// Residuals at or below this are exhausted (rounding leftovers).
    eps: f64,
    best_value: f64,
    best_flows: Option<Vec<(usize, usize, f64)>>,
    nodes: u64,
}

impl Search<'_> {
    /// Value of a feasible dual for the residual problem, built by row
    /// reduction followed by column reduction (and the transposed order),
    /// which bounds every completion from below.
    fn lower_bound(&self) -> f64 {
        let rows: Vec<usize> = (0..self.n).filter(|&i| self.alive[i]).collect();
        let cols: Vec<usize> = (0..self.m).filter(|&j| self.alive[self.n + j]).collect();
        let c = |i: usize, j: usize| self.cost[i * self.m + j];
        let mut rows_first = 0.0;
        let u: Vec<f64> = rows
            .iter()
            .map(|&i| cols.iter().map(|&j| c(i, j)).fold(f64::INFINITY, f64::min))
            .collect();
        for (&i, ui) in rows.iter().zip(&u) {
            rows_first += self.ra[i] * ui;
        }
        for &j in &cols {
            let vj = rows
                .iter()
                .zip(&u)
                .map(|(&i, ui)| c(i, j) - ui)
                .fold(f64::INFINITY, f64::min);
            rows_first += self.rb[j] * vj;
        }
        let mut cols_first = 0.0;
        let v: Vec<f64> = cols
            .iter()
            .map(|&j| rows.iter().map(|&i| c(i, j)).fold(f64::INFINITY, f64::min))
            .collect();
        for (&j, vj) in cols.iter().zip(&v) {
            cols_first += self.rb[j] * vj;
        }
        for &i in &rows {
            let ui = cols
                .iter()
                .zip(&v)
                .map(|(&j, vj)| c(i, j) - vj)
                .fold(f64::INFINITY, f64::min);
            cols_first += self.ra[i] * ui;
        }
        f64::max(rows_first, cols_first)
    }

    fn search(&mut self, acc: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > MAX_NODES {
            return Err(Error::TooLarge(
                "vertex enumeration node budget exhausted".into(),
            ));
        }
        let rows_left = (0..self.n).any(|i| self.alive[i]);
        let cols_left = (0..self.m).any(|j| self.alive[self.n + j]);
        if !rows_left || !cols_left {
            if acc < self.best_value {
                self.best_value = acc;
                self.best_flows = Some(self.flows.clone());
            }
            return Ok(());
        }
        // Each owed column must have a row peeled into it, and the last row
        // of a component closes a tie and settles nothing (and vice versa).
        let alive_rows = (0..self.n).filter(|&i| self.alive[i]).count();
        let alive_cols = (0..self.m).filter(|&j| self.alive[self.n + j]).count();
        let owed_rows = (0..self.n)
            .filter(|&i| self.alive[i] && self.owes_partner[i])
            .count();
        let owed_cols = (self.n..self.n + self.m)
            .filter(|&c| self.alive[c] && self.owes_partner[c])
            .count();
        if owed_cols + 1 > alive_rows || owed_rows + 1 > alive_cols {
            return Ok(());
        }
        // Relative slack keeps ties with the incumbent explorable.
        let slack = 1e-12 * (1.0 + acc.abs() + self.best_value.abs());
        if acc + self.lower_bound() > self.best_value + slack {
            return Ok(());
        }
        // Cheap cells first so that good incumbents appear early.
        let mut cells: Vec<(usize, usize)> = (0..self.n)
            .filter(|&i| self.alive[i])
            .flat_map(|i| {
                (0..self.m)
                    .filter(|&j| self.alive[self.n + j])
                    .map(move |j| (i, j))
            })
            .collect();
        cells.sort_by(|&(i, j), &(k, l)| {
            self.cost[i * self.m + j].total_cmp(&self.cost[k * self.m + l])
        });
        for (i, j) in cells {
            let cj = self.n + j;
            {
                let f = self.ra[i].min(self.rb[j]);
                // The peeled leaf is the line that saturates; on a tie both
                // endpoints are leaves and the row, having the smaller line
                // index, is the one peeled.
                let (leaf, partner) = if self.ra[i] <= self.rb[j] {
                    (i, cj)
                } else {
                    (cj, i)
                };
                if self.owes_partner[leaf]
                    || (closes(self.ra[i], self.rb[j], self.eps) && self.owes_partner[partner])
                {
                    continue;
                }
                let saved_owes = self.owes_partner.clone();
                let (sa, sb) = (self.ra[i], self.rb[j]);
                self.owes_partner[partner] = false;
                for x in 0..leaf {
                    if self.alive[x] && x != partner {
                        self.owes_partner[x] = true;
                    }
                }
                self.ra[i] -= f;
                self.rb[j] -= f;
                let (ai, aj) = (self.alive[i], self.alive[cj]);
                if self.ra[i] <= self.eps {
                    self.alive[i] = false;
                }
                if self.rb[j] <= self.eps {
                    self.alive[cj] = false;
                }
                self.flows.push((i, j, f));
                let res = self.search(acc + f * self.cost[i * self.m + j]);
                self.flows.pop();
                self.alive[i] = ai;
                self.alive[cj] = aj;
                self.ra[i] = sa;
                self.rb[j] = sb;
                self.owes_partner = saved_owes;
                res?;
            }
        }
        Ok(())
    }
}

/// Whether cell `(i, j)` saturates both lines, i.e. is the last edge of a
/// tree component. Its partner then gains no further edge, so a partner owed
/// from an earlier step cannot be settled here.
fn closes(ra: f64, rb: f64, eps: f64) -> bool {
    (ra - rb).abs() <= eps
}

fn residual_eps(supply: &[f64]) -> f64 {
    1e-12 * supply.iter().sum::<f64>()
}

/// Nonzero flows `(row, column, mass)` of a transport vertex.
pub type Flows = Vec<(usize, usize, f64)>;

/// Minimum of `sum c_ij x_ij` over all vertices of the transportation
/// polytope, with the flows of a minimizing vertex (row-major order).
pub fn enumerate_vertices_min(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
) -> Result<(f64, Flows)> {
    enumerate_vertices_min_with_potentials(supply, demand, cost, None)
}

/// As [`enumerate_vertices_min`], with optional column potentials `v` that
/// sharpen pruning. Any `v` yields valid bounds (row potentials are derived
/// from it by reduction, so the dual pair is always feasible); the result is
/// the exact vertex minimum whatever `v` is, and only the running time
/// depends on its quality.
pub fn enumerate_vertices_min_with_potentials(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
    column_potentials: Option<&[f64]>,
) -> Result<(f64, Flows)> {
    super::transport::validate(supply, demand, cost)?;
    let (n, m) = (supply.len(), demand.len());
    if n * m > MAX_ENUMERATION_CELLS {
        return Err(Error::TooLarge(format!(
            "vertex enumeration limited to {MAX_ENUMERATION_CELLS} cells, got {n}x{m}"
        )));
    }
    let zeros = vec![0.0; m];
    let v = match column_potentials {
        Some(v) if v.len() == m && v.iter().all(|x| x.is_finite()) => v,
        Some(v) => return Err(Error::LengthMismatch(v.len(), m)),
        None => &zeros,
    };
    // Reduced costs differ from the true costs by a constant on the polytope
    // (the dual objective), so they have the same minimizing vertices.
    let mut reduced: Vec<f64> = (0..n * m).map(|k| cost[k] - v[k % m]).collect();
    for row in reduced.chunks_mut(m) {
        let u = row.iter().copied().fold(f64::INFINITY, f64::min);
        row.iter_mut().for_each(|r| *r -= u);
    }
    let mut search = Search {
        n,
        m,
        cost: &reduced,
        ra: supply.to_vec(),
        rb: demand.to_vec(),
        alive: vec![true; n + m],
        owes_partner: vec![false; n + m],
        flows: Vec::new(),
        eps: residual_eps(supply),
        best_value: f64::INFINITY,
        best_flows: None,
        nodes: 0,
    };
    search.search(0.0)?;
    let mut flows = search
        .best_flows
        .ok_or_else(|| Error::Solver("vertex enumeration found no vertex".into()))?;
    flows.retain(|&(_, _, f)| f > 0.0);
    flows.sort_by_key(|&(i, j, _)| (i, j));
    let value = flows.iter().map(|&(i, j, f)| f * cost[i * m + j]).sum();
    Ok((value, flows))
}

/// Number of canonical elimination sequences, i.e. vertices for
/// nondegenerate marginals. Exponential; for tests on tiny instances.
pub fn count_vertices(supply: &[f64], demand: &[f64]) -> Result<usize> {
    let (n, m) = (supply.len(), demand.len());
    let zero = vec![0.0; n * m];
    super::transport::validate(supply, demand, &zero)?;
    #[allow(clippy::too_many_arguments)]
    fn walk(
        eps: f64,
        n: usize,
        m: usize,
        ra: &mut [f64],
        rb: &mut [f64],
        alive: &mut [bool],
        owes: &mut [bool],
    ) -> usize {
        if !(0..n).any(|i| alive[i]) || !(0..m).any(|j| alive[n + j]) {
            return 1;
        }
        let mut total = 0;
        for i in 0..n {
            for j in 0..m {
                let cj = n + j;
                if !alive[i] || !alive[cj] {
                    continue;
                }
                let f = ra[i].min(rb[j]);
                let (leaf, partner) = if ra[i] <= rb[j] { (i, cj) } else { (cj, i) };
                if owes[leaf] || (closes(ra[i], rb[j], eps) && owes[partner]) {
                    continue;
                }
                let saved = owes.to_vec();
                owes[partner] = false;
                for x in 0..leaf {
                    if alive[x] && x != partner {
                        owes[x] = true;
                    }
                }
                let (sa, sb, ai, aj) = (ra[i], rb[j], alive[i], alive[cj]);
                ra[i] -= f;
                rb[j] -= f;
                alive[i] = ra[i] > eps;
                alive[cj] = rb[j] > eps;
                total += walk(eps, n, m, ra, rb, alive, owes);
                ra[i] = sa;
                rb[j] = sb;
                alive[i] = ai;
                alive[cj] = aj;
                owes.copy_from_slice(&saved);
            }
        }
        total
    }
    Ok(walk(
        residual_eps(supply),
        n,
        m,
        &mut supply.to_vec(),
        &mut demand.to_vec(),
        &mut vec![true; n + m],
        &mut vec![false; n + m],
    ))
}
