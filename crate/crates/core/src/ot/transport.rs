//! Network simplex for the balanced transportation problem.
//!
//! The basis is a spanning tree of the complete bipartite graph on
//! `n` supply nodes and `m` demand nodes, started from the north-west corner
//! rule. Pivoting follows Bland's rule on both the entering cell (first cell
//! in row-major order with negative reduced cost) and the leaving cell
//! (smallest row-major index among the blocking cells), so the pivot sequence
//! is a pure function of the input.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Relative tolerance on reduced costs.
const REDUCED_COST_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct TransportSolution {
    /// Basic cells `(i, j, flow)` in row-major order; degenerate cells carry zero flow.
    pub basis: Vec<(usize, usize, f64)>,
    /// Row potentials.
    pub u: Vec<f64>,
    /// Column potentials.
    pub v: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
}

impl TransportSolution {
    /// Basic cells with strictly positive flow.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.basis.iter().copied().filter(|&(_, _, f)| f > 0.0)
    }

    /// `sum_i a_i u_i + sum_j b_j v_j`.
    pub fn dual_objective(&self, supply: &[f64], demand: &[f64]) -> f64 {
        supply.iter().zip(&self.u).map(|(a, u)| a * u).sum::<f64>()
            + demand.iter().zip(&self.v).map(|(b, v)| b * v).sum::<f64>()
    }
}

pub(crate) fn validate(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<()> {
    let (n, m) = (supply.len(), demand.len());
    if n == 0 || m == 0 {
        return Err(Error::Empty);
    }
    if cost.len() != n * m {
        return Err(Error::LengthMismatch(cost.len(), n * m));
    }
    if cost
        .iter()
        .chain(supply)
        .chain(demand)
        .any(|x| !x.is_finite())
    {
        return Err(Error::NonFinite);
    }
    if let Some(&w) = supply.iter().chain(demand).find(|&&w| w < 0.0) {
        return Err(Error::NonPositiveWeight(w));
    }
    let (sa, sb): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(sb).max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "unbalanced transport problem: supply {sa} vs demand {sb}"
        )));
    }
    Ok(())
}

/// Minimizes `sum_ij cost[i*m + j] x_ij` subject to row sums `supply`
/// and column sums `demand`.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    validate(supply, demand, cost)?;
    let (n, m) = (supply.len(), demand.len());
    let mut tree = Tree::north_west_corner(supply, demand);
    let scale = cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let tol = REDUCED_COST_TOL * (1.0 + scale);
    let max_iter = 200 * (n + m) * (n + m) + 10_000;

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut iterations = 0;
    loop {
        tree.potentials(cost, &mut u, &mut v);
        let entering = (0..n * m).find(|&k| {
            let (i, j) = (k / m, k % m);
            cost[k] - u[i] - v[j] < -tol
        });
        let Some(k) = entering else { break };
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::Solver(format!(
                "network simplex exceeded {max_iter} pivots"
            )));
        }
        tree.pivot(k / m, k % m);
    }

    let mut basis: Vec<(usize, usize, f64)> = tree.cells.clone();
    basis.sort_by_key(|&(i, j, _)| (i, j));
    let cost_value = basis.iter().map(|&(i, j, f)| f * cost[i * m + j]).sum();
    Ok(TransportSolution {
        basis,
        u,
        v,
        cost: cost_value,
        iterations,
    })
}

/// Spanning-tree basis. Node ids: rows `0..n`, columns `n..n + m`.
pub(crate) struct Tree {
    n: usize,
    m: usize,
    pub(crate) cells: Vec<(usize, usize, f64)>,
}

impl Tree {
    /// Staircase basis; always `n + m - 1` cells, possibly with zero flows.
    pub(crate) fn north_west_corner(supply: &[f64], demand: &[f64]) -> Self {
        let (n, m) = (supply.len(), demand.len());
        let mut ra = supply.to_vec();
        let mut rb = demand.to_vec();
        let mut cells = Vec::with_capacity(n + m - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let f = ra[i].min(rb[j]);
            ra[i] -= f;
            rb[j] -= f;
            cells.push((i, j, f));
            if i == n - 1 && j == m - 1 {
                break;
            }
            if j == m - 1 || (i < n - 1 && ra[i] <= rb[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Tree { n, m, cells }
    }

    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n + self.m];
        for (e, &(i, j, _)) in self.cells.iter().enumerate() {
            adj[i].push((self.n + j, e));
            adj[self.n + j].push((i, e));
        }
        adj
    }

    /// Solves `u_i + v_j = c_ij` on the tree with `u_0 = 0`.
    pub(crate) fn potentials(&self, cost: &[f64], u: &mut [f64], v: &mut [f64]) {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n + self.m];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &(next, _) in &adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                if node < self.n {
                    let j = next - self.n;
                    v[j] = cost[node * self.m + j] - u[node];
                } else {
                    let j = node - self.n;
                    u[next] = cost[next * self.m + j] - v[j];
                }
                queue.push_back(next);
            }
        }
    }

    /// Edge indices on the tree path from `from` to `to`, in order.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.n + self.m];
        let mut seen = vec![false; self.n + self.m];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &(next, e) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, e));
                    queue.push_back(next);
                }
            }
        }
        let mut edges = Vec::new();
        let mut node = to;
        while let Some((prev, e)) = parent[node] {
            edges.push(e);
            node = prev;
        }
        edges.reverse();
        edges
    }

    /// Brings cell `(i, j)` into the basis.
    fn pivot(&mut self, i: usize, j: usize) {
        // The cycle is: entering (+), then the tree path from column j back
        // to row i, alternating (-, +, -, ...).
        let path = self.path(self.n + j, i);
        let minus: Vec<usize> = path.iter().copied().step_by(2).collect();
        let theta = minus
            .iter()
            .map(|&e| self.cells[e].2)
            .fold(f64::INFINITY, f64::min);
        let leaving = minus
            .iter()
            .copied()
            .filter(|&e| self.cells[e].2 <= theta)
            .min_by_key(|&e| (self.cells[e].0, self.cells[e].1))
            .expect("cycle has a blocking edge");
        for (k, &e) in path.iter().enumerate() {
            if k % 2 == 0 {
                self.cells[e].2 -= theta;
            } else {
                self.cells[e].2 += theta;
            }
        }
        self.cells[leaving] = (i, j, theta);
    }
}
