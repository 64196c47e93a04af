//! Exact optimal transport between two discrete measures.
//!
//! [`solve_w2`] computes the squared Wasserstein distance, [`solve_mc`] the
//! maximal correlation `<mu, nu> = max int <x, y> d gamma`. Both run the same
//! network simplex (the latter on the cost `-<x, y>`), so for fixed inputs the
//! returned plans are reproducible.

pub mod enumerate;
pub mod monotone;
pub mod transport;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{Coupling, DiscreteMeasure, Point};

pub use monotone::{check_cyclical_monotonicity, CycleWitness, MonotonicityReport};
pub use transport::{solve_transport, TransportSolution};

/// Optimal plan together with Kantorovich potentials.
///
/// For [`solve_w2`] the potentials satisfy `u_i + v_j <= |x_i - y_j|^2`; for
/// [`solve_mc`] they satisfy `u_i + v_j >= <x_i, y_j>`. In both cases they are
/// tight on the plan and `sum a_i u_i + sum b_j v_j = cost`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OtSolution {
    pub cost: f64,
    pub plan: Coupling,
    pub dual_u: Vec<f64>,
    pub dual_v: Vec<f64>,
    /// Plan as `(atom of mu, atom of nu, mass)` triples.
    pub entries: Vec<(usize, usize, f64)>,
}

impl OtSolution {
    pub fn dual_objective(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        mu.weights()
            .iter()
            .zip(&self.dual_u)
            .map(|(a, u)| a * u)
            .sum::<f64>()
            + nu.weights()
                .iter()
                .zip(&self.dual_v)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }
}

/// Ground cost between atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundCost {
    /// `|x - y|^2`
    W2sq,
    /// `<x, y>`, maximized.
    Mc,
}

pub(crate) fn same_dim(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    Ok(())
}

/// Row-major `|x_i - y_j|^2` matrix.
pub fn squared_distance_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<f64> {
    mu.points()
        .iter()
        .flat_map(|x| nu.points().iter().map(move |y| x.dist_sq(y)))
        .collect()
}

/// Row-major `<x_i, y_j>` matrix.
pub fn inner_product_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<f64> {
    mu.points()
        .iter()
        .flat_map(|x| nu.points().iter().map(move |y| x.dot(y)))
        .collect()
}

fn plan_from_entries(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    entries: &[(usize, usize, f64)],
) -> Result<Coupling> {
    let pairs = entries
        .iter()
        .map(|&(i, j, _)| (mu.points()[i].clone(), nu.points()[j].clone()))
        .collect();
    Coupling::new(pairs, entries.iter().map(|e| e.2).collect())
}

fn solution(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    sol: TransportSolution,
    sign: f64,
) -> Result<OtSolution> {
    let entries: Vec<_> = sol.support().collect();
    Ok(OtSolution {
        cost: sign * sol.cost,
        plan: plan_from_entries(mu, nu, &entries)?,
        dual_u: sol.u.iter().map(|u| sign * u).collect(),
        dual_v: sol.v.iter().map(|v| sign * v).collect(),
        entries,
    })
}

/// `w_2^2(mu, nu)` with an optimal plan and potentials.
pub fn solve_w2(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<OtSolution> {
    same_dim(mu, nu)?;
    let cost = squared_distance_matrix(mu, nu);
    let sol = solve_transport(mu.weights(), nu.weights(), &cost)?;
    solution(mu, nu, sol, 1.0)
}

/// Maximal correlation `<mu, nu>`, solved as a minimization of `-<x, y>`.
pub fn solve_mc(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<OtSolution> {
    same_dim(mu, nu)?;
    let cost: Vec<f64> = inner_product_matrix(mu, nu)
        .into_iter()
        .map(|c| -c)
        .collect();
    let sol = solve_transport(mu.weights(), nu.weights(), &cost)?;
    solution(mu, nu, sol, -1.0)
}

/// Solves with the requested ground cost; the returned `cost` is the optimal value.
pub fn solve(mu: &DiscreteMeasure, nu: &DiscreteMeasure, kind: GroundCost) -> Result<OtSolution> {
    match kind {
        GroundCost::W2sq => solve_w2(mu, nu),
        GroundCost::Mc => solve_mc(mu, nu),
    }
}

/// Monotone (quantile) coupling on the line.
///
/// The north-west corner rule on sorted supports is the monotone
/// rearrangement; its tree basis also yields the potentials.
pub fn solve_w2_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<OtSolution> {
    for m in [mu, nu] {
        if m.dim() != 1 {
            return Err(Error::InvalidParameter(format!(
                "one-dimensional solver called with d = {}",
                m.dim()
            )));
        }
    }
    let cost = squared_distance_matrix(mu, nu);
    transport::validate(mu.weights(), nu.weights(), &cost)?;
    let tree = transport::Tree::north_west_corner(mu.weights(), nu.weights());
    let mut u = vec![0.0; mu.len()];
    let mut v = vec![0.0; nu.len()];
    tree.potentials(&cost, &mut u, &mut v);
    let mut basis = tree.cells.clone();
    basis.sort_by_key(|&(i, j, _)| (i, j));
    let total = basis
        .iter()
        .map(|&(i, j, f)| f * cost[i * nu.len() + j])
        .sum();
    let sol = TransportSolution {
        basis,
        u,
        v,
        cost: total,
        iterations: 0,
    };
    solution(mu, nu, sol, 1.0)
}

/// Exhaustive-vertex oracle for `w_2^2`; limited to small supports.
pub fn solve_w2_enumerate(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, Coupling)> {
    same_dim(mu, nu)?;
    let cost = squared_distance_matrix(mu, nu);
    let (value, flows) = enumerate::enumerate_vertices_min(mu.weights(), nu.weights(), &cost)?;
    Ok((value, plan_from_entries(mu, nu, &flows)?))
}

/// Kantorovich potentials `(u, v)` of the `w_2^2` problem.
pub fn kantorovich_duals(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let sol = solve_w2(mu, nu)?;
    Ok((sol.dual_u, sol.dual_v))
}

/// A map between finitely many points, looked up by bit equality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMap {
    entries: Vec<(Point, Point)>,
}

impl PointMap {
    pub fn get(&self, x: &Point) -> Option<&Point> {
        self.entries
            .binary_search_by(|(p, _)| p.lex_cmp(x))
            .ok()
            .map(|i| &self.entries[i].1)
    }

    pub fn entries(&self) -> &[(Point, Point)] {
        &self.entries
    }
}

/// The map `x -> f(x)` if every first-marginal atom of `gamma` is paired with
/// exactly one second point.
pub fn deterministic_map(gamma: &Coupling) -> Option<PointMap> {
    let mut entries: Vec<(Point, Point)> = Vec::with_capacity(gamma.len());
    // pairs are sorted by first coordinate, so a split source shows up as a repeat
    for (x, y) in gamma.pairs() {
        if let Some((px, _)) = entries.last() {
            if px.bit_eq(x) {
                return None;
            }
        }
        entries.push((x.clone(), y.clone()));
    }
    Some(PointMap { entries })
}

pub fn is_deterministic(gamma: &Coupling) -> bool {
    deterministic_map(gamma).is_some()
}

/// `(i x b(., gamma))_# mu`, where `b(x, gamma)` is the conditional mean of
/// the second coordinate given the first.
pub fn barycentric_projection(gamma: &Coupling) -> Coupling {
    let mut pairs: Vec<(Point, Point)> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut acc: Option<(Point, Point, f64)> = None;
    for (x, y, w) in gamma.iter() {
        match &mut acc {
            Some((px, sum, mass)) if px.bit_eq(x) => {
                *sum = sum.add(&y.scaled(w));
                *mass += w;
            }
            _ => {
                if let Some((px, sum, mass)) = acc.take() {
                    pairs.push((px, sum.scaled(1.0 / mass)));
                    weights.push(mass);
                }
                acc = Some((x.clone(), y.scaled(w), w));
            }
        }
    }
    if let Some((px, sum, mass)) = acc {
        pairs.push((px, sum.scaled(1.0 / mass)));
        weights.push(mass);
    }
    Coupling::new(pairs, weights).expect("barycentric projection of a valid coupling")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::second_moment;
    use approx::assert_relative_eq;

    fn m1(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(
            points.iter().map(|&x| Point::scalar(x)).collect(),
            weights.to_vec(),
        )
        .unwrap()
    }

    fn pairs1(pairs: &[(f64, f64)], weights: &[f64]) -> Coupling {
        Coupling::new(
            pairs
                .iter()
                .map(|&(x, y)| (Point::scalar(x), Point::scalar(y)))
                .collect(),
            weights.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn w2_examples() {
        let a = DiscreteMeasure::dirac(Point::new(vec![0.0, 0.0])).unwrap();
        let b = DiscreteMeasure::dirac(Point::new(vec![3.0, 4.0])).unwrap();
        assert_eq!(solve_w2(&a, &b).unwrap().cost, 25.0);
        let mu = m1(&[0.0, 1.0, 2.5], &[0.2, 0.3, 0.5]);
        assert_eq!(solve_w2(&mu, &mu).unwrap().cost, 0.0);

        let mu = m1(&[0.0, 1.0], &[0.5, 0.5]);
        let nu = m1(&[2.0, 5.0], &[0.5, 0.5]);
        let s = solve_w2(&mu, &nu).unwrap();
        assert_relative_eq!(s.cost, 10.0);
        assert_eq!(s.plan, pairs1(&[(0.0, 2.0), (1.0, 5.0)], &[0.5, 0.5]));
    }

    #[test]
    fn w2_rejects_dimension_mismatch() {
        let a = DiscreteMeasure::dirac(Point::new(vec![0.0, 0.0])).unwrap();
        let b = m1(&[1.0], &[1.0]);
        assert!(matches!(
            solve_w2(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            solve_mc(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mc_examples() {
        let mu = DiscreteMeasure::new(
            vec![Point::new(vec![1.0, 0.0]), Point::new(vec![0.0, 1.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        let nu = DiscreteMeasure::dirac(Point::new(vec![2.0, 2.0])).unwrap();
        assert_relative_eq!(solve_mc(&mu, &nu).unwrap().cost, 2.0);
        assert_relative_eq!(solve_mc(&mu, &mu).unwrap().cost, second_moment(&mu));
        let b = m1(&[0.0, 1.0], &[0.5, 0.5]);
        let s = solve_mc(&b, &b).unwrap();
        assert_relative_eq!(s.cost, 0.5);
        for (i, &a) in s.dual_u.iter().enumerate() {
            for (j, &v) in s.dual_v.iter().enumerate() {
                assert!(a + v >= b.points()[i].dot(&b.points()[j]) - 1e-12);
            }
        }
        assert_relative_eq!(s.dual_objective(&b, &b), s.cost, epsilon = 1e-12);
    }

    #[test]
    fn one_dimensional_fast_path() {
        let mu = m1(&[0.0, 1.0], &[0.5, 0.5]);
        let nu = m1(&[2.0, 5.0], &[0.5, 0.5]);
        assert_relative_eq!(solve_w2_1d(&mu, &nu).unwrap().cost, 10.0);
        assert_relative_eq!(
            solve_w2_1d(&m1(&[-1.5], &[1.0]), &m1(&[2.0], &[1.0]))
                .unwrap()
                .cost,
            12.25
        );
        let u = m1(&[0.0, 1.0, 2.0], &[1.0 / 3.0; 3]);
        assert_eq!(solve_w2_1d(&u, &u).unwrap().cost, 0.0);
        let d2 = DiscreteMeasure::dirac(Point::new(vec![0.0, 0.0])).unwrap();
        assert!(solve_w2_1d(&d2, &d2).is_err());
    }

    #[test]
    fn one_dimensional_duals_are_feasible() {
        let mu = m1(&[-1.0, 0.3, 0.4, 2.0], &[0.1, 0.2, 0.3, 0.4]);
        let nu = m1(&[-2.0, 0.0, 3.0], &[0.5, 0.25, 0.25]);
        let s = solve_w2_1d(&mu, &nu).unwrap();
        for (i, x) in mu.points().iter().enumerate() {
            for (j, y) in nu.points().iter().enumerate() {
                assert!(s.dual_u[i] + s.dual_v[j] <= x.dist_sq(y) + 1e-12);
            }
        }
        assert_relative_eq!(s.dual_objective(&mu, &nu), s.cost, epsilon = 1e-12);
        assert_relative_eq!(s.cost, solve_w2(&mu, &nu).unwrap().cost, epsilon = 1e-12);
    }

    #[test]
    fn duals_examples() {
        let z = m1(&[0.0], &[1.0]);
        let (u, v) = kantorovich_duals(&z, &z).unwrap();
        assert_eq!(u[0] + v[0], 0.0);
        let (u, v) = kantorovich_duals(&z, &m1(&[1.0], &[1.0])).unwrap();
        assert_eq!(u[0] + v[0], 1.0);
        let mu = m1(&[0.0, 1.0], &[0.5, 0.5]);
        let nu = m1(&[2.0, 5.0], &[0.5, 0.5]);
        let s = solve_w2(&mu, &nu).unwrap();
        assert!((s.dual_objective(&mu, &nu) - s.cost).abs() < 1e-9);
    }

    #[test]
    fn determinism_examples() {
        let mu = m1(&[0.0, 1.0, 2.0], &[0.2, 0.3, 0.5]);
        let g =
            Coupling::from_map(&mu, |p| Some(Point::scalar(p.coords()[0] * 3.0 - 1.0))).unwrap();
        let f = deterministic_map(&g).unwrap();
        assert_eq!(f.get(&Point::scalar(1.0)), Some(&Point::scalar(2.0)));
        let b = m1(&[0.0, 1.0], &[0.5, 0.5]);
        assert!(!is_deterministic(&Coupling::product(&b, &b).unwrap()));
        assert!(is_deterministic(&pairs1(&[(0.0, 0.0)], &[1.0])));
    }

    #[test]
    fn barycentric_examples() {
        let g = Coupling::product(&m1(&[0.0], &[1.0]), &m1(&[-1.0, 1.0], &[0.5, 0.5])).unwrap();
        assert_eq!(barycentric_projection(&g), pairs1(&[(0.0, 0.0)], &[1.0]));

        let det = pairs1(&[(0.0, 3.0), (1.0, -2.0)], &[0.25, 0.75]);
        assert_eq!(barycentric_projection(&det), det);

        let g = pairs1(&[(0.0, 1.0), (1.0, 0.0), (1.0, 4.0)], &[0.5, 0.25, 0.25]);
        let b = barycentric_projection(&g);
        assert_eq!(b, pairs1(&[(0.0, 1.0), (1.0, 2.0)], &[0.5, 0.5]));
        let bary_moment: f64 = b.iter().map(|(_, y, w)| w * y.norm_sq()).sum();
        let full_moment: f64 = g.iter().map(|(_, y, w)| w * y.norm_sq()).sum();
        assert_relative_eq!(bary_moment, 2.5);
        assert_relative_eq!(full_moment, 4.5);
        assert!(bary_moment <= full_moment);
    }

    #[test]
    fn enumeration_oracle_matches_small_example() {
        let mu = m1(&[0.0, 1.0], &[0.5, 0.5]);
        let nu = m1(&[2.0, 5.0], &[0.5, 0.5]);
        let (v, plan) = solve_w2_enumerate(&mu, &nu).unwrap();
        assert_relative_eq!(v, 10.0);
        assert_eq!(plan, solve_w2(&mu, &nu).unwrap().plan);
    }
}
