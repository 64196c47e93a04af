//! Laws of random measures and optimal transport between them.
//!
//! A [`RandomLaw`] is a weighted finite list of discrete measures. The outer
//! problem transports one list onto another with ground cost `w_2^2` (or the
//! maximal correlation for `[[M, N]]`); a [`RandomCouplingLaw`] is a weighted
//! list of inner plans realizing such an outer coupling.
//!
//! Laws are extensional: atoms are kept in the order given and are never
//! identified with each other, so indices into a law are stable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, Constraints};
use crate::measure::{
    check_dim, displacement_interpolate, measures_equal, normalized_weights, second_moment,
    Coupling, DiscreteMeasure, Point,
};
use crate::ot::monotone::{find_negative_cycle, MAX_CYCLE};
use crate::ot::{
    check_cyclical_monotonicity, deterministic_map, solve_mc, solve_transport, solve_w2,
    GroundCost, MonotonicityReport,
};

/// Tolerance on outer marginals.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Interpolated points closer than this (max-norm) cannot be told apart.
pub const COLLISION_TOL: f64 = 1e-10;

/// Largest product support accepted by the multi-marginal check.
pub const MAX_JOINT_ATOMS: usize = 5000;

/// Longest cycle accepted by the multi-marginal check.
pub const MAX_TOTAL_CYCLE: usize = 4;

/// Largest support of a k-projection.
pub const MAX_PROJECTION_ATOMS: usize = 1_000_000;

fn validate_weights(len: usize, weights: &[f64]) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::Empty);
    }
    if len != weights.len() {
        return Err(Error::LengthMismatch(len, weights.len()));
    }
    normalized_weights(weights)
}

/// A law of random measures `sum_k W_k delta_{mu_k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLaw", into = "RawLaw")]
pub struct RandomLaw {
    atoms: Vec<DiscreteMeasure>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawLaw {
    atoms: Vec<DiscreteMeasure>,
    weights: Vec<f64>,
}

impl TryFrom<RawLaw> for RandomLaw {
    type Error = Error;
    fn try_from(raw: RawLaw) -> Result<Self> {
        RandomLaw::new(raw.atoms, raw.weights)
    }
}

impl From<RandomLaw> for RawLaw {
    fn from(law: RandomLaw) -> Self {
        RawLaw {
            atoms: law.atoms,
            weights: law.weights,
        }
    }
}

impl RandomLaw {
    pub fn new(atoms: Vec<DiscreteMeasure>, weights: Vec<f64>) -> Result<Self> {
        let weights = validate_weights(atoms.len(), &weights)?;
        check_dim(atoms.iter().map(|a| a.dim()))?;
        Ok(RandomLaw { atoms, weights })
    }

    pub fn dirac(mu: DiscreteMeasure) -> Self {
        RandomLaw {
            atoms: vec![mu],
            weights: vec![1.0],
        }
    }

    /// Equal weights `1 / K`.
    pub fn uniform(atoms: Vec<DiscreteMeasure>) -> Result<Self> {
        let k = atoms.len();
        RandomLaw::new(atoms, vec![1.0 / k.max(1) as f64; k])
    }

    pub fn atoms(&self) -> &[DiscreteMeasure] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DiscreteMeasure, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// The mean measure `pr^1[M] = sum_k W_k mu_k`.
    pub fn mean_measure(&self) -> Result<DiscreteMeasure> {
        k_projection(self, 1)
    }
}

/// `M_2^2(M) = sum_k W_k m_2^2(mu_k)`.
pub fn big_moment(m: &RandomLaw) -> f64 {
    m.iter().map(|(mu, w)| w * second_moment(mu)).sum()
}

/// Laws equal up to reordering, with atoms compared by
/// [`measures_equal`] at `tol` and matching atoms' weights pooled.
pub fn laws_equal(a: &RandomLaw, b: &RandomLaw, tol: f64) -> bool {
    fn pooled(law: &RandomLaw, tol: f64) -> Vec<(&DiscreteMeasure, f64)> {
        let mut out: Vec<(&DiscreteMeasure, f64)> = Vec::new();
        for (mu, w) in law.iter() {
            match out.iter_mut().find(|(nu, _)| measures_equal(mu, nu, tol)) {
                Some(entry) => entry.1 += w,
                None => out.push((mu, w)),
            }
        }
        out
    }
    let (pa, pb) = (pooled(a, tol), pooled(b, tol));
    pa.len() == pb.len()
        && pa.iter().all(|(mu, w)| {
            pb.iter()
                .any(|(nu, v)| measures_equal(mu, nu, tol) && (w - v).abs() <= tol)
        })
}

/// A coupling between two laws, given on atom indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingOfLaws {
    pairs: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl CouplingOfLaws {
    /// Validates marginals against `m` and `n` within [`MARGINAL_TOL`].
    /// Pairs are sorted and repeated pairs merged.
    pub fn new(
        pairs: Vec<(usize, usize)>,
        weights: Vec<f64>,
        m: &RandomLaw,
        n: &RandomLaw,
    ) -> Result<Self> {
        let weights = validate_weights(pairs.len(), &weights)?;
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by_key(|&i| pairs[i]);
        let mut out_p: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(pairs.len());
        for i in order {
            if out_p.last() == Some(&pairs[i]) {
                *out_w.last_mut().unwrap() += weights[i];
            } else {
                out_p.push(pairs[i]);
                out_w.push(weights[i]);
            }
        }
        let pi = CouplingOfLaws {
            pairs: out_p,
            weights: out_w,
        };
        pi.check_marginals(m, n)?;
        Ok(pi)
    }

    fn check_marginals(&self, m: &RandomLaw, n: &RandomLaw) -> Result<()> {
        if let Some(&(k, l)) = self
            .pairs
            .iter()
            .find(|&&(k, l)| k >= m.len() || l >= n.len())
        {
            return Err(Error::Inconsistent(format!(
                "pair ({k}, {l}) out of range for {} x {} atoms",
                m.len(),
                n.len()
            )));
        }
        let (first, second) = self.marginals(m.len(), n.len());
        for (side, got, want) in [
            ("first", first, m.weights()),
            ("second", second, n.weights()),
        ] {
            for (i, (g, w)) in got.iter().zip(want).enumerate() {
                if (g - w).abs() > MARGINAL_TOL {
                    return Err(Error::Inconsistent(format!(
                        "{side} marginal at atom {i} is {g}, expected {w}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Marginal weight vectors on `0..k` and `0..l`.
    pub fn marginals(&self, k: usize, l: usize) -> (Vec<f64>, Vec<f64>) {
        let mut first = vec![0.0; k];
        let mut second = vec![0.0; l];
        for (&(a, b), &w) in self.pairs.iter().zip(&self.weights) {
            first[a] += w;
            second[b] += w;
        }
        (first, second)
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `sum_(k,l) Pi_kl C[k * cols + l]` for a row-major matrix.
    pub fn integrate(&self, matrix: &[f64], cols: usize) -> f64 {
        self.pairs
            .iter()
            .zip(&self.weights)
            .map(|(&(k, l), w)| w * matrix[k * cols + l])
            .sum()
    }

    /// Whether every first index is sent to a single second index.
    pub fn is_deterministic(&self) -> bool {
        self.pairs.windows(2).all(|w| w[0].0 != w[1].0)
    }
}

/// A law of random couplings `sum_j W_j delta_{gamma_j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCouplingLaw", into = "RawCouplingLaw")]
pub struct RandomCouplingLaw {
    atoms: Vec<Coupling>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCouplingLaw {
    atoms: Vec<Coupling>,
    weights: Vec<f64>,
}

impl TryFrom<RawCouplingLaw> for RandomCouplingLaw {
    type Error = Error;
    fn try_from(raw: RawCouplingLaw) -> Result<Self> {
        RandomCouplingLaw::new(raw.atoms, raw.weights)
    }
}

impl From<RandomCouplingLaw> for RawCouplingLaw {
    fn from(law: RandomCouplingLaw) -> Self {
        RawCouplingLaw {
            atoms: law.atoms,
            weights: law.weights,
        }
    }
}

impl RandomCouplingLaw {
    pub fn new(atoms: Vec<Coupling>, weights: Vec<f64>) -> Result<Self> {
        let weights = validate_weights(atoms.len(), &weights)?;
        check_dim(atoms.iter().map(|a| a.dim()))?;
        Ok(RandomCouplingLaw { atoms, weights })
    }

    pub fn atoms(&self) -> &[Coupling] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Coupling, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// `(pi^1_#, pi^2_#)_# P` as two extensional laws, atom `j` of each
    /// coming from atom `j` of `P`.
    pub fn marginal_laws(&self) -> (RandomLaw, RandomLaw) {
        let first = RandomLaw {
            atoms: self.atoms.iter().map(Coupling::first_marginal).collect(),
            weights: self.weights.clone(),
        };
        let second = RandomLaw {
            atoms: self.atoms.iter().map(Coupling::second_marginal).collect(),
            weights: self.weights.clone(),
        };
        (first, second)
    }
}

/// Per-atom values `f(x_{k,i}, mu_k)` on the unfolded support of a law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlocalField {
    pub values: Vec<Vec<Point>>,
}

impl NonlocalField {
    /// The field `f(x, mu) = x`.
    pub fn identity(m: &RandomLaw) -> Self {
        NonlocalField {
            values: m.atoms().iter().map(|mu| mu.points().to_vec()).collect(),
        }
    }

    /// A field with the same value at every point.
    pub fn constant(m: &RandomLaw, value: Point) -> Self {
        NonlocalField {
            values: m
                .atoms()
                .iter()
                .map(|mu| vec![value.clone(); mu.len()])
                .collect(),
        }
    }

    /// `f(., mu_k)_# mu_k`.
    pub fn push_atom(&self, m: &RandomLaw, k: usize) -> Result<DiscreteMeasure> {
        let mu = &m.atoms()[k];
        let values = self.values.get(k).ok_or(Error::MapUndefined(k))?;
        if values.len() != mu.len() {
            return Err(Error::LengthMismatch(values.len(), mu.len()));
        }
        DiscreteMeasure::new(values.clone(), mu.weights().to_vec())
    }

    /// `sum_k W_k delta_{f(., mu_k)_# mu_k}`.
    pub fn push_law(&self, m: &RandomLaw) -> Result<RandomLaw> {
        let atoms = (0..m.len())
            .map(|k| self.push_atom(m, k))
            .collect::<Result<Vec<_>>>()?;
        RandomLaw::new(atoms, m.weights().to_vec())
    }
}

/// The unfolded measure: `(x_{k,i}, k, W_k w_{k,i})` for every support point.
pub fn unfold(m: &RandomLaw) -> Vec<(Point, usize, f64)> {
    m.iter()
        .enumerate()
        .flat_map(|(k, (mu, w))| mu.iter().map(move |(x, v)| (x.clone(), k, w * v)))
        .collect()
}

/// `pr^k[M] = sum_j W_j mu_j^{(x) k}` as a measure on `R^{kd}`.
pub fn k_projection(m: &RandomLaw, k: usize) -> Result<DiscreteMeasure> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "k-projection order {k} outside 1..=3"
        )));
    }
    let total: usize = m
        .atoms()
        .iter()
        .map(|mu| mu.len().saturating_pow(k as u32))
        .sum();
    if total > MAX_PROJECTION_ATOMS || m.dim() * k > crate::measure::MAX_DIM {
        return Err(Error::TooLarge(format!(
            "k-projection with {total} atoms in dimension {}",
            m.dim() * k
        )));
    }
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    for (mu, w) in m.iter() {
        let mut partial: Vec<(Point, f64)> = mu.iter().map(|(x, v)| (x.clone(), w * v)).collect();
        for _ in 1..k {
            partial = partial
                .iter()
                .flat_map(|(p, pw)| mu.iter().map(move |(x, v)| (p.concat(x), pw * v)))
                .collect();
        }
        for (p, pw) in partial {
            points.push(p);
            weights.push(pw);
        }
    }
    DiscreteMeasure::new(points, weights)
}

/// Row-major `K x L` matrix of inner optimal values; entries are solved in
/// parallel and collected in index order.
pub fn pairwise_cost_matrix(m: &RandomLaw, n: &RandomLaw, kind: GroundCost) -> Result<Vec<f64>> {
    if m.dim() != n.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: n.dim(),
        });
    }
    let l = n.len();
    (0..m.len() * l)
        .into_par_iter()
        .map(|idx| {
            let (mu, nu) = (&m.atoms()[idx / l], &n.atoms()[idx % l]);
            Ok(match kind {
                GroundCost::W2sq => solve_w2(mu, nu)?.cost,
                GroundCost::Mc => solve_mc(mu, nu)?.cost,
            })
        })
        .collect()
}

/// Outer optimal transport between two laws.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NestedSolution {
    /// `W_2^2(M, N)` or `[[M, N]]`.
    pub value: f64,
    pub coupling: CouplingOfLaws,
    /// Row-major inner cost matrix used as outer ground cost.
    pub cost_matrix: Vec<f64>,
    /// Outer potentials; for the maximal correlation `u_k + v_l >= C_kl`.
    pub dual_u: Vec<f64>,
    pub dual_v: Vec<f64>,
}

fn outer_solve(m: &RandomLaw, n: &RandomLaw, kind: GroundCost) -> Result<NestedSolution> {
    let cost_matrix = pairwise_cost_matrix(m, n, kind)?;
    let sign = match kind {
        GroundCost::W2sq => 1.0,
        GroundCost::Mc => -1.0,
    };
    let signed: Vec<f64> = cost_matrix.iter().map(|c| sign * c).collect();
    let sol = solve_transport(m.weights(), n.weights(), &signed)?;
    let support: Vec<(usize, usize, f64)> = sol.support().collect();
    let coupling = CouplingOfLaws::new(
        support.iter().map(|&(k, l, _)| (k, l)).collect(),
        support.iter().map(|e| e.2).collect(),
        m,
        n,
    )?;
    Ok(NestedSolution {
        value: sign * sol.cost,
        coupling,
        cost_matrix,
        dual_u: sol.u.iter().map(|u| sign * u).collect(),
        dual_v: sol.v.iter().map(|v| sign * v).collect(),
    })
}

/// `W_2^2(M, N)`: outer transport with inner cost `w_2^2`.
pub fn nested_w2(m: &RandomLaw, n: &RandomLaw) -> Result<NestedSolution> {
    outer_solve(m, n, GroundCost::W2sq)
}

/// `[[M, N]]`: outer maximization of the inner maximal correlations.
pub fn nested_mc(m: &RandomLaw, n: &RandomLaw) -> Result<NestedSolution> {
    outer_solve(m, n, GroundCost::Mc)
}

/// Inserts an optimal inner plan for every pair of `pi`, with `pi`'s weight.
/// Atom `j` of the result corresponds to `pi.pairs()[j]`.
pub fn lift_to_random_coupling(
    m: &RandomLaw,
    n: &RandomLaw,
    pi: &CouplingOfLaws,
) -> Result<RandomCouplingLaw> {
    pi.check_marginals(m, n)?;
    let plans = pi
        .pairs()
        .par_iter()
        .map(|&(k, l)| Ok(solve_w2(&m.atoms()[k], &n.atoms()[l])?.plan))
        .collect::<Result<Vec<_>>>()?;
    RandomCouplingLaw::new(plans, pi.weights().to_vec())
}

/// `sum_j W_j int |x - y|^2 d gamma_j`.
pub fn random_coupling_cost(p: &RandomCouplingLaw) -> f64 {
    p.iter().map(|(g, w)| w * g.transport_cost()).sum()
}

fn find_atom(
    law: &RandomLaw,
    mu: &DiscreteMeasure,
    tol: f64,
    remaining: &[f64],
    need: f64,
) -> Option<usize> {
    let exact = |k: &usize| law.atoms()[*k] == *mu;
    let close = |k: &usize| measures_equal(&law.atoms()[*k], mu, tol);
    let fits = |k: &usize| remaining[*k] >= need - MARGINAL_TOL;
    let all = 0..law.len();
    all.clone()
        .find(|k| exact(k) && fits(k))
        .or_else(|| all.clone().find(|k| close(k) && fits(k)))
        .or_else(|| all.clone().find(exact))
        .or_else(|| all.clone().find(close))
}

/// Atom indices `(k_j, l_j)` of `m` and `n` matching the marginals of each
/// atom of `p`. Bit-equal atoms are preferred over tolerance matches, and
/// among repeated atoms the first with unused weight is taken.
pub fn match_atoms(
    p: &RandomCouplingLaw,
    m: &RandomLaw,
    n: &RandomLaw,
    tol: f64,
) -> Result<Vec<(usize, usize)>> {
    let mut rem_m = m.weights().to_vec();
    let mut rem_n = n.weights().to_vec();
    let mut out = Vec::with_capacity(p.len());
    for (j, (gamma, w)) in p.iter().enumerate() {
        let (mu, nu) = (gamma.first_marginal(), gamma.second_marginal());
        let k = find_atom(m, &mu, tol, &rem_m, w).ok_or_else(|| {
            Error::Inconsistent(format!("first marginal of atom {j} is not an atom of M"))
        })?;
        let l = find_atom(n, &nu, tol, &rem_n, w).ok_or_else(|| {
            Error::Inconsistent(format!("second marginal of atom {j} is not an atom of N"))
        })?;
        rem_m[k] -= w;
        rem_n[l] -= w;
        out.push((k, l));
    }
    Ok(out)
}

/// `Pi = (pi^1_#, pi^2_#)_# P` expressed on the atoms of `m` and `n`.
pub fn lower_onto(
    p: &RandomCouplingLaw,
    m: &RandomLaw,
    n: &RandomLaw,
    tol: f64,
) -> Result<CouplingOfLaws> {
    let pairs = match_atoms(p, m, n, tol)?;
    CouplingOfLaws::new(pairs, p.weights().to_vec(), m, n)
}

/// `Pi = (pi^1_#, pi^2_#)_# P` on its own marginal laws, whose bit-equal
/// atoms are pooled.
pub fn lower_random_coupling(
    p: &RandomCouplingLaw,
) -> Result<(RandomLaw, RandomLaw, CouplingOfLaws)> {
    fn pool(atoms: Vec<DiscreteMeasure>, weights: &[f64]) -> (RandomLaw, Vec<usize>) {
        let mut uniq: Vec<DiscreteMeasure> = Vec::new();
        let mut w: Vec<f64> = Vec::new();
        let mut index = Vec::with_capacity(atoms.len());
        for (mu, &wt) in atoms.into_iter().zip(weights) {
            match uniq.iter().position(|nu| *nu == mu) {
                Some(k) => {
                    w[k] += wt;
                    index.push(k);
                }
                None => {
                    index.push(uniq.len());
                    uniq.push(mu);
                    w.push(wt);
                }
            }
        }
        (
            RandomLaw {
                atoms: uniq,
                weights: w,
            },
            index,
        )
    }
    let (m, ki) = pool(
        p.atoms().iter().map(Coupling::first_marginal).collect(),
        p.weights(),
    );
    let (n, li) = pool(
        p.atoms().iter().map(Coupling::second_marginal).collect(),
        p.weights(),
    );
    let pairs = ki.into_iter().zip(li).collect();
    let pi = CouplingOfLaws::new(pairs, p.weights().to_vec(), &m, &n)?;
    Ok((m, n, pi))
}

/// Checks `sum_n C(mu_{k_n}, nu_{l_n}) <= sum_n C(mu_{k_n}, nu_{l_sigma(n)}) + tol`
/// for all cycles of at most `max_cycle` support pairs of `pi`, with
/// `C = w_2^2`.
pub fn check_w2_cyclical_monotonicity(
    m: &RandomLaw,
    n: &RandomLaw,
    pi: &CouplingOfLaws,
    max_cycle: usize,
    tol: f64,
) -> Result<MonotonicityReport> {
    if max_cycle > MAX_CYCLE {
        return Err(Error::TooLarge(format!(
            "cycle length {max_cycle} exceeds {MAX_CYCLE}"
        )));
    }
    let cost = pairwise_cost_matrix(m, n, GroundCost::W2sq)?;
    check_w2_cyclical_monotonicity_with(&cost, n.len(), pi, max_cycle, tol)
}

/// As [`check_w2_cyclical_monotonicity`] with a precomputed row-major cost matrix.
pub fn check_w2_cyclical_monotonicity_with(
    cost: &[f64],
    cols: usize,
    pi: &CouplingOfLaws,
    max_cycle: usize,
    tol: f64,
) -> Result<MonotonicityReport> {
    let pairs = pi.pairs();
    find_negative_cycle(pairs.len(), max_cycle, tol, |a, b| {
        let (ka, la) = pairs[a];
        let lb = pairs[b].1;
        cost[ka * cols + lb] - cost[ka * cols + la]
    })
}

/// A multi-marginal violation: plans `plans[t]` arranged on a cycle, with the
/// minimal value of `sum_t int <y_t, x_t - x_{t+1}> d theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalWitness {
    pub plans: Vec<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalMonotonicityReport {
    pub monotone: bool,
    pub programs_solved: usize,
    pub witness: Option<TotalWitness>,
}

/// Minimum over multi-couplings `theta` with marginals `plans` of
/// `sum_t int <y_t, x_t - x_{(t+1) mod N}> d theta`.
pub fn multi_marginal_cycle_value(plans: &[&Coupling]) -> Result<f64> {
    let sizes: Vec<usize> = plans.iter().map(|g| g.len()).collect();
    let total = sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .filter(|&t| t <= MAX_JOINT_ATOMS)
        .ok_or_else(|| Error::TooLarge(format!("product support of sizes {sizes:?}")))?;
    let k = plans.len();
    let mut objective = Vec::with_capacity(total);
    let mut index = vec![0usize; k];
    let mut cons = Constraints::new(total);
    let mut rows: Vec<Vec<Vec<(usize, f64)>>> =
        sizes.iter().map(|&s| vec![Vec::new(); s]).collect();
    for col in 0..total {
        let mut value = 0.0;
        for t in 0..k {
            let (x, y) = &plans[t].pairs()[index[t]];
            let next = &plans[(t + 1) % k].pairs()[index[(t + 1) % k]].0;
            value += y.dot(&x.sub(next));
            rows[t][index[t]].push((col, 1.0));
        }
        objective.push(value);
        for t in (0..k).rev() {
            index[t] += 1;
            if index[t] < sizes[t] {
                break;
            }
            index[t] = 0;
        }
    }
    for (t, plan_rows) in rows.iter().enumerate() {
        for (a, row) in plan_rows.iter().enumerate() {
            cons.push(row, plans[t].weights()[a]);
        }
    }
    Ok(lp::minimize(&objective, &cons)?.value)
}

/// Total cyclical monotonicity of a finite collection of plans: for every
/// multiset of at most `max_cycle` plans (repetition allowed) and every
/// cyclic arrangement, the multi-marginal minimum is at least `-tol`.
/// Permutations with several cycles split into independent smaller
/// problems, so cycles suffice.
pub fn check_total_cyclical_monotonicity(
    plans: &[Coupling],
    max_cycle: usize,
    tol: f64,
) -> Result<TotalMonotonicityReport> {
    if max_cycle > MAX_TOTAL_CYCLE {
        return Err(Error::TooLarge(format!(
            "cycle length {max_cycle} exceeds {MAX_TOTAL_CYCLE}"
        )));
    }
    let mut solved = 0;
    for size in 2..=max_cycle {
        for multiset in multisets(plans.len(), size) {
            for order in cyclic_orders(&multiset) {
                let chosen: Vec<&Coupling> = order.iter().map(|&i| &plans[i]).collect();
                let value = multi_marginal_cycle_value(&chosen)?;
                solved += 1;
                if value < -tol {
                    return Ok(TotalMonotonicityReport {
                        monotone: false,
                        programs_solved: solved,
                        witness: Some(TotalWitness {
                            plans: order,
                            value,
                        }),
                    });
                }
            }
        }
    }
    Ok(TotalMonotonicityReport {
        monotone: true,
        programs_solved: solved,
        witness: None,
    })
}

/// Nondecreasing index sequences of length `size` over `0..n`.
fn multisets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, size, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, size, 0, &mut Vec::new(), &mut out);
    out
}

/// Arrangements of `items` on a cycle, rooted at position 0, as item lists.
fn cyclic_orders(items: &[usize]) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], used: &mut [bool], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == items.len() {
            // Rotations describe the same cycle; keep the smallest one.
            let canonical = (0..cur.len())
                .map(|r| [&cur[r..], &cur[..r]].concat())
                .min()
                .unwrap();
            if !out.contains(&canonical) {
                out.push(canonical);
            }
            return;
        }
        for p in 1..items.len() {
            if !used[p] {
                used[p] = true;
                cur.push(items[p]);
                rec(items, used, cur, out);
                cur.pop();
                used[p] = false;
            }
        }
    }
    let mut out = Vec::new();
    let mut used = vec![false; items.len()];
    used[0] = true;
    rec(items, &mut used, &mut vec![items[0]], &mut out);
    out
}

/// Result of a successful Monge extraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MongeMap {
    /// `F(mu_k) = nu_{outer[k]}` on atom indices.
    pub outer: Vec<usize>,
    pub field: NonlocalField,
    /// `sum W_k w_{k,i} |f(x_{k,i}, mu_k) - x_{k,i}|^2`.
    pub cost: f64,
}

/// Recovers the measure-level map `F` and the nonlocal field `f` from a fully
/// deterministic random coupling `p` lowering to `pi`.
pub fn extract_monge(
    m: &RandomLaw,
    n: &RandomLaw,
    pi: &CouplingOfLaws,
    p: &RandomCouplingLaw,
) -> Result<MongeMap> {
    pi.check_marginals(m, n)?;
    let matched = match_atoms(p, m, n, MARGINAL_TOL)?;
    let lowered = CouplingOfLaws::new(matched.clone(), p.weights().to_vec(), m, n)?;
    let agree = lowered.len() == pi.len()
        && lowered
            .pairs()
            .iter()
            .zip(lowered.weights())
            .zip(pi.pairs().iter().zip(pi.weights()))
            .all(|((a, wa), (b, wb))| a == b && (wa - wb).abs() <= MARGINAL_TOL);
    if !agree {
        return Err(Error::Inconsistent("P does not lower to Pi".into()));
    }
    let mut outer = vec![usize::MAX; m.len()];
    for &(k, l) in pi.pairs() {
        if outer[k] != usize::MAX && outer[k] != l {
            return Err(Error::NonDeterministicOuter { atom: k });
        }
        outer[k] = l;
    }
    let mut values: Vec<Option<Vec<Point>>> = vec![None; m.len()];
    for (j, &(k, _)) in matched.iter().enumerate() {
        let map =
            deterministic_map(&p.atoms()[j]).ok_or(Error::NonDeterministicInner { atom: k })?;
        let mu = &m.atoms()[k];
        let image = mu
            .points()
            .iter()
            .map(|x| map.get(x).cloned())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| {
                Error::Inconsistent(format!("inner plan of atom {k} misses support points"))
            })?;
        match &values[k] {
            Some(prev) if prev.iter().zip(&image).any(|(a, b)| !a.bit_eq(b)) => {
                return Err(Error::NonDeterministicInner { atom: k });
            }
            _ => values[k] = Some(image),
        }
    }
    let field = NonlocalField {
        values: values
            .into_iter()
            .enumerate()
            .map(|(k, v)| v.ok_or(Error::MapUndefined(k)))
            .collect::<Result<_>>()?,
    };
    for (k, &l) in outer.iter().enumerate() {
        if !measures_equal(&field.push_atom(m, k)?, &n.atoms()[l], MARGINAL_TOL) {
            return Err(Error::Inconsistent(format!(
                "f(., mu_{k}) does not push mu_{k} onto nu_{l}"
            )));
        }
    }
    let cost = strict_monge_cost(&field, m)?;
    Ok(MongeMap { outer, field, cost })
}

/// `sum_k W_k sum_i w_{k,i} |f(x_{k,i}, mu_k) - x_{k,i}|^2`.
pub fn strict_monge_cost(f: &NonlocalField, m: &RandomLaw) -> Result<f64> {
    if f.values.len() != m.len() {
        return Err(Error::LengthMismatch(f.values.len(), m.len()));
    }
    let mut total = 0.0;
    for (k, (mu, w)) in m.iter().enumerate() {
        let vals = &f.values[k];
        if vals.len() != mu.len() {
            return Err(Error::MapUndefined(k));
        }
        for ((x, v), fx) in mu.iter().zip(vals) {
            if fx.dim() != x.dim() {
                return Err(Error::DimensionMismatch {
                    expected: x.dim(),
                    found: fx.dim(),
                });
            }
            total += w * v * fx.dist_sq(x);
        }
    }
    Ok(total)
}

/// `M_t`: atom `j` becomes the displacement interpolation of `gamma_j` at `t`.
pub fn interpolate_law(p: &RandomCouplingLaw, t: f64) -> Result<RandomLaw> {
    let atoms = p
        .atoms()
        .iter()
        .map(|g| displacement_interpolate(g, t))
        .collect::<Result<Vec<_>>>()?;
    RandomLaw::new(atoms, p.weights().to_vec())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicResidual {
    pub s: f64,
    pub t: f64,
    /// `W_2(M_s, M_t)` recomputed from scratch.
    pub distance: f64,
    /// `|W_2(M_s, M_t) - (t - s) W_2(M_0, M_1)| / (1 + W_2(M_0, M_1))`.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicReport {
    /// `W_2(M_0, M_1)`.
    pub length: f64,
    pub residuals: Vec<GeodesicResidual>,
    pub max_residual: f64,
    /// Whether every inner plan is cyclically monotone and the lowered outer
    /// coupling is `w_2^2`-cyclically monotone. When false the residuals are
    /// diagnostic only.
    pub optimal: bool,
}

/// Recomputes `W_2(M_s, M_t)` for all `s < t` in `ts` and compares with
/// `(t - s) W_2(M_0, M_1)`.
pub fn verify_geodesic(p: &RandomCouplingLaw, ts: &[f64]) -> Result<GeodesicReport> {
    let mut times: Vec<f64> = ts.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let ends = [interpolate_law(p, 0.0)?, interpolate_law(p, 1.0)?];
    let length = nested_w2(&ends[0], &ends[1])?.value.max(0.0).sqrt();
    let laws = times
        .par_iter()
        .map(|&t| interpolate_law(p, t))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, usize)> = (0..times.len())
        .flat_map(|a| (a + 1..times.len()).map(move |b| (a, b)))
        .collect();
    let residuals = pairs
        .par_iter()
        .map(|&(a, b)| {
            let distance = nested_w2(&laws[a], &laws[b])?.value.max(0.0).sqrt();
            let (s, t) = (times[a], times[b]);
            Ok(GeodesicResidual {
                s,
                t,
                distance,
                residual: (distance - (t - s) * length).abs() / (1.0 + length),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(GeodesicReport {
        length,
        residuals,
        max_residual,
        optimal: is_optimal_random_coupling(p)?,
    })
}

/// Monotonicity-based optimality test of a random coupling law.
pub fn is_optimal_random_coupling(p: &RandomCouplingLaw) -> Result<bool> {
    const TOL: f64 = 1e-9;
    for g in p.atoms() {
        let scale = 1.0
            + g.iter()
                .map(|(x, y, _)| x.norm_sq() + y.norm_sq())
                .fold(0.0, f64::max);
        let cycle = g.len().min(5);
        if !check_cyclical_monotonicity(g.pairs(), cycle, TOL * scale)?.monotone {
            return Ok(false);
        }
    }
    let (m, n, pi) = lower_random_coupling(p)?;
    let cost = pairwise_cost_matrix(&m, &n, GroundCost::W2sq)?;
    let scale = 1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let cycle = pi.len().min(5);
    Ok(check_w2_cyclical_monotonicity_with(&cost, n.len(), &pi, cycle, TOL * scale)?.monotone)
}

/// Endpoint maps of one interpolated atom: interpolated point `z_i` came
/// from the pair `(starts[i], ends[i])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationInverse {
    pub points: Vec<Point>,
    pub starts: Vec<Point>,
    pub ends: Vec<Point>,
}

impl InterpolationInverse {
    /// `(f_{t,0}(z), f_{t,1}(z))` for a bit-equal interpolated point.
    pub fn apply(&self, z: &Point) -> Option<(&Point, &Point)> {
        self.points
            .iter()
            .position(|p| p.bit_eq(z))
            .map(|i| (&self.starts[i], &self.ends[i]))
    }

    /// `(f_{t,0}, f_{t,1})_# mu_t`.
    pub fn reconstruct(&self, interpolated: &DiscreteMeasure) -> Result<Coupling> {
        let pairs = interpolated
            .points()
            .iter()
            .enumerate()
            .map(|(i, z)| {
                self.apply(z)
                    .map(|(a, b)| (a.clone(), b.clone()))
                    .ok_or(Error::MapUndefined(i))
            })
            .collect::<Result<Vec<_>>>()?;
        Coupling::new(pairs, interpolated.weights().to_vec())
    }
}

/// For each atom `gamma_j`, the maps sending `(1 - t) x + t y` back to `x`
/// and `y`. Interpolants closer than [`COLLISION_TOL`] are reported.
pub fn invert_interpolation(p: &RandomCouplingLaw, t: f64) -> Result<Vec<InterpolationInverse>> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "inversion time {t} outside (0, 1)"
        )));
    }
    p.atoms()
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let points: Vec<Point> = g.pairs().iter().map(|(x, y)| x.lerp(y, t)).collect();
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.sort_by(|&a, &b| points[a].lex_cmp(&points[b]));
            // Close points need not be adjacent in lexicographic order, so
            // compare every pair; atoms are small.
            for a in 0..points.len() {
                for b in a + 1..points.len() {
                    if points[a].max_abs_diff(&points[b]) <= COLLISION_TOL {
                        return Err(Error::CollisionAtInterpolant {
                            atom: j,
                            first: a,
                            second: b,
                        });
                    }
                }
            }
            Ok(InterpolationInverse {
                points: order.iter().map(|&i| points[i].clone()).collect(),
                starts: order.iter().map(|&i| g.pairs()[i].0.clone()).collect(),
                ends: order.iter().map(|&i| g.pairs()[i].1.clone()).collect(),
            })
        })
        .collect()
}

/// Outer potentials of the maximal-correlation problem with diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OuterDuals {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `[[M, N]]`.
    pub value: f64,
    pub coupling: CouplingOfLaws,
    /// `max_(k,l) (C_kl - u_k - v_l)^+`.
    pub max_violation: f64,
    /// `max |u_k + v_l - C_kl|` over the optimal support.
    pub max_slack_on_support: f64,
    /// `|sum W_k u_k + sum V_l v_l - [[M, N]]|`.
    pub gap: f64,
}

pub fn outer_dual_potentials(m: &RandomLaw, n: &RandomLaw) -> Result<OuterDuals> {
    let sol = nested_mc(m, n)?;
    let l = n.len();
    let c = &sol.cost_matrix;
    let mut max_violation: f64 = 0.0;
    for k in 0..m.len() {
        for j in 0..l {
            max_violation = max_violation.max(c[k * l + j] - sol.dual_u[k] - sol.dual_v[j]);
        }
    }
    let max_slack_on_support = sol
        .coupling
        .pairs()
        .iter()
        .map(|&(k, j)| (sol.dual_u[k] + sol.dual_v[j] - c[k * l + j]).abs())
        .fold(0.0, f64::max);
    let dual: f64 = m
        .weights()
        .iter()
        .zip(&sol.dual_u)
        .map(|(w, u)| w * u)
        .sum::<f64>()
        + n.weights()
            .iter()
            .zip(&sol.dual_v)
            .map(|(w, v)| w * v)
            .sum::<f64>();
    Ok(OuterDuals {
        gap: (dual - sol.value).abs(),
        u: sol.dual_u,
        v: sol.dual_v,
        value: sol.value,
        coupling: sol.coupling,
        max_violation,
        max_slack_on_support,
    })
}
