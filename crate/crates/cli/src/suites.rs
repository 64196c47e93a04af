//! Randomized property suites behind `wow verify`.
//!
//! Case `i` of a suite draws its instance from sub-seed `i` of the master
//! seed; cases run in parallel and are tallied in index order, so reports do
//! not depend on the thread count.

use rayon::prelude::*;
use serde::Serialize;
use wow_core::convex::{
    c_transform_relation, check_total_convexity, dilation_conjugacy_check, evaluate,
    grid_biconjugate, lipschitz_check_knu, Functional, GridTable,
};
use wow_core::lagrangian::{law, pairing_by_permutation, w2_by_permutation, PermutationMethod};
use wow_core::lggrm::{
    sample_path, sub_seed, variance_function, walsh_function, Basis, GaussianSpec, Label,
};
use wow_core::lp::transport_lp;
use wow_core::measure::{couplings_equal, second_moment, Coupling};
use wow_core::nested::{
    big_moment, check_total_cyclical_monotonicity, check_w2_cyclical_monotonicity_with,
    extract_monge, interpolate_law, invert_interpolation, laws_equal, lift_to_random_coupling,
    nested_mc, nested_w2, outer_dual_potentials, verify_geodesic, CouplingOfLaws, RandomLaw,
};
use wow_core::ot::{
    check_cyclical_monotonicity, solve_mc, solve_w2, solve_w2_1d, solve_w2_enumerate,
};
use wow_core::random::{self, InstanceRng, Rng};
use wow_core::Result;

use crate::error::CliError;

/// Suite names with their default tolerances.
pub const SUITES: &[(&str, f64)] = &[
    ("decomposition", 1e-8),
    ("nested", 1e-8),
    ("oracle", 1e-9),
    ("permutation", 1e-8),
    ("monotonicity", 1e-9),
    ("total-monotonicity", 1e-9),
    ("duality", 1e-7),
    ("monge", 1e-8),
    ("geodesic", 1e-7),
    ("convex", 1e-9),
    ("knu", 1e-8),
    ("lggrm", 0.0),
];

#[derive(Clone, Debug, Serialize)]
pub struct InvariantCount {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    /// Cases where the invariant did not apply.
    pub skipped: usize,
    /// Index of the first failing case.
    pub first_failure: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub command: &'static str,
    pub suite: String,
    pub seed: u64,
    pub cases: usize,
    /// Tolerance used by each suite.
    pub tol: Vec<(String, f64)>,
    pub invariants: Vec<InvariantCount>,
    pub failures: usize,
    pub passed: bool,
}

/// Outcome of one invariant on one case: `None` when it does not apply.
type Outcomes = Vec<(&'static str, Option<bool>)>;

fn case_fn(name: &str) -> Option<fn(&mut InstanceRng, f64) -> Result<Outcomes>> {
    Some(match name {
        "decomposition" => decomposition,
        "nested" => nested,
        "oracle" => oracle,
        "permutation" => permutation,
        "monotonicity" => monotonicity,
        "total-monotonicity" => total_monotonicity,
        "duality" => duality,
        "monge" => monge,
        "geodesic" => geodesic,
        "convex" => convex,
        "knu" => knu,
        "lggrm" => lggrm,
        _ => return None,
    })
}

/// Runs `suite` (or every suite for `all`) on `cases` random cases.
pub fn run(
    suite: &str,
    seed: u64,
    cases: usize,
    tol: Option<f64>,
) -> std::result::Result<SuiteReport, CliError> {
    let selected: Vec<(&str, f64)> = if suite == "all" {
        SUITES.to_vec()
    } else {
        let entry = SUITES.iter().find(|(n, _)| *n == suite).ok_or_else(|| {
            CliError::input(format!(
                "unknown suite {suite:?}; known: all, {}",
                suite_names()
            ))
        })?;
        vec![*entry]
    };
    let mut invariants = Vec::new();
    let mut tols = Vec::new();
    for (name, default_tol) in selected {
        let tol = tol.unwrap_or(default_tol);
        tols.push((name.to_string(), tol));
        let f = case_fn(name).expect("listed suite");
        let outcomes: Vec<Outcomes> = (0..cases)
            .into_par_iter()
            .map(|i| {
                let mut rng = random::rng(sub_seed(seed, i as u64));
                f(&mut rng, tol).unwrap_or_else(|_| vec![("case_completes", Some(false))])
            })
            .collect();
        let prefix = if suite == "all" {
            format!("{name}/")
        } else {
            String::new()
        };
        let start = invariants.len();
        for (i, case) in outcomes.iter().enumerate() {
            for &(inv, outcome) in case {
                let full = format!("{prefix}{inv}");
                let pos = match invariants[start..]
                    .iter()
                    .position(|c: &InvariantCount| c.name == full)
                {
                    Some(p) => start + p,
                    None => {
                        invariants.push(InvariantCount {
                            name: full,
                            passed: 0,
                            failed: 0,
                            skipped: 0,
                            first_failure: None,
                        });
                        invariants.len() - 1
                    }
                };
                let c = &mut invariants[pos];
                match outcome {
                    Some(true) => c.passed += 1,
                    Some(false) => {
                        c.failed += 1;
                        c.first_failure.get_or_insert(i);
                    }
                    None => c.skipped += 1,
                }
            }
        }
    }
    let failures = invariants.iter().map(|c| c.failed).sum();
    Ok(SuiteReport {
        command: "verify",
        suite: suite.to_string(),
        seed,
        cases,
        tol: tols,
        invariants,
        failures,
        passed: failures == 0,
    })
}

pub fn suite_names() -> String {
    SUITES
        .iter()
        .map(|(n, _)| *n)
        .collect::<Vec<_>>()
        .join(", ")
}

fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + scale)
}

fn decomposition(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let d = rng.random_range(1..=3);
    let (n, m) = (rng.random_range(1..=12), rng.random_range(1..=12));
    let mu = random::measure(rng, n, d, 2.0);
    let nu = random::measure(rng, m, d, 2.0);
    let w2 = solve_w2(&mu, &nu)?;
    let mc = solve_mc(&mu, &nu)?;
    let (a, b) = (second_moment(&mu), second_moment(&nu));
    Ok(vec![
        (
            "decomposition_identity",
            Some(close(w2.cost, a + b - 2.0 * mc.cost, tol, a + b)),
        ),
        (
            "w2_dual_objective",
            Some(close(w2.dual_objective(&mu, &nu), w2.cost, tol, a + b)),
        ),
        (
            "mc_dual_objective",
            Some(close(mc.dual_objective(&mu, &nu), mc.cost, tol, a + b)),
        ),
    ])
}

fn random_law_pair(
    rng: &mut InstanceRng,
    k_max: usize,
    n_max: usize,
    d_max: usize,
) -> (RandomLaw, RandomLaw) {
    let d = rng.random_range(1..=d_max);
    let (k, l) = (rng.random_range(1..=k_max), rng.random_range(1..=k_max));
    (
        random::law(rng, k, n_max, d, 2.0),
        random::law(rng, l, n_max, d, 2.0),
    )
}

fn nested(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let (m, n) = random_law_pair(rng, 6, 8, 3);
    let w2 = nested_w2(&m, &n)?;
    let mc = nested_mc(&m, &n)?;
    let (a, b) = (big_moment(&m), big_moment(&n));
    let attained = w2.coupling.integrate(&mc.cost_matrix, n.len());
    Ok(vec![
        (
            "nested_decomposition",
            Some(close(w2.value, a + b - 2.0 * mc.value, tol, a + b)),
        ),
        (
            "w2_matching_attains_pairing",
            Some(close(attained, mc.value, tol, a + b)),
        ),
    ])
}

fn oracle(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let d = rng.random_range(1..=3);
    let (n, m) = (rng.random_range(1..=7), rng.random_range(1..=7));
    let mu = random::measure(rng, n, d, 2.0);
    let nu = random::measure(rng, m, d, 2.0);
    let simplex = solve_w2(&mu, &nu)?.cost;
    let (exhaustive, _) = solve_w2_enumerate(&mu, &nu)?;
    let rel = |a: f64, b: f64| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b;
    let fast = if d == 1 {
        let f = solve_w2_1d(&mu, &nu)?.cost;
        Some(rel(f, simplex) && rel(f, exhaustive))
    } else {
        None
    };
    Ok(vec![
        ("simplex_equals_enumeration", Some(rel(simplex, exhaustive))),
        ("monotone_fast_path", fast),
    ])
}

fn permutation(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let d = rng.random_range(1..=3);
    let n = rng.random_range(1..=7);
    let x1 = random::lagrangian_map(rng, n, d, 2.0);
    let x2 = random::lagrangian_map(rng, n, d, 2.0);
    let scale = x1.norm_sq() + x2.norm_sq();
    let uniform = vec![1.0 / n as f64; n];
    let inner: Vec<f64> = x1
        .values()
        .iter()
        .flat_map(|a| x2.values().iter().map(|b| -a.dot(b)).collect::<Vec<_>>())
        .collect();
    let sq: Vec<f64> = x1
        .values()
        .iter()
        .flat_map(|a| x2.values().iter().map(|b| a.dist_sq(b)).collect::<Vec<_>>())
        .collect();
    let lp_max = -transport_lp(&uniform, &uniform, &inner)?.value;
    let lp_min = transport_lp(&uniform, &uniform, &sq)?.value;
    let brute_max = pairing_by_permutation(&x1, &x2, PermutationMethod::Brute)?.value;
    let hung_max = pairing_by_permutation(&x1, &x2, PermutationMethod::Assignment)?.value;
    let brute_min = w2_by_permutation(&x1, &x2, PermutationMethod::Brute)?.value;
    let hung_min = w2_by_permutation(&x1, &x2, PermutationMethod::Assignment)?.value;
    let mc = solve_mc(&law(&x1), &law(&x2))?.cost;
    let w2 = solve_w2(&law(&x1), &law(&x2))?.cost;
    let all = |v: &[f64]| v.iter().all(|x| close(*x, v[0], tol, scale));
    Ok(vec![
        (
            "pairing_brute_hungarian_lp",
            Some(all(&[brute_max, hung_max, lp_max, mc])),
        ),
        (
            "w2_brute_hungarian_lp",
            Some(all(&[brute_min, hung_min, lp_min, w2])),
        ),
        (
            "cauchy_schwarz",
            Some(brute_max <= (x1.norm_sq() * x2.norm_sq()).sqrt() + tol * (1.0 + scale)),
        ),
    ])
}

/// Moves mass between two support pairs so that the plan contains a
/// strictly cost-increasing 2-cycle; `None` when no such pair exists.
fn swap_inner(plan: &Coupling) -> Result<Option<Coupling>> {
    let pairs = plan.pairs();
    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            let gain = pairs[a]
                .0
                .sub(&pairs[b].0)
                .dot(&pairs[a].1.sub(&pairs[b].1));
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, a, b));
            }
        }
    }
    let Some((_, a, b)) = best.filter(|(g, _, _)| *g > 1e-6) else {
        return Ok(None);
    };
    let w = plan.weights();
    let eps = 0.5 * w[a].min(w[b]);
    let mut new_pairs = pairs.to_vec();
    let mut new_w = w.to_vec();
    new_w[a] -= eps;
    new_w[b] -= eps;
    new_pairs.push((pairs[a].0.clone(), pairs[b].1.clone()));
    new_pairs.push((pairs[b].0.clone(), pairs[a].1.clone()));
    new_w.extend([eps, eps]);
    Ok(Some(Coupling::new(new_pairs, new_w)?))
}

fn swap_outer(
    pi: &CouplingOfLaws,
    cost: &[f64],
    cols: usize,
    m: &RandomLaw,
    n: &RandomLaw,
) -> Result<Option<CouplingOfLaws>> {
    let pairs = pi.pairs();
    let scale = 1.0 + cost.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            let ((k1, l1), (k2, l2)) = (pairs[a], pairs[b]);
            let gain = cost[k1 * cols + l2] + cost[k2 * cols + l1]
                - cost[k1 * cols + l1]
                - cost[k2 * cols + l2];
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, a, b));
            }
        }
    }
    let Some((_, a, b)) = best.filter(|(g, _, _)| *g > 1e-6 * scale) else {
        return Ok(None);
    };
    let w = pi.weights();
    let eps = 0.5 * w[a].min(w[b]);
    let ((k1, l1), (k2, l2)) = (pairs[a], pairs[b]);
    let mut new_pairs = pairs.to_vec();
    let mut new_w = w.to_vec();
    new_w[a] -= eps;
    new_w[b] -= eps;
    new_pairs.extend([(k1, l2), (k2, l1)]);
    new_w.extend([eps, eps]);
    Ok(Some(CouplingOfLaws::new(new_pairs, new_w, m, n)?))
}

fn monotonicity(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let d = rng.random_range(1..=3);
    let (n, m) = (rng.random_range(2..=6), rng.random_range(2..=6));
    let mu = random::measure(rng, n, d, 2.0);
    let nu = random::measure(rng, m, d, 2.0);
    let plan = solve_w2(&mu, &nu)?.plan;
    let inner_ok = check_cyclical_monotonicity(plan.pairs(), 5, tol)?.monotone;
    let inner_swap = match swap_inner(&plan)? {
        Some(bad) => {
            let r = check_cyclical_monotonicity(bad.pairs(), 5, tol)?;
            Some(!r.monotone && r.witness.is_some())
        }
        None => None,
    };
    let (ml, nl) = random_law_pair(rng, 5, 4, 2);
    let sol = nested_w2(&ml, &nl)?;
    let outer_ok =
        check_w2_cyclical_monotonicity_with(&sol.cost_matrix, nl.len(), &sol.coupling, 5, tol)?
            .monotone;
    let outer_swap = match swap_outer(&sol.coupling, &sol.cost_matrix, nl.len(), &ml, &nl)? {
        Some(bad) => {
            let r = check_w2_cyclical_monotonicity_with(&sol.cost_matrix, nl.len(), &bad, 5, tol)?;
            Some(!r.monotone && r.witness.is_some())
        }
        None => None,
    };
    Ok(vec![
        ("optimal_plan_monotone", Some(inner_ok)),
        ("swapped_plan_detected", inner_swap),
        ("optimal_matching_monotone", Some(outer_ok)),
        ("swapped_matching_detected", outer_swap),
    ])
}

fn total_monotonicity(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let d = rng.random_range(1..=2);
    let count = rng.random_range(1..=3);
    let measures: Vec<_> = (0..count)
        .map(|_| {
            let n = rng.random_range(2..=4);
            random::measure(rng, n, d, 2.0)
        })
        .collect();
    let identity: Vec<Coupling> = measures.iter().map(Coupling::identity).collect();
    let anti = identity
        .iter()
        .map(|g| g.map_pairs(|x, _| (x.clone(), x.scaled(-1.0))))
        .collect::<Result<Vec<_>>>()?;
    let pass = check_total_cyclical_monotonicity(&identity, 3, tol)?.monotone;
    let fail = !check_total_cyclical_monotonicity(&anti, 3, tol)?.monotone;
    Ok(vec![
        ("identity_field_monotone", Some(pass)),
        ("antimonotone_field_detected", Some(fail)),
    ])
}

fn duality(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let (m, n) = random_law_pair(rng, 6, 6, 3);
    let r = outer_dual_potentials(&m, &n)?;
    let scale = 1.0 + r.value.abs();
    Ok(vec![
        ("dual_feasible", Some(r.max_violation <= tol * scale)),
        (
            "tight_on_support",
            Some(r.max_slack_on_support <= tol * scale),
        ),
        ("no_duality_gap", Some(r.gap <= 1e-9 * scale)),
    ])
}

fn monge(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let k = rng.random_range(1..=4);
    let n = rng.random_range(1..=5);
    let atoms = |rng: &mut InstanceRng| {
        (0..k)
            .map(|_| random::distinct_uniform_1d(rng, n, 2.0))
            .collect()
    };
    let m = RandomLaw::uniform(atoms(rng))?;
    let nn = RandomLaw::uniform(atoms(rng))?;
    let w2 = nested_w2(&m, &nn)?;
    let p = lift_to_random_coupling(&m, &nn, &w2.coupling)?;
    let Ok(map) = extract_monge(&m, &nn, &w2.coupling, &p) else {
        return Ok(vec![("extraction_succeeds", Some(false))]);
    };
    let pushed = map.field.push_law(&m)?;
    Ok(vec![
        ("extraction_succeeds", Some(true)),
        ("field_pushes_m_to_n", Some(laws_equal(&pushed, &nn, 1e-9))),
        (
            "strict_monge_cost_equals_w2",
            Some((map.cost - w2.value).abs() <= tol * w2.value.abs().max(1.0)),
        ),
    ])
}

fn geodesic(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let (m, n) = random_law_pair(rng, 3, 4, 2);
    let sol = nested_w2(&m, &n)?;
    let p = lift_to_random_coupling(&m, &n, &sol.coupling)?;
    let report = verify_geodesic(&p, &[0.0, 0.25, 0.5, 0.75, 1.0])?;
    let mid = interpolate_law(&p, 0.5)?;
    let inverses = invert_interpolation(&p, 0.5)?;
    let mut round_trip = true;
    for (j, inv) in inverses.iter().enumerate() {
        let rebuilt = inv.reconstruct(&mid.atoms()[j])?;
        round_trip &= couplings_equal(&rebuilt, &p.atoms()[j], 1e-12);
    }
    Ok(vec![
        ("geodesic_identity", Some(report.max_residual <= tol)),
        ("midpoint_inversion", Some(round_trip)),
    ])
}

fn convex(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let d = rng.random_range(1..=2);
    let g = rng.random_range(2..=6);
    let grid: Vec<_> = (0..g)
        .map(|_| {
            let n = rng.random_range(1..=4);
            random::measure(rng, n, d, 2.0)
        })
        .collect();
    let values: Vec<f64> = (0..g).map(|_| rng.random_range(-2.0..=2.0)).collect();
    let table = GridTable::new(grid.clone(), values)?;
    let n = rng.random_range(1..=4);
    let nu = random::measure(rng, n, d, 2.0);
    let a = rng.random_range(0.25..=4.0);
    let dilation = dilation_conjugacy_check(&table, a, &nu, tol)?.holds;
    let relation = c_transform_relation(&table, &nu, tol)?.holds;
    let phi = Functional::GridTable { table };
    let mut below = true;
    for mu in &grid {
        let bi = grid_biconjugate(&phi, &grid, mu)?.value;
        let v = evaluate(&phi, mu)?;
        below &= bi <= v + tol * (1.0 + v.abs());
    }
    Ok(vec![
        ("dilation_conjugacy", Some(dilation)),
        ("c_transform_relation", Some(relation)),
        ("biconjugate_below", Some(below)),
    ])
}

fn knu(rng: &mut InstanceRng, tol: f64) -> Result<Outcomes> {
    let d = rng.random_range(1..=3);
    let draw = |rng: &mut InstanceRng| {
        let n = rng.random_range(1..=6);
        random::measure(rng, n, d, 2.0)
    };
    let (nu, mu1, mu2) = (draw(rng), draw(rng), draw(rng));
    let lipschitz = lipschitz_check_knu(&nu, &mu1, &mu2, tol)?.holds;
    let n = rng.random_range(1..=6);
    let gamma = random::coupling(rng, n, d, 2.0);
    let ts: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..=1.0)).collect();
    let convexity = check_total_convexity(&Functional::MaxPairing { nu }, &gamma, &ts, tol)?.holds;
    Ok(vec![
        ("lipschitz_bound", Some(lipschitz)),
        ("total_convexity", Some(convexity)),
    ])
}

fn lggrm(rng: &mut InstanceRng, _tol: f64) -> Result<Outcomes> {
    let m = rng.random_range(0..=4usize);
    let signs = |k: usize| -> Vec<i8> {
        (0..m)
            .map(|i| if k >> i & 1 == 1 { -1 } else { 1 })
            .collect()
    };
    let set = |mask: usize| -> Vec<usize> {
        (0..m)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| i + 1)
            .collect()
    };
    let mut orthonormal = true;
    for a in 0..1usize << m {
        for b in 0..1usize << m {
            let mut sum = 0i64;
            for k in 0..1usize << m {
                let q = signs(k);
                sum += (walsh_function(&set(a), &q)? * walsh_function(&set(b), &q)?) as i64;
            }
            orthonormal &= sum == if a == b { 1 << m } else { 0 };
        }
    }
    let spec = GaussianSpec {
        basis: Basis::BridgeSine { lambdas: None },
        dim: rng.random_range(1..=2),
        truncation: 16,
        label_grid: 32,
        seed: 0,
    };
    let seed = rng.random();
    let deterministic = sample_path(&spec, seed)? == sample_path(&spec, seed)?;
    let (s, t) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
    let v1 = variance_function(&spec, &Label::Time(s), &Label::Time(t))?;
    let v2 = variance_function(&spec, &Label::Time(t), &Label::Time(s))?;
    let diag = variance_function(&spec, &Label::Time(s), &Label::Time(s))?;
    Ok(vec![
        ("walsh_orthonormal", Some(orthonormal)),
        ("seed_determinism", Some(deterministic)),
        ("variance_symmetric", Some(v1 == v2 && diag.alpha_sq == 0.0)),
    ])
}
