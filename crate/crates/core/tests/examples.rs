//! Worked examples through the public API, one small scenario per test.

use approx::assert_abs_diff_eq;
use wow_core::convex::{
    check_fenchel, moreau_yosida_on_grid, subgradient_certificate, Functional, GridTable, Potential,
};
use wow_core::lagrangian::{
    law, pairing_by_permutation, w2_by_permutation, LagrangianMap, PermutationMethod,
};
use wow_core::lggrm::{
    atomless_diagnostic, variance_function, walsh_criterion, Basis, GaussianSpec, Label, Verdict,
};
use wow_core::measure::{
    displacement_interpolate, measures_equal, second_moment, Coupling, DiscreteMeasure, Point,
};
use wow_core::nested::{
    check_total_cyclical_monotonicity, check_w2_cyclical_monotonicity, extract_monge,
    interpolate_law, lift_to_random_coupling, lower_random_coupling, nested_mc, nested_w2,
    outer_dual_potentials, random_coupling_cost, strict_monge_cost, unfold, verify_geodesic,
    CouplingOfLaws, RandomLaw,
};
use wow_core::ot::{barycentric_projection, check_cyclical_monotonicity, solve_mc, solve_w2};

fn line(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::new(
        points.iter().map(|&x| Point::scalar(x)).collect(),
        weights.to_vec(),
    )
    .unwrap()
}

fn dirac(x: f64) -> DiscreteMeasure {
    line(&[x], &[1.0])
}

fn pair(x: f64, y: f64) -> (Point, Point) {
    (Point::scalar(x), Point::scalar(y))
}

/// `M = (d_{d_0} + d_{d_4}) / 2` and `N = (d_{d_1} + d_{d_3}) / 2` on the line.
fn two_by_two() -> (RandomLaw, RandomLaw) {
    let m = RandomLaw::uniform(vec![dirac(0.0), dirac(4.0)]).unwrap();
    let n = RandomLaw::uniform(vec![dirac(1.0), dirac(3.0)]).unwrap();
    (m, n)
}

#[test]
fn measure_moments_and_interpolation() {
    assert_eq!(
        second_moment(&DiscreteMeasure::dirac(Point::new(vec![3.0, 4.0])).unwrap()),
        25.0
    );
    assert_eq!(second_moment(&line(&[0.0, 2.0], &[0.5, 0.5])), 2.0);
    let gamma = Coupling::new(vec![pair(0.0, 2.0), pair(1.0, 5.0)], vec![0.5, 0.5]).unwrap();
    let mid = displacement_interpolate(&gamma, 0.5).unwrap();
    assert!(measures_equal(&mid, &line(&[1.0, 3.0], &[0.5, 0.5]), 0.0));
    let merged = line(&[0.0, 0.0], &[0.5, 0.5]);
    assert!(measures_equal(&merged, &dirac(0.0), 1e-12));
}

#[test]
fn two_atom_transport() {
    let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
    let nu = line(&[2.0, 5.0], &[0.5, 0.5]);
    let sol = solve_w2(&mu, &nu).unwrap();
    assert_abs_diff_eq!(sol.cost, 10.0, epsilon = 1e-12);
    assert_abs_diff_eq!(sol.dual_objective(&mu, &nu), 10.0, epsilon = 1e-9);
    assert_abs_diff_eq!(solve_mc(&mu, &mu).unwrap().cost, 0.5, epsilon = 1e-12);
    let product = Coupling::product(&mu, &nu).unwrap();
    assert_abs_diff_eq!(product.transport_cost(), 11.5, epsilon = 1e-12);
}

#[test]
fn barycentric_projection_of_split_plan() {
    let gamma = Coupling::new(
        vec![pair(0.0, 1.0), pair(1.0, 0.0), pair(1.0, 4.0)],
        vec![0.5, 0.25, 0.25],
    )
    .unwrap();
    let bary = barycentric_projection(&gamma);
    let expected = Coupling::new(vec![pair(0.0, 1.0), pair(1.0, 2.0)], vec![0.5, 0.5]).unwrap();
    assert_eq!(bary, expected);
    assert_abs_diff_eq!(second_moment(&bary.second_marginal()), 2.5, epsilon = 1e-12);
    assert_abs_diff_eq!(
        second_moment(&gamma.second_marginal()),
        4.5,
        epsilon = 1e-12
    );
}

#[test]
fn swapped_pairs_are_not_monotone() {
    let report = check_cyclical_monotonicity(&[pair(0.0, 3.0), pair(4.0, 1.0)], 5, 1e-9).unwrap();
    assert!(!report.monotone);
    assert_abs_diff_eq!(report.witness.unwrap().value, -8.0, epsilon = 1e-12);
}

#[test]
fn nested_two_by_two() {
    let (m, n) = two_by_two();
    let w2 = nested_w2(&m, &n).unwrap();
    assert_eq!(w2.cost_matrix, vec![1.0, 9.0, 9.0, 1.0]);
    assert_abs_diff_eq!(w2.value, 1.0, epsilon = 1e-12);
    assert_eq!(w2.coupling.pairs(), &[(0, 0), (1, 1)]);
    let mc = nested_mc(&m, &n).unwrap();
    assert_eq!(mc.cost_matrix, vec![0.0, 0.0, 4.0, 12.0]);
    assert_abs_diff_eq!(mc.value, 6.0, epsilon = 1e-12);
    let duals = outer_dual_potentials(&m, &n).unwrap();
    assert!(duals.gap < 1e-9);
}

#[test]
fn lifted_coupling_round_trip_and_geodesic() {
    let (m, n) = two_by_two();
    let sol = nested_w2(&m, &n).unwrap();
    let p = lift_to_random_coupling(&m, &n, &sol.coupling).unwrap();
    assert_abs_diff_eq!(random_coupling_cost(&p), 1.0, epsilon = 1e-12);
    let (m2, n2, pi) = lower_random_coupling(&p).unwrap();
    assert_eq!((m2, n2, pi), (m.clone(), n.clone(), sol.coupling.clone()));
    let mid = interpolate_law(&p, 0.5).unwrap();
    let expected = RandomLaw::uniform(vec![dirac(0.5), dirac(3.5)]).unwrap();
    assert_eq!(mid, expected);
    let report = verify_geodesic(&p, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    assert!(report.max_residual < 1e-8);
}

#[test]
fn swapped_outer_matching_is_detected() {
    let (m, n) = two_by_two();
    let swapped = CouplingOfLaws::new(vec![(0, 1), (1, 0)], vec![0.5, 0.5], &m, &n).unwrap();
    assert!(
        !check_w2_cyclical_monotonicity(&m, &n, &swapped, 5, 1e-9)
            .unwrap()
            .monotone
    );
    let p = lift_to_random_coupling(&m, &n, &swapped).unwrap();
    assert!(verify_geodesic(&p, &[0.0, 0.5, 1.0]).unwrap().max_residual > 1e-3);
}

#[test]
fn monge_extraction_on_dirac_atoms() {
    let (m, n) = two_by_two();
    let sol = nested_w2(&m, &n).unwrap();
    let p = lift_to_random_coupling(&m, &n, &sol.coupling).unwrap();
    let map = extract_monge(&m, &n, &sol.coupling, &p).unwrap();
    assert_eq!(map.outer, vec![0, 1]);
    assert_eq!(
        map.field.values,
        vec![vec![Point::scalar(1.0)], vec![Point::scalar(3.0)]]
    );
    assert_abs_diff_eq!(
        strict_monge_cost(&map.field, &m).unwrap(),
        1.0,
        epsilon = 1e-12
    );
}

#[test]
fn unfolding_multiplies_weights() {
    let m = RandomLaw::uniform(vec![line(&[0.0, 1.0], &[0.5, 0.5]), dirac(3.0)]).unwrap();
    let unfolded = unfold(&m);
    let expected = vec![
        (Point::scalar(0.0), 0, 0.25),
        (Point::scalar(1.0), 0, 0.25),
        (Point::scalar(3.0), 1, 0.5),
    ];
    assert_eq!(unfolded, expected);
}

#[test]
fn antimonotone_field_fails_total_monotonicity() {
    let anti = Coupling::new(vec![pair(0.0, 0.0), pair(1.0, -1.0)], vec![0.5, 0.5]).unwrap();
    let report = check_total_cyclical_monotonicity(&[anti.clone(), anti], 2, 1e-9).unwrap();
    assert!(!report.monotone);
    let id = Coupling::identity(&line(&[0.0, 1.0], &[0.5, 0.5]));
    assert!(
        check_total_cyclical_monotonicity(&[id.clone(), id], 2, 1e-9)
            .unwrap()
            .monotone
    );
}

#[test]
fn quadratic_energy_certificates() {
    let mu = line(&[0.0, 1.0], &[0.5, 0.5]);
    let phi = Functional::Potential {
        f: Potential::Quadratic,
    };
    let grid = vec![mu.clone(), dirac(2.0)];
    let identity = Coupling::identity(&mu);
    let report = check_fenchel(&phi, &grid, &identity, 1e-12).unwrap();
    assert!(report.holds);
    assert_abs_diff_eq!(report.correlation, 0.5, epsilon = 1e-12);
    let table = GridTable::tabulate(&phi, &grid).unwrap();
    assert!(
        subgradient_certificate(&table, &identity, 1e-12)
            .unwrap()
            .certified
    );
    let anti = Coupling::new(vec![pair(0.0, 1.0), pair(1.0, 0.0)], vec![0.5, 0.5]).unwrap();
    assert!(
        !subgradient_certificate(&table, &anti, 1e-12)
            .unwrap()
            .certified
    );
}

#[test]
fn moreau_yosida_two_point_grid() {
    let table = GridTable::new(vec![dirac(0.0), dirac(2.0)], vec![0.0, -3.0]).unwrap();
    let phi = Functional::GridTable {
        table: table.clone(),
    };
    let my = moreau_yosida_on_grid(&phi, table.grid(), 1.0, &dirac(0.0)).unwrap();
    assert_abs_diff_eq!(my.value, -1.0, epsilon = 1e-12);
    assert_eq!(my.index, 1);
}

#[test]
fn permutation_problems_on_two_labels() {
    let x1 = LagrangianMap::from_scalars(&[0.0, 1.0]).unwrap();
    let x2 = LagrangianMap::from_scalars(&[2.0, 5.0]).unwrap();
    let best = pairing_by_permutation(&x1, &x2, PermutationMethod::Brute).unwrap();
    assert_abs_diff_eq!(best.value, 2.5, epsilon = 1e-12);
    assert_eq!(best.permutation, vec![0, 1]);
    assert_abs_diff_eq!(
        w2_by_permutation(&x1, &x2, PermutationMethod::Assignment)
            .unwrap()
            .value,
        10.0,
        epsilon = 1e-12
    );
    let x = LagrangianMap::from_scalars(&[1.0, 1.0, 2.0]).unwrap();
    assert!(measures_equal(
        &law(&x),
        &line(&[1.0, 2.0], &[2.0 / 3.0, 1.0 / 3.0]),
        1e-12
    ));
}

#[test]
fn walsh_variance_and_criteria() {
    let spec = GaussianSpec {
        basis: Basis::Walsh {
            levels: 2,
            scales: vec![1.0, 1.0, 1.0],
        },
        dim: 1,
        truncation: 0,
        label_grid: 4,
        seed: 0,
    };
    let v =
        variance_function(&spec, &Label::Signs(vec![1, 1]), &Label::Signs(vec![-1, 1])).unwrap();
    assert_abs_diff_eq!(v.lambda_sq, 8.0, epsilon = 1e-12);
    let flat = walsh_criterion(&(1..=12).map(|n| 2f64.powi(-n)).collect::<Vec<_>>(), 1).unwrap();
    assert_eq!(flat.verdict, Verdict::Diverges);
    let constant = walsh_criterion(&[1.0; 12], 1).unwrap();
    assert_eq!(constant.verdict, Verdict::Converges);
}

#[test]
fn atomless_diagnostic_on_diracs() {
    let m = RandomLaw::uniform(vec![dirac(0.0), dirac(5.0)]).unwrap();
    for (_, mass) in atomless_diagnostic(&m, &[1.0, 0.1]).unwrap() {
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
    }
}
