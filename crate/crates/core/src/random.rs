//! Seeded generators of random instances for property checks.

use rand_chacha::ChaCha8Rng;

use crate::lagrangian::LagrangianMap;
use crate::measure::{Coupling, DiscreteMeasure, Point};
use crate::nested::RandomLaw;

pub use rand::{Rng, SeedableRng};

/// Generator used throughout; seed with [`rng`].
pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A point with coordinates uniform in `[-scale, scale]`.
pub fn point(rng: &mut InstanceRng, d: usize, scale: f64) -> Point {
    Point::new((0..d).map(|_| rng.random_range(-scale..=scale)).collect())
}

/// Weights uniform in `[0.1, 1]`, normalized.
pub fn weights(rng: &mut InstanceRng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..=1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// A measure with `n` atoms (before merging) in `[-scale, scale]^d`.
pub fn measure(rng: &mut InstanceRng, n: usize, d: usize, scale: f64) -> DiscreteMeasure {
    let points = (0..n).map(|_| point(rng, d, scale)).collect();
    DiscreteMeasure::new(points, weights(rng, n)).expect("generated measure is valid")
}

/// A measure with uniform weights on `n` random atoms.
pub fn uniform_measure(rng: &mut InstanceRng, n: usize, d: usize, scale: f64) -> DiscreteMeasure {
    DiscreteMeasure::uniform((0..n).map(|_| point(rng, d, scale)).collect())
        .expect("generated measure is valid")
}

/// A 1-D measure with uniform weights on `n` distinct values.
pub fn distinct_uniform_1d(rng: &mut InstanceRng, n: usize, scale: f64) -> DiscreteMeasure {
    let mut xs: Vec<f64> = Vec::with_capacity(n);
    while xs.len() < n {
        let x = rng.random_range(-scale..=scale);
        if xs.iter().all(|y| (x - y).abs() > 1e-6 * scale) {
            xs.push(x);
        }
    }
    DiscreteMeasure::uniform(xs.into_iter().map(Point::scalar).collect())
        .expect("generated measure is valid")
}

pub fn lagrangian_map(rng: &mut InstanceRng, n: usize, d: usize, scale: f64) -> LagrangianMap {
    LagrangianMap::new((0..n).map(|_| point(rng, d, scale)).collect())
        .expect("generated map is valid")
}

/// A law with `k` atoms of `1..=n_max` points each.
pub fn law(rng: &mut InstanceRng, k: usize, n_max: usize, d: usize, scale: f64) -> RandomLaw {
    let atoms = (0..k)
        .map(|_| {
            let n = rng.random_range(1..=n_max);
            measure(rng, n, d, scale)
        })
        .collect();
    RandomLaw::new(atoms, weights(rng, k)).expect("generated law is valid")
}

/// A law of `k` atoms, each uniform on `n` distinct reals.
pub fn distinct_uniform_law(rng: &mut InstanceRng, k: usize, n: usize, scale: f64) -> RandomLaw {
    let atoms = (0..k).map(|_| distinct_uniform_1d(rng, n, scale)).collect();
    RandomLaw::new(atoms, weights(rng, k)).expect("generated law is valid")
}

/// A coupling with `n` random pairs in `R^d x R^d` (not optimal in general).
pub fn coupling(rng: &mut InstanceRng, n: usize, d: usize, scale: f64) -> Coupling {
    let pairs = (0..n)
        .map(|_| (point(rng, d, scale), point(rng, d, scale)))
        .collect();
    Coupling::new(pairs, weights(rng, n)).expect("generated coupling is valid")
}
