//! Finitely supported probability measures and couplings in `R^d`.
//!
//! Both types are canonical after construction: the support is sorted
//! lexicographically and bit-identical atoms are merged by summing their
//! weights. Canonical form makes equality, serialization and solver pivoting
//! deterministic.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 16;

/// Maximal deviation of a weight vector from unit mass accepted at construction.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn scalar(x: f64) -> Self {
        Point(vec![x])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn scaled(&self, a: f64) -> Point {
        Point(self.0.iter().map(|c| a * c).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - t) * a + t * b)
                .collect(),
        )
    }

    /// Concatenation, used for tensor products of measures.
    pub fn concat(&self, other: &Point) -> Point {
        let mut c = self.0.clone();
        c.extend_from_slice(&other.0);
        Point(c)
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }

    pub fn bit_eq(&self, other: &Point) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

pub(crate) fn check_dim(points: impl Iterator<Item = usize>) -> Result<usize> {
    let mut dim = None;
    for d in points {
        match dim {
            None => {
                if d == 0 || d > MAX_DIM {
                    return Err(Error::UnsupportedDimension(d));
                }
                dim = Some(d);
            }
            Some(expected) if expected != d => {
                return Err(Error::DimensionMismatch { expected, found: d })
            }
            _ => {}
        }
    }
    dim.ok_or(Error::Empty)
}

pub(crate) fn normalized_weights(weights: &[f64]) -> Result<Vec<f64>> {
    for &w in weights {
        if !w.is_finite() {
            return Err(Error::NonFinite);
        }
        if w <= 0.0 {
            return Err(Error::NonPositiveWeight(w));
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightSum(total));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// A probability measure `sum_i w_i delta_{x_i}` with finitely many atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        DiscreteMeasure::new(raw.points, raw.weights)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure {
            points: m.points,
            weights: m.weights,
        }
    }
}

impl DiscreteMeasure {
    /// Validates, normalizes and canonicalizes. Weights must sum to one
    /// within [`WEIGHT_SUM_TOL`].
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch(points.len(), weights.len()));
        }
        check_dim(points.iter().map(Point::dim))?;
        if !points.iter().all(Point::is_finite) {
            return Err(Error::NonFinite);
        }
        let weights = normalized_weights(&weights)?;
        Ok(Self::canonical(points, weights))
    }

    pub fn dirac(p: Point) -> Result<Self> {
        Self::new(vec![p], vec![1.0])
    }

    /// Uniform measure on the given points; repeated points accumulate mass.
    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        Self::new(points, vec![1.0 / n as f64; n])
    }

    /// Sorts lexicographically and merges bit-equal atoms. Inputs are already validated.
    fn canonical(points: Vec<Point>, weights: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a].lex_cmp(&points[b]));
        let mut out_p: Vec<Point> = Vec::with_capacity(points.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(points.len());
        for i in order {
            match out_p.last() {
                Some(last) if last.bit_eq(&points[i]) => {
                    *out_w.last_mut().unwrap() += weights[i];
                }
                _ => {
                    out_p.push(points[i].clone());
                    out_w.push(weights[i]);
                }
            }
        }
        DiscreteMeasure {
            points: out_p,
            weights: out_w,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Index of a support point, by bit equality.
    pub fn position(&self, p: &Point) -> Option<usize> {
        self.points
            .binary_search_by(|q| q.lex_cmp(p))
            .ok()
            .filter(|&i| self.points[i].bit_eq(p))
    }

    pub fn mean(&self) -> Point {
        let mut m = Point::zeros(self.dim());
        for (p, w) in self.iter() {
            m = m.add(&p.scaled(w));
        }
        m
    }

    /// Merges atoms lying within `tol` (Euclidean) of the first atom of their
    /// run in lexicographic order. `tol = 0` is the identity.
    pub fn merged_within(&self, tol: f64) -> Self {
        if tol <= 0.0 {
            return self.clone();
        }
        let tol_sq = tol * tol;
        let mut out_p: Vec<Point> = Vec::with_capacity(self.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(self.len());
        for (p, w) in self.iter() {
            match out_p.last() {
                Some(last) if last.dist_sq(p) <= tol_sq => {
                    *out_w.last_mut().unwrap() += w;
                }
                _ => {
                    out_p.push(p.clone());
                    out_w.push(w);
                }
            }
        }
        DiscreteMeasure {
            points: out_p,
            weights: out_w,
        }
    }
}

/// `m_2^2(mu) = sum_i w_i |x_i|^2`.
pub fn second_moment(mu: &DiscreteMeasure) -> f64 {
    mu.iter().map(|(p, w)| w * p.norm_sq()).sum()
}

/// `m_2(mu)`, the square root of [`second_moment`].
pub fn m2(mu: &DiscreteMeasure) -> f64 {
    second_moment(mu).sqrt()
}

/// Image of `mu` under `x -> a x`.
pub fn dilate(mu: &DiscreteMeasure, a: f64) -> Result<DiscreteMeasure> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "dilation factor must be positive, got {a}"
        )));
    }
    let points = mu.points.iter().map(|p| p.scaled(a)).collect();
    DiscreteMeasure::new(points, mu.weights.clone())
}

/// Image measure `f_# mu`. Atoms with bit-equal images are merged.
pub fn pushforward<F>(mu: &DiscreteMeasure, map: F) -> Result<DiscreteMeasure>
where
    F: Fn(&Point) -> Option<Point>,
{
    let mut points = Vec::with_capacity(mu.len());
    for (i, p) in mu.points.iter().enumerate() {
        points.push(map(p).ok_or(Error::MapUndefined(i))?);
    }
    DiscreteMeasure::new(points, mu.weights.clone())
}

/// Equality after merging atoms closer than `tol`; supports must agree
/// coordinatewise within `tol` and weights within `tol`.
pub fn measures_equal(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> bool {
    let a = mu.merged_within(tol);
    let b = nu.merged_within(tol);
    a.len() == b.len()
        && a.dim() == b.dim()
        && a.iter()
            .zip(b.iter())
            .all(|((p, w), (q, v))| p.max_abs_diff(q) <= tol && (w - v).abs() <= tol)
}

/// A finitely supported probability measure on `R^d x R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoupling", into = "RawCoupling")]
pub struct Coupling {
    pairs: Vec<(Point, Point)>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCoupling {
    pairs: Vec<(Point, Point)>,
    weights: Vec<f64>,
}

impl TryFrom<RawCoupling> for Coupling {
    type Error = Error;
    fn try_from(raw: RawCoupling) -> Result<Self> {
        Coupling::new(raw.pairs, raw.weights)
    }
}

impl From<Coupling> for RawCoupling {
    fn from(c: Coupling) -> Self {
        RawCoupling {
            pairs: c.pairs,
            weights: c.weights,
        }
    }
}

fn pair_cmp(a: &(Point, Point), b: &(Point, Point)) -> Ordering {
    a.0.lex_cmp(&b.0).then_with(|| a.1.lex_cmp(&b.1))
}

impl Coupling {
    pub fn new(pairs: Vec<(Point, Point)>, weights: Vec<f64>) -> Result<Self> {
        if pairs.len() != weights.len() {
            return Err(Error::LengthMismatch(pairs.len(), weights.len()));
        }
        check_dim(pairs.iter().flat_map(|(x, y)| [x.dim(), y.dim()]))?;
        if !pairs.iter().all(|(x, y)| x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite);
        }
        let weights = normalized_weights(&weights)?;

        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&a, &b| pair_cmp(&pairs[a], &pairs[b]));
        let mut out_p: Vec<(Point, Point)> = Vec::with_capacity(pairs.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(pairs.len());
        for i in order {
            match out_p.last() {
                Some((x, y)) if x.bit_eq(&pairs[i].0) && y.bit_eq(&pairs[i].1) => {
                    *out_w.last_mut().unwrap() += weights[i];
                }
                _ => {
                    out_p.push(pairs[i].clone());
                    out_w.push(weights[i]);
                }
            }
        }
        Ok(Coupling {
            pairs: out_p,
            weights: out_w,
        })
    }

    /// `(i x i)_# mu`.
    pub fn identity(mu: &DiscreteMeasure) -> Self {
        Coupling {
            pairs: mu.points.iter().map(|p| (p.clone(), p.clone())).collect(),
            weights: mu.weights.clone(),
        }
    }

    /// `mu (x) nu`.
    pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Self> {
        let mut pairs = Vec::with_capacity(mu.len() * nu.len());
        let mut weights = Vec::with_capacity(mu.len() * nu.len());
        for (x, w) in mu.iter() {
            for (y, v) in nu.iter() {
                pairs.push((x.clone(), y.clone()));
                weights.push(w * v);
            }
        }
        Coupling::new(pairs, weights)
    }

    /// `(i x f)_# mu`.
    pub fn from_map<F>(mu: &DiscreteMeasure, map: F) -> Result<Self>
    where
        F: Fn(&Point) -> Option<Point>,
    {
        let mut pairs = Vec::with_capacity(mu.len());
        for (i, p) in mu.points.iter().enumerate() {
            pairs.push((p.clone(), map(p).ok_or(Error::MapUndefined(i))?));
        }
        Coupling::new(pairs, mu.weights.clone())
    }

    pub fn pairs(&self) -> &[(Point, Point)] {
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

    pub fn dim(&self) -> usize {
        self.pairs[0].0.dim()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, &Point, f64)> {
        self.pairs
            .iter()
            .zip(self.weights.iter().copied())
            .map(|((x, y), w)| (x, y, w))
    }

    pub fn first_marginal(&self) -> DiscreteMeasure {
        DiscreteMeasure::canonical(
            self.pairs.iter().map(|(x, _)| x.clone()).collect(),
            self.weights.clone(),
        )
    }

    pub fn second_marginal(&self) -> DiscreteMeasure {
        DiscreteMeasure::canonical(
            self.pairs.iter().map(|(_, y)| y.clone()).collect(),
            self.weights.clone(),
        )
    }

    /// `int |x - y|^2 d gamma`.
    pub fn transport_cost(&self) -> f64 {
        self.iter().map(|(x, y, w)| w * x.dist_sq(y)).sum()
    }

    /// `int <x, y> d gamma`.
    pub fn correlation(&self) -> f64 {
        self.iter().map(|(x, y, w)| w * x.dot(y)).sum()
    }

    /// Swaps the two coordinates.
    pub fn transpose(&self) -> Self {
        let pairs = self
            .pairs
            .iter()
            .map(|(x, y)| (y.clone(), x.clone()))
            .collect();
        Coupling::new(pairs, self.weights.clone()).expect("transpose of a valid coupling")
    }

    /// Image of the coupling under `(x, y) -> (f(x, y), g(x, y))`.
    pub fn map_pairs<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&Point, &Point) -> (Point, Point),
    {
        let pairs = self.pairs.iter().map(|(x, y)| f(x, y)).collect();
        Coupling::new(pairs, self.weights.clone())
    }
}

/// Equality of couplings with the same tolerance semantics as [`measures_equal`],
/// applied to the concatenated pair coordinates.
pub fn couplings_equal(a: &Coupling, b: &Coupling, tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b.iter()).all(|((x, y, w), (u, v, z))| {
            x.max_abs_diff(u) <= tol && y.max_abs_diff(v) <= tol && (w - z).abs() <= tol
        })
}

/// The measure `(pi_t)_# gamma` with `pi_t(x, y) = (1 - t) x + t y`.
/// Bit-equal interpolated atoms are merged.
pub fn displacement_interpolate(gamma: &Coupling, t: f64) -> Result<DiscreteMeasure> {
    displacement_interpolate_with_tol(gamma, t, 0.0)
}

/// As [`displacement_interpolate`], additionally merging interpolated atoms
/// closer than `merge_tol`.
pub fn displacement_interpolate_with_tol(
    gamma: &Coupling,
    t: f64,
    merge_tol: f64,
) -> Result<DiscreteMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "interpolation time {t} outside [0, 1]"
        )));
    }
    // Exact endpoints avoid `(1 - t) x + t y` rounding at t = 0 and t = 1.
    let points = gamma
        .pairs
        .iter()
        .map(|(x, y)| match t {
            0.0 => x.clone(),
            1.0 => y.clone(),
            _ => x.lerp(y, t),
        })
        .collect();
    let mu = DiscreteMeasure::new(points, gamma.weights.clone())?;
    Ok(mu.merged_within(merge_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m1(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(
            points.iter().map(|&x| Point::scalar(x)).collect(),
            weights.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn second_moment_examples() {
        let d = DiscreteMeasure::dirac(Point::new(vec![3.0, 4.0])).unwrap();
        assert_eq!(second_moment(&d), 25.0);
        assert_eq!(m2(&d), 5.0);
        assert_eq!(second_moment(&m1(&[0.0], &[1.0])), 0.0);
        assert_eq!(second_moment(&m1(&[0.0, 2.0], &[0.5, 0.5])), 2.0);
    }

    #[test]
    fn dilate_examples() {
        let d = dilate(&m1(&[1.0], &[1.0]), 2.0).unwrap();
        assert_eq!(d, m1(&[2.0], &[1.0]));
        let mu = m1(&[0.0, 3.0], &[0.5, 0.5]);
        assert_eq!(dilate(&mu, 1.0).unwrap(), mu);
        let third = dilate(&mu, 1.0 / 3.0).unwrap();
        assert!(measures_equal(&third, &m1(&[0.0, 1.0], &[0.5, 0.5]), 1e-15));
        assert!(dilate(&mu, 0.0).is_err());
        assert!(dilate(&mu, -1.0).is_err());
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert_eq!(DiscreteMeasure::new(vec![], vec![]), Err(Error::Empty));
        assert!(matches!(
            DiscreteMeasure::new(vec![Point::scalar(0.0)], vec![0.9]),
            Err(Error::WeightSum(_))
        ));
        assert!(matches!(
            DiscreteMeasure::new(vec![Point::scalar(0.0), Point::scalar(1.0)], vec![1.0, 0.0]),
            Err(Error::NonPositiveWeight(_))
        ));
        assert_eq!(
            DiscreteMeasure::new(vec![Point::scalar(f64::NAN)], vec![1.0]),
            Err(Error::NonFinite)
        );
        assert!(matches!(
            DiscreteMeasure::new(
                vec![Point::scalar(0.0), Point::new(vec![0.0, 1.0])],
                vec![0.5, 0.5]
            ),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(
            DiscreteMeasure::dirac(Point::zeros(17)),
            Err(Error::UnsupportedDimension(17))
        );
        // small deviations are renormalized away
        let mu = DiscreteMeasure::new(
            vec![Point::scalar(0.0), Point::scalar(1.0)],
            vec![0.5, 0.5 + 5e-10],
        )
        .unwrap();
        assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn canonical_form_sorts_and_merges() {
        let mu = m1(&[2.0, 0.0, 2.0], &[0.25, 0.5, 0.25]);
        assert_eq!(mu.points(), &[Point::scalar(0.0), Point::scalar(2.0)]);
        assert_eq!(mu.weights(), &[0.5, 0.5]);
        assert_eq!(mu.position(&Point::scalar(2.0)), Some(1));
        assert_eq!(mu.position(&Point::scalar(1.0)), None);
    }

    #[test]
    fn displacement_interpolation_examples() {
        let g = Coupling::new(vec![(Point::scalar(0.0), Point::scalar(2.0))], vec![1.0]).unwrap();
        assert_eq!(
            displacement_interpolate(&g, 0.5).unwrap(),
            m1(&[1.0], &[1.0])
        );
        let g = Coupling::new(
            vec![
                (Point::scalar(0.0), Point::scalar(2.0)),
                (Point::scalar(1.0), Point::scalar(5.0)),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(
            displacement_interpolate(&g, 0.5).unwrap(),
            m1(&[1.0, 3.0], &[0.5, 0.5])
        );
        assert_eq!(
            displacement_interpolate(&g, 0.0).unwrap(),
            g.first_marginal()
        );
        assert_eq!(
            displacement_interpolate(&g, 1.0).unwrap(),
            g.second_marginal()
        );
        assert!(displacement_interpolate(&g, 1.5).is_err());
        assert!(displacement_interpolate(&g, -0.1).is_err());
    }

    #[test]
    fn interpolation_merges_with_tolerance() {
        let g = Coupling::new(
            vec![
                (Point::scalar(0.0), Point::scalar(1.0)),
                (Point::scalar(1.0), Point::scalar(1e-13)),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(displacement_interpolate(&g, 0.5).unwrap().len(), 2);
        assert_eq!(
            displacement_interpolate_with_tol(&g, 0.5, 1e-12)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn pushforward_examples() {
        let mu = m1(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!(pushforward(&mu, |p| Some(p.clone())).unwrap(), mu);
        assert_eq!(
            pushforward(&mu, |_| Some(Point::scalar(7.0))).unwrap(),
            m1(&[7.0], &[1.0])
        );
        let sq = pushforward(&mu, |p| Some(Point::scalar(p.coords()[0].powi(2)))).unwrap();
        assert_eq!(sq, mu);
        let partial = pushforward(&mu, |p| (p.coords()[0] < 0.5).then(|| p.clone()));
        assert_eq!(partial, Err(Error::MapUndefined(1)));
    }

    #[test]
    fn equality_examples() {
        let mu = m1(&[0.0, 1.0], &[0.5, 0.5]);
        assert!(measures_equal(&mu, &mu, 0.0));
        assert!(!measures_equal(
            &m1(&[0.0], &[1.0]),
            &m1(&[1.0], &[1.0]),
            1e-9
        ));
        let dup = m1(&[0.0, 0.0], &[0.5, 0.5]);
        assert!(measures_equal(&dup, &m1(&[0.0], &[1.0]), 1e-12));
    }

    #[test]
    fn coupling_marginals_and_costs() {
        let mu = m1(&[0.0, 1.0], &[0.5, 0.5]);
        let p = Coupling::product(&mu, &mu).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.first_marginal(), mu);
        assert_eq!(p.second_marginal(), mu);
        assert_relative_eq!(p.correlation(), 0.25);
        assert_relative_eq!(Coupling::identity(&mu).correlation(), 0.5);
        assert_relative_eq!(p.transport_cost(), 0.5);
        let t = p.transpose();
        assert_eq!(t, p);
    }

    #[test]
    fn json_round_trip_validates() {
        let mu = m1(&[1.0, 0.0], &[0.25, 0.75]);
        let s = serde_json::to_string(&mu).unwrap();
        assert_eq!(s, r#"{"points":[[0.0],[1.0]],"weights":[0.75,0.25]}"#);
        let back: DiscreteMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, mu);
        let bad = serde_json::from_str::<DiscreteMeasure>(r#"{"points":[[0.0]],"weights":[0.5]}"#);
        assert!(bad.is_err());
        let c: Coupling =
            serde_json::from_str(r#"{"pairs":[[[0.0],[2.0]]],"weights":[1.0]}"#).unwrap();
        assert_eq!(c.transport_cost(), 4.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn measure() -> impl Strategy<Value = DiscreteMeasure> {
            (1usize..4, 1usize..7).prop_flat_map(|(d, n)| {
                (
                    proptest::collection::vec(proptest::collection::vec(-5.0..5.0f64, d), n),
                    proptest::collection::vec(0.05..1.0f64, n),
                )
                    .prop_map(|(pts, w)| {
                        let s: f64 = w.iter().sum();
                        DiscreteMeasure::new(
                            pts.into_iter().map(Point::new).collect(),
                            w.iter().map(|x| x / s).collect(),
                        )
                        .unwrap()
                    })
            })
        }

        proptest! {
            #[test]
            fn dilation_scales_moment(mu in measure(), a in 0.01..20.0f64) {
                let lhs = second_moment(&dilate(&mu, a).unwrap());
                let rhs = a * a * second_moment(&mu);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE) + 1e-300);
            }

            #[test]
            fn interpolation_endpoints(mu in measure(), nu in measure()) {
                prop_assume!(mu.dim() == nu.dim());
                let g = Coupling::product(&mu, &nu).unwrap();
                prop_assert!(measures_equal(&displacement_interpolate(&g, 0.0).unwrap(), &mu, 1e-12));
                prop_assert!(measures_equal(&displacement_interpolate(&g, 1.0).unwrap(), &nu, 1e-12));
            }

            #[test]
            fn pushforward_keeps_mass(mu in measure(), k in 1.0..4.0f64) {
                let img = pushforward(&mu, |p| Some(Point::new(p.coords().iter().map(|c| (c * k).round()).collect()))).unwrap();
                prop_assert!((img.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(img.len() <= mu.len());
            }
        }
    }
}
