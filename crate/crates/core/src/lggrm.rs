//! Samplers for laws of Gaussian-generated random measures and numeric
//! regularity diagnostics.
//!
//! A Gaussian path is evaluated on `T` labels and its occupation measure
//! (the law of the resulting [`LagrangianMap`]) is one random measure.
//! Convergence verdicts are heuristic ratio tests on finitely many terms,
//! never proofs.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{law, LagrangianMap};
use crate::measure::{Point, MAX_DIM};
use crate::nested::RandomLaw;

/// Largest Walsh level accepted (`2^20` labels).
pub const MAX_WALSH_LEVEL: usize = 20;
/// Relative margin around ratio 1 in the verdict rule.
pub const VERDICT_MARGIN: f64 = 0.05;
/// Diagonal jitter used when the fBM covariance fails to factorize.
pub const CHOLESKY_JITTER: f64 = 1e-12;
/// Number of trailing ratios averaged into a ratio estimate.
const RATIO_WINDOW: usize = 3;

/// Orthogonal (or covariance) data generating the Gaussian paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Basis {
    /// Brownian motion on `[0, 1]`.
    BrownianMotion,
    /// `sum_n xi_n sqrt(2) sin(n q)` on `(0, pi)` with `xi_n ~ N(0, lambda_n^2)`;
    /// `lambda_n = 1 / (pi n)` when omitted (the Brownian bridge spectrum).
    BridgeSine {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambdas: Option<Vec<f64>>,
    },
    /// `sum_I xi_I W_I(q)` over `Q = {-1, 1}^levels`, `xi_I ~ N(0, scales[max I]^2)`
    /// (`max {} = 0`), so `scales` has `levels + 1` entries.
    Walsh { levels: usize, scales: Vec<f64> },
    /// Fractional Brownian motion on `[0, 1]`.
    FractionalBm { hurst: f64 },
}

/// Specification of a Gaussian-generated random measure; every coordinate of
/// the path is an independent copy of the scalar process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub basis: Basis,
    pub dim: usize,
    /// Number of retained sine modes (ignored by the other bases).
    #[serde(default)]
    pub truncation: usize,
    /// Number of labels `T` discretizing `Q`.
    pub label_grid: usize,
    #[serde(default)]
    pub seed: u64,
}

impl GaussianSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(self.dim));
        }
        if self.label_grid == 0 {
            return Err(Error::InvalidParameter(
                "label_grid must be positive".into(),
            ));
        }
        let nonneg = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        match &self.basis {
            Basis::BrownianMotion => {}
            Basis::BridgeSine { lambdas } => {
                if self.truncation == 0 {
                    return Err(Error::InvalidParameter(
                        "truncation must be positive".into(),
                    ));
                }
                if let Some(l) = lambdas {
                    if l.len() != self.truncation {
                        return Err(Error::LengthMismatch(l.len(), self.truncation));
                    }
                    if !nonneg(l) {
                        return Err(Error::InvalidParameter(
                            "lambdas must be finite and nonnegative".into(),
                        ));
                    }
                }
            }
            Basis::Walsh { levels, scales } => {
                if *levels > MAX_WALSH_LEVEL {
                    return Err(Error::TooLarge(format!(
                        "Walsh level {levels} exceeds {MAX_WALSH_LEVEL}"
                    )));
                }
                if scales.len() != levels + 1 {
                    return Err(Error::LengthMismatch(scales.len(), levels + 1));
                }
                if !nonneg(scales) {
                    return Err(Error::InvalidParameter(
                        "scales must be finite and nonnegative".into(),
                    ));
                }
                if self.label_grid != 1 << levels {
                    return Err(Error::InvalidParameter(format!(
                        "Walsh level {levels} needs label_grid = {}",
                        1usize << levels
                    )));
                }
            }
            Basis::FractionalBm { hurst } => {
                if !(*hurst > 0.0 && *hurst < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Hurst index {hurst} outside (0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `lambda_n` for a sine basis.
    pub fn sine_lambdas(&self) -> Option<Vec<f64>> {
        match &self.basis {
            Basis::BridgeSine { lambdas: Some(l) } => Some(l.clone()),
            Basis::BridgeSine { lambdas: None } => Some(default_lambdas(self.truncation)),
            _ => None,
        }
    }

    /// Sum of the squared retained scales of an explicit basis, which is the
    /// second moment `E |X(q)|^2` averaged over labels, per coordinate.
    pub fn scale_sum(&self) -> Option<f64> {
        match &self.basis {
            Basis::BridgeSine { .. } => {
                Some(compensated_sum(self.sine_lambdas()?.iter().map(|l| l * l)))
            }
            Basis::Walsh { scales, .. } => Some(
                scales[0] * scales[0]
                    + (1..scales.len())
                        .map(|n| (1u64 << (n - 1)) as f64 * scales[n] * scales[n])
                        .sum::<f64>(),
            ),
            _ => None,
        }
    }
}

/// `lambda_n = 1 / (pi n)`, `n = 1..=n_max`.
pub fn default_lambdas(n_max: usize) -> Vec<f64> {
    (1..=n_max)
        .map(|n| 1.0 / (std::f64::consts::PI * n as f64))
        .collect()
}

/// Neumaier-compensated summation.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

/// The `index`-th sub-seed of `master`: output `index + 1` of a SplitMix64
/// generator seeded with `master`.
pub fn sub_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// In-place Walsh–Hadamard transform: `out[k] = sum_I x[I] (-1)^{|I & k|}`.
fn walsh_hadamard(x: &mut [f64]) {
    let mut h = 1;
    while h < x.len() {
        for block in x.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
}

/// Level `max I` of the set encoded by bit mask `mask` (bit `i - 1` for `i`).
fn level(mask: usize) -> usize {
    (usize::BITS - mask.leading_zeros()) as usize
}

enum Kernel {
    Brownian,
    /// `modes[n * T + j] = lambda_{n+1} sqrt(2) sin((n + 1) q_j)`.
    Sine {
        modes: Vec<f64>,
        count: usize,
    },
    /// Standard deviation of `xi_I` for every set `I`.
    Walsh {
        sigmas: Vec<f64>,
    },
    /// Lower Cholesky factor of the covariance on the grid.
    Fbm {
        factor: DMatrix<f64>,
    },
}

/// A validated spec with its precomputed factorization.
pub struct Sampler {
    spec: GaussianSpec,
    kernel: Kernel,
}

impl Sampler {
    pub fn new(spec: &GaussianSpec) -> Result<Self> {
        spec.validate()?;
        let t = spec.label_grid;
        let kernel = match &spec.basis {
            Basis::BrownianMotion => Kernel::Brownian,
            Basis::BridgeSine { .. } => {
                let lambdas = spec.sine_lambdas().expect("sine basis");
                let grid = sine_grid(t);
                let modes = lambdas
                    .iter()
                    .enumerate()
                    .flat_map(|(n, l)| {
                        let k = (n + 1) as f64;
                        grid.iter()
                            .map(move |q| l * std::f64::consts::SQRT_2 * (k * q).sin())
                    })
                    .collect();
                Kernel::Sine {
                    modes,
                    count: lambdas.len(),
                }
            }
            Basis::Walsh { scales, .. } => Kernel::Walsh {
                sigmas: (0..t).map(|mask| scales[level(mask)]).collect(),
            },
            Basis::FractionalBm { hurst } => Kernel::Fbm {
                factor: fbm_factor(*hurst, t)?,
            },
        };
        Ok(Sampler {
            spec: spec.clone(),
            kernel,
        })
    }

    pub fn spec(&self) -> &GaussianSpec {
        &self.spec
    }

    /// One scalar path on the label grid.
    fn scalar_path(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let t = self.spec.label_grid;
        match &self.kernel {
            Kernel::Brownian => {
                let sd = (1.0 / t as f64).sqrt();
                let mut acc = 0.0;
                (0..t)
                    .map(|_| {
                        acc += sd * normal(rng);
                        acc
                    })
                    .collect()
            }
            Kernel::Sine { modes, count } => {
                let mut path = vec![0.0; t];
                for n in 0..*count {
                    let xi = normal(rng);
                    for (p, m) in path.iter_mut().zip(&modes[n * t..(n + 1) * t]) {
                        *p += xi * m;
                    }
                }
                path
            }
            Kernel::Walsh { sigmas } => {
                let mut coef: Vec<f64> = sigmas.iter().map(|s| s * normal(rng)).collect();
                walsh_hadamard(&mut coef);
                coef
            }
            Kernel::Fbm { factor } => {
                let z: Vec<f64> = (0..t).map(|_| normal(rng)).collect();
                (0..t)
                    .map(|i| (0..=i).map(|j| factor[(i, j)] * z[j]).sum())
                    .collect()
            }
        }
    }

    /// A path with coordinates drawn in order from a generator seeded by `seed`.
    pub fn sample(&self, seed: u64) -> LagrangianMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<Vec<f64>> = (0..self.spec.dim)
            .map(|_| self.scalar_path(&mut rng))
            .collect();
        let values = (0..self.spec.label_grid)
            .map(|j| Point::new(coords.iter().map(|c| c[j]).collect()))
            .collect();
        LagrangianMap::new(values).expect("sampled values are finite")
    }

    /// `S` occupation measures with weight `1 / S` from sub-seeds of `seed`.
    pub fn sample_law(&self, samples: usize, seed: u64) -> Result<RandomLaw> {
        if samples == 0 {
            return Err(Error::InvalidParameter(
                "sample count must be positive".into(),
            ));
        }
        let atoms = (0..samples as u64)
            .into_par_iter()
            .map(|i| law(&self.sample(sub_seed(seed, i))))
            .collect();
        RandomLaw::uniform(atoms)
    }
}

/// Midpoints `q_j = pi (j + 1/2) / T` of a uniform partition of `(0, pi)`.
pub fn sine_grid(t: usize) -> Vec<f64> {
    (0..t)
        .map(|j| std::f64::consts::PI * (j as f64 + 0.5) / t as f64)
        .collect()
}

/// Times `t_j = (j + 1) / T` of the Brownian and fBM grids.
pub fn time_grid(t: usize) -> Vec<f64> {
    (1..=t).map(|j| j as f64 / t as f64).collect()
}

/// `C(s, t) = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    let e = 2.0 * hurst;
    0.5 * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e))
}

fn fbm_factor(hurst: f64, t: usize) -> Result<DMatrix<f64>> {
    let grid = time_grid(t);
    let cov = DMatrix::from_fn(t, t, |i, j| fbm_covariance(hurst, grid[i], grid[j]));
    if let Some(c) = cov.clone().cholesky() {
        return Ok(c.l());
    }
    let jittered = cov + DMatrix::identity(t, t) * CHOLESKY_JITTER;
    jittered
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Cholesky(format!("fBM covariance with H = {hurst} on {t} labels")))
}

/// One path; bit-identical for equal `spec` and `seed`.
pub fn sample_path(spec: &GaussianSpec, seed: u64) -> Result<LagrangianMap> {
    Ok(Sampler::new(spec)?.sample(seed))
}

/// `S` independent occupation measures with weight `1 / S`.
pub fn sample_law(spec: &GaussianSpec, samples: usize, seed: u64) -> Result<RandomLaw> {
    Sampler::new(spec)?.sample_law(samples, seed)
}

/// `W_I(q) = prod_{i in I} q_i`, with `I` a set of indices in `1..=q.len()`.
pub fn walsh_function(set: &[usize], q: &[i8]) -> Result<i8> {
    if q.iter().any(|&e| e != 1 && e != -1) {
        return Err(Error::InvalidParameter(
            "label coordinates must be +1 or -1".into(),
        ));
    }
    let mut seen = vec![false; q.len()];
    let mut value = 1;
    for &i in set {
        if i == 0 || i > q.len() {
            return Err(Error::InvalidParameter(format!(
                "Walsh index {i} outside 1..={}",
                q.len()
            )));
        }
        if std::mem::replace(&mut seen[i - 1], true) {
            return Err(Error::InvalidParameter(format!("Walsh index {i} repeated")));
        }
        value *= q[i - 1];
    }
    Ok(value)
}

/// Bit mask of the coordinates equal to `-1`.
fn sign_mask(q: &[i8]) -> Result<usize> {
    q.iter()
        .enumerate()
        .try_fold(0usize, |mask, (i, &e)| match e {
            1 => Ok(mask),
            -1 => Ok(mask | 1 << i),
            _ => Err(Error::InvalidParameter(
                "label coordinates must be +1 or -1".into(),
            )),
        })
}

/// A point of the label space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    /// A time in `[0, 1]` or an angle in `(0, pi)`.
    Time(f64),
    /// A point of `{-1, 1}^m`.
    Signs(Vec<i8>),
}

/// `(alpha^2, beta^2, lambda^2)` at a pair of labels. All coordinates share
/// their scales, so the three coincide.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceTriple {
    pub alpha_sq: f64,
    pub beta_sq: f64,
    pub lambda_sq: f64,
}

impl VarianceTriple {
    fn isotropic(v: f64) -> Self {
        VarianceTriple {
            alpha_sq: v,
            beta_sq: v,
            lambda_sq: v,
        }
    }
}

/// `sum_n lambda_n^2 (E_n(q1) - E_n(q2))^2` for `E_n(q) = sqrt(2) sin(n q)`.
fn sine_increment_variance(lambdas: &[f64], q1: f64, q2: f64) -> f64 {
    compensated_sum(lambdas.iter().enumerate().map(|(n, l)| {
        let k = (n + 1) as f64;
        let d = (k * q1).sin() - (k * q2).sin();
        2.0 * l * l * d * d
    }))
}

/// `sum_I alpha_I^2 (W_I(q1) - W_I(q2))^2 = 4 sum_{|I & diff| odd} alpha_I^2`.
fn walsh_increment_variance(scales: &[f64], diff: usize, sets: usize) -> f64 {
    4.0 * (0..sets)
        .filter(|&i| (i & diff).count_ones() % 2 == 1)
        .map(|i| scales[level(i)] * scales[level(i)])
        .sum::<f64>()
}

/// Variance of the increment `X(q1) - X(q2)` of one coordinate. Brownian
/// motion and fBM use their closed forms `|s - t|` and `|s - t|^{2H}`.
pub fn variance_function(spec: &GaussianSpec, q1: &Label, q2: &Label) -> Result<VarianceTriple> {
    spec.validate()?;
    let v = match (&spec.basis, q1, q2) {
        (Basis::BrownianMotion, Label::Time(s), Label::Time(t)) => (s - t).abs(),
        (Basis::FractionalBm { hurst }, Label::Time(s), Label::Time(t)) => {
            (s - t).abs().powf(2.0 * hurst)
        }
        (Basis::BridgeSine { .. }, Label::Time(s), Label::Time(t)) => {
            sine_increment_variance(&spec.sine_lambdas().expect("sine basis"), *s, *t)
        }
        (Basis::Walsh { levels, scales }, Label::Signs(a), Label::Signs(b)) => {
            if a.len() != *levels || b.len() != *levels {
                return Err(Error::DimensionMismatch {
                    expected: *levels,
                    found: a.len().max(b.len()),
                });
            }
            walsh_increment_variance(scales, sign_mask(a)? ^ sign_mask(b)?, 1 << levels)
        }
        _ => {
            return Err(Error::InvalidParameter(
                "label kind does not match the basis".into(),
            ))
        }
    };
    Ok(VarianceTriple::isotropic(v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

/// Contribution of pairs of labels at distance in `[lower, upper)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub lower: f64,
    pub upper: f64,
    /// `P x P` mass of the shell.
    pub mass: f64,
    pub contribution: f64,
    pub standard_error: f64,
}

/// A numeric diagnostic for the summability of a nonnegative series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub criterion: String,
    pub partial_sums: Vec<f64>,
    pub ratio_estimate: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shells: Vec<Shell>,
    pub note: String,
}

const NOTE: &str = "numeric diagnostic: ratio test on finitely many terms, not a proof";

/// Ratio estimate and verdict for nonnegative `terms`.
///
/// The estimate is the geometric mean of the last (up to three) consecutive
/// ratios. Below `1 - margin` the series is reported convergent, above
/// `1 + margin` divergent. In between, tail terms that do not decay (none
/// falls below `1 - margin` times the start of the window) mean the terms do
/// not tend to zero, so the series diverges; otherwise the test is
/// inconclusive.
pub fn ratio_verdict(terms: &[f64], margin: f64) -> (f64, Verdict) {
    if terms.len() < 2 {
        return (1.0, Verdict::Inconclusive);
    }
    let k = RATIO_WINDOW.min(terms.len() - 1);
    let tail = &terms[terms.len() - 1 - k..];
    if tail[0] <= 0.0 {
        return (1.0, Verdict::Inconclusive);
    }
    let ratio = (tail[k] / tail[0]).powf(1.0 / k as f64);
    let verdict = if ratio < 1.0 - margin {
        Verdict::Converges
    } else if ratio > 1.0 + margin || tail.iter().all(|&a| a >= (1.0 - margin) * tail[0]) {
        Verdict::Diverges
    } else {
        Verdict::Inconclusive
    };
    (ratio, verdict)
}

fn running_sums(terms: &[f64]) -> Vec<f64> {
    terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect()
}

/// Level amplitudes `A_n = (sum_{max I = n} alpha_I^2)^{1/2} = 2^{(n-1)/2} scales[n]`.
pub fn walsh_level_amplitudes(scales: &[f64]) -> Vec<f64> {
    (1..scales.len())
        .map(|n| ((1u64 << (n - 1)) as f64).sqrt() * scales[n])
        .collect()
}

/// Partial sums of `sum_n 1 / (2^n A_n^d)` for `A_1, A_2, ..`.
pub fn walsh_criterion(amplitudes: &[f64], d: usize) -> Result<RegularityReport> {
    if amplitudes.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(a) = amplitudes.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "level amplitude {a} must be positive"
        )));
    }
    if d == 0 || d > MAX_DIM {
        return Err(Error::UnsupportedDimension(d));
    }
    let terms: Vec<f64> = amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| 1.0 / (2f64.powi(i as i32 + 1) * a.powi(d as i32)))
        .collect();
    let (ratio_estimate, verdict) = ratio_verdict(&terms, VERDICT_MARGIN);
    Ok(RegularityReport {
        criterion: "walsh".into(),
        partial_sums: running_sums(&terms),
        ratio_estimate,
        verdict,
        estimate: None,
        standard_error: None,
        shells: Vec::new(),
        note: NOTE.into(),
    })
}

/// The fBM super-regularity condition `H d < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstFlag {
    pub hurst: f64,
    pub dim: usize,
    pub hd: f64,
    pub satisfied: bool,
}

pub fn hurst_flag(hurst: f64, dim: usize) -> HurstFlag {
    let hd = hurst * dim as f64;
    HurstFlag {
        hurst,
        dim,
        hd,
        satisfied: hd < 1.0,
    }
}

/// Monte Carlo estimate of `int 1 / alpha^d(q1, q2) dP dP` off the diagonal.
///
/// The label space is split into dyadic shells of pair distance, finest
/// shell first excluded below the grid step (and, for a truncated sine
/// basis, below its resolution `pi / N`). Each shell is estimated with
/// `samples` draws from its own sub-seed. Shell contributions, ordered from
/// coarse to fine, are the terms of the reported series: a contribution
/// ratio near or above one between successive shells signals a
/// non-integrable singularity at the diagonal.
pub fn berman_integral_estimate(
    spec: &GaussianSpec,
    samples: usize,
    seed: u64,
) -> Result<RegularityReport> {
    spec.validate()?;
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    let d = spec.dim as i32;
    let t = spec.label_grid;
    let shells: Vec<Shell> = match &spec.basis {
        Basis::Walsh { levels, scales } => {
            let m = *levels;
            if m == 0 {
                return Err(Error::InvalidParameter(
                    "Walsh level must be positive".into(),
                ));
            }
            (1..=m)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, i as u64));
                    // Pairs whose first differing coordinate is i: bit i - 1 flips,
                    // higher coordinates are independent.
                    let high = (t - 1) & !((1usize << i) - 1);
                    let values = (0..samples)
                        .map(|_| {
                            let diff = (1 << (i - 1)) | (rng.random::<u64>() as usize & high);
                            let v = walsh_increment_variance(scales, diff, t);
                            if v <= 0.0 {
                                Err(Error::DegenerateBasis)
                            } else {
                                Ok(v.sqrt().powi(-d))
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let h = 0.5f64.powi(i as i32);
                    Ok(shell(h, 2.0 * h, h, &values))
                })
                .collect::<Result<_>>()?
        }
        basis => {
            let (length, floor) = match basis {
                Basis::BridgeSine { .. } => {
                    let pi = std::f64::consts::PI;
                    (pi, (pi / t as f64).max(pi / spec.truncation as f64))
                }
                _ => (1.0, 1.0 / t as f64),
            };
            let mut bounds = Vec::new();
            let mut upper = length;
            while upper / 2.0 >= floor {
                bounds.push((upper / 2.0, upper));
                upper /= 2.0;
            }
            if bounds.is_empty() {
                return Err(Error::InvalidParameter(
                    "label grid too coarse for a shell probe".into(),
                ));
            }
            let lambdas = spec.sine_lambdas();
            bounds
                .par_iter()
                .enumerate()
                .map(|(j, &(a, b))| {
                    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, j as u64));
                    let (ha, hb) = ((length - a).powi(2), (length - b).powi(2));
                    let values = (0..samples)
                        .map(|_| {
                            // Pair distance has density proportional to (L - delta) on [a, b).
                            let u: f64 = rng.random();
                            let delta = length - (ha - u * (ha - hb)).sqrt();
                            let s = rng.random::<f64>() * (length - delta);
                            let v = match (&spec.basis, &lambdas) {
                                (Basis::FractionalBm { hurst }, _) => delta.powf(2.0 * hurst),
                                (_, Some(l)) => sine_increment_variance(l, s, s + delta),
                                _ => delta,
                            };
                            if v <= 0.0 {
                                Err(Error::DegenerateBasis)
                            } else {
                                Ok(v.sqrt().powi(-d))
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(shell(a, b, (ha - hb) / (length * length), &values))
                })
                .collect::<Result<_>>()?
        }
    };
    let terms: Vec<f64> = shells.iter().map(|s| s.contribution).collect();
    let (ratio_estimate, verdict) = ratio_verdict(&terms, VERDICT_MARGIN);
    let estimate = terms.iter().sum();
    let se = shells
        .iter()
        .map(|s| s.standard_error.powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(RegularityReport {
        criterion: "berman".into(),
        partial_sums: running_sums(&terms),
        ratio_estimate,
        verdict,
        estimate: Some(estimate),
        standard_error: Some(se),
        shells,
        note: NOTE.into(),
    })
}

fn shell(lower: f64, upper: f64, mass: f64, values: &[f64]) -> Shell {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Shell {
        lower,
        upper,
        mass,
        contribution: mass * mean,
        standard_error: mass * (var / n).sqrt(),
    }
}

/// For each `eps`, the `M`-average of the mass of pairs of atoms closer than
/// `eps`, including each atom paired with itself. The limit `eps -> 0` is the
/// exact-atom term `sum_k W_k sum_i w_{k,i}^2`.
pub fn atomless_diagnostic(m: &RandomLaw, eps_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    if eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(
            "eps must be strictly decreasing".into(),
        ));
    }
    let per_atom: Vec<Vec<f64>> = m
        .atoms()
        .par_iter()
        .map(|mu| {
            // Atoms are sorted lexicographically, so the first coordinate is
            // nondecreasing and the inner scan stops once it exceeds eps.
            let (pts, w) = (mu.points(), mu.weights());
            let self_term: f64 = w.iter().map(|x| x * x).sum();
            eps_list
                .iter()
                .map(|&eps| {
                    let mut close = 0.0;
                    for i in 0..pts.len() {
                        for j in i + 1..pts.len() {
                            if pts[j].coords()[0] - pts[i].coords()[0] >= eps {
                                break;
                            }
                            if pts[i].dist_sq(&pts[j]) < eps * eps {
                                close += 2.0 * w[i] * w[j];
                            }
                        }
                    }
                    self_term + close
                })
                .collect()
        })
        .collect();
    Ok(eps_list
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            (
                eps,
                m.weights()
                    .iter()
                    .zip(&per_atom)
                    .map(|(wk, v)| wk * v[e])
                    .sum(),
            )
        })
        .collect())
}
