//! Functionals on discrete measures and their grid-restricted convex calculus.
//!
//! Conjugates are taken over a finite grid of measures, so every conjugate
//! value here is a lower bound of the conjugate over all measures and is
//! labelled as grid-relative. Arg-max and arg-min ties go to the smallest
//! grid index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{
    dilate, displacement_interpolate, measures_equal, second_moment, Coupling, DiscreteMeasure,
    Point,
};
use crate::ot::{solve_mc, solve_w2};

/// Tolerance of the fallback grid lookup.
pub const GRID_LOOKUP_TOL: f64 = 1e-12;

/// Builtin convex integrands `f` of potential energies `int f d mu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Potential {
    /// `|x|^2 / 2`
    Quadratic,
    /// `|x|`
    Norm,
    /// `<c, x>`
    Linear { c: Point },
}

impl Potential {
    fn eval(&self, x: &Point) -> Result<f64> {
        Ok(match self {
            Potential::Quadratic => 0.5 * x.norm_sq(),
            Potential::Norm => x.norm_sq().sqrt(),
            Potential::Linear { c } => {
                if c.dim() != x.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: c.dim(),
                        found: x.dim(),
                    });
                }
                c.dot(x)
            }
        })
    }
}

/// Builtin symmetric kernels `g` of interaction energies `int int g d mu d mu`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Interaction {
    /// `|x - y|^2 / 2`
    HalfSquaredDistance,
    /// `|x - y|`
    Distance,
}

impl Interaction {
    fn eval(&self, x: &Point, y: &Point) -> f64 {
        match self {
            Interaction::HalfSquaredDistance => 0.5 * x.dist_sq(y),
            Interaction::Distance => x.dist_sq(y).sqrt(),
        }
    }
}

/// A functional tabulated on finitely many measures (`+infinity` elsewhere).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct GridTable {
    grid: Vec<DiscreteMeasure>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    grid: Vec<DiscreteMeasure>,
    values: Vec<f64>,
}

impl TryFrom<RawTable> for GridTable {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        GridTable::new(raw.grid, raw.values)
    }
}

impl From<GridTable> for RawTable {
    fn from(t: GridTable) -> Self {
        RawTable {
            grid: t.grid,
            values: t.values,
        }
    }
}

impl GridTable {
    pub fn new(grid: Vec<DiscreteMeasure>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Empty);
        }
        if grid.len() != values.len() {
            return Err(Error::LengthMismatch(grid.len(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(GridTable { grid, values })
    }

    /// Tabulates `phi` on `grid`.
    pub fn tabulate(phi: &Functional, grid: &[DiscreteMeasure]) -> Result<Self> {
        let values = evaluate_on(phi, grid)?;
        GridTable::new(grid.to_vec(), values)
    }

    pub fn grid(&self) -> &[DiscreteMeasure] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid index of `mu`: bit-equal match first, then equality within
    /// [`GRID_LOOKUP_TOL`].
    pub fn index_of(&self, mu: &DiscreteMeasure) -> Option<usize> {
        self.grid.iter().position(|g| g == mu).or_else(|| {
            self.grid
                .iter()
                .position(|g| measures_equal(g, mu, GRID_LOOKUP_TOL))
        })
    }

    pub fn lookup(&self, mu: &DiscreteMeasure) -> Result<f64> {
        self.index_of(mu)
            .map(|i| self.values[i])
            .ok_or(Error::GridMiss)
    }

    /// The table of `a * phi`.
    pub fn scaled(&self, a: f64) -> GridTable {
        GridTable {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }
}

/// A functional on discrete measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Functional {
    Zero,
    /// `V_f(mu) = int f d mu`
    Potential {
        f: Potential,
    },
    /// `W_g(mu) = int int g(x, y) d mu(x) d mu(y)`
    Interaction {
        g: Interaction,
    },
    /// `k_nu(mu) = <mu, nu>`
    MaxPairing {
        nu: DiscreteMeasure,
    },
    GridTable {
        table: GridTable,
    },
}

impl Functional {
    /// `phi(mu) = m_2^2(mu) / 2`.
    pub fn half_moment() -> Self {
        Functional::Potential {
            f: Potential::Quadratic,
        }
    }

    pub fn is_grid_table(&self) -> bool {
        matches!(self, Functional::GridTable { .. })
    }
}

/// `phi(mu)`.
pub fn evaluate(phi: &Functional, mu: &DiscreteMeasure) -> Result<f64> {
    match phi {
        Functional::Zero => Ok(0.0),
        Functional::Potential { f } => {
            let mut total = 0.0;
            for (x, w) in mu.iter() {
                total += w * f.eval(x)?;
            }
            Ok(total)
        }
        Functional::Interaction { g } => Ok(mu
            .iter()
            .map(|(x, w)| mu.iter().map(|(y, v)| w * v * g.eval(x, y)).sum::<f64>())
            .sum()),
        Functional::MaxPairing { nu } => Ok(solve_mc(mu, nu)?.cost),
        Functional::GridTable { table } => table.lookup(mu),
    }
}

fn evaluate_on(phi: &Functional, grid: &[DiscreteMeasure]) -> Result<Vec<f64>> {
    grid.par_iter().map(|mu| evaluate(phi, mu)).collect()
}

/// `<mu, nu>`.
pub fn pairing(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(solve_mc(mu, nu)?.cost)
}

/// First index attaining the maximum; `values` must be nonempty.
fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
}

fn argmin(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (i, v)| if v < best.1 { (i, v) } else { best },
        )
}

/// A grid-relative extremum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridExtremum {
    pub value: f64,
    /// Smallest grid index attaining the value.
    pub index: usize,
}

/// `phi*_G(nu) = max_{mu in G} <nu, mu> - phi(mu)`, a lower bound of `phi*(nu)`.
pub fn klf_conjugate_on_grid(
    phi: &Functional,
    grid: &[DiscreteMeasure],
    nu: &DiscreteMeasure,
) -> Result<GridExtremum> {
    if grid.is_empty() {
        return Err(Error::Empty);
    }
    let phis = evaluate_on(phi, grid)?;
    conjugate_from_values(grid, &phis, nu)
}

fn conjugate_from_values(
    grid: &[DiscreteMeasure],
    phis: &[f64],
    nu: &DiscreteMeasure,
) -> Result<GridExtremum> {
    let terms = grid
        .par_iter()
        .zip(phis)
        .map(|(mu, p)| Ok(pairing(nu, mu)? - p))
        .collect::<Result<Vec<_>>>()?;
    let (index, value) = argmax(&terms);
    Ok(GridExtremum { value, index })
}

/// `(phi*_G)*_G(mu) = max_{nu in G} <mu, nu> - phi*_G(nu)`; bounded above by
/// `phi(mu)` for `mu` in `G`.
pub fn grid_biconjugate(
    phi: &Functional,
    grid: &[DiscreteMeasure],
    mu: &DiscreteMeasure,
) -> Result<GridExtremum> {
    if grid.is_empty() {
        return Err(Error::Empty);
    }
    let phis = evaluate_on(phi, grid)?;
    let conj = grid
        .iter()
        .map(|nu| Ok(conjugate_from_values(grid, &phis, nu)?.value))
        .collect::<Result<Vec<_>>>()?;
    conjugate_from_values(grid, &conj, mu)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FenchelReport {
    /// `int <x, y> d gamma`
    pub correlation: f64,
    /// `<mu, nu>` for the marginals of `gamma`.
    pub pairing: f64,
    /// `phi(mu) + phi*(nu)` with the conjugate over the grid and `mu`.
    pub bound: f64,
    /// True when the conjugate is the exact one (tabulated `phi`, whose
    /// domain is its grid); otherwise the right inequality is one-sided.
    pub exact: bool,
    pub holds: bool,
}

/// The chain `int <x, y> d gamma <= <mu, nu> <= phi(mu) + phi*(nu)`.
pub fn check_fenchel(
    phi: &Functional,
    grid: &[DiscreteMeasure],
    gamma: &Coupling,
    tol: f64,
) -> Result<FenchelReport> {
    let (mu, nu) = (gamma.first_marginal(), gamma.second_marginal());
    let correlation = gamma.correlation();
    let pair = pairing(&mu, &nu)?;
    let phi_mu = evaluate(phi, &mu)?;
    let (search, exact): (Vec<DiscreteMeasure>, bool) = match phi {
        Functional::GridTable { table } => (table.grid().to_vec(), true),
        _ => {
            let mut g = grid.to_vec();
            if !g.contains(&mu) {
                g.push(mu.clone());
            }
            (g, false)
        }
    };
    let conj = klf_conjugate_on_grid(phi, &search, &nu)?.value;
    let bound = phi_mu + conj;
    let scale = 1.0 + correlation.abs() + pair.abs() + bound.abs();
    Ok(FenchelReport {
        correlation,
        pairing: pair,
        bound,
        exact,
        holds: correlation <= pair + tol * scale && pair <= bound + tol * scale,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubgradientReport {
    /// `int <x, y> d gamma`
    pub correlation: f64,
    /// `phi(mu) + phi*_G(nu)`
    pub fenchel_sum: f64,
    /// Whether `gamma` is an optimal coupling of its marginals.
    pub optimal: bool,
    pub certified: bool,
}

/// Certifies `gamma` as a total subgradient of the tabulated `phi` at its
/// first marginal, relative to the grid: Fenchel equality within `tol` and
/// optimality of `gamma` via `int |x - y|^2 d gamma = w_2^2`.
pub fn subgradient_certificate(
    table: &GridTable,
    gamma: &Coupling,
    tol: f64,
) -> Result<SubgradientReport> {
    let (mu, nu) = (gamma.first_marginal(), gamma.second_marginal());
    let phi_mu = table.lookup(&mu)?;
    let conj = conjugate_from_values(table.grid(), table.values(), &nu)?.value;
    let correlation = gamma.correlation();
    let fenchel_sum = phi_mu + conj;
    let w2 = solve_w2(&mu, &nu)?.cost;
    let scale = 1.0 + second_moment(&mu) + second_moment(&nu);
    let optimal = (gamma.transport_cost() - w2).abs() <= tol * scale;
    let equal = (correlation - fenchel_sum).abs() <= tol * (1.0 + fenchel_sum.abs());
    Ok(SubgradientReport {
        correlation,
        fenchel_sum,
        optimal,
        certified: optimal && equal,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// `phi(mu_t) - (1 - t) phi(mu_0) - t phi(mu_1)` per time.
    pub excess: Vec<(f64, f64)>,
    pub max_excess: f64,
    pub holds: bool,
}

fn convexity_report(excess: Vec<(f64, f64)>, tol: f64, scale: f64) -> ConvexityReport {
    let max_excess = excess.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    ConvexityReport {
        holds: excess.iter().all(|e| e.1 <= tol * scale),
        excess,
        max_excess,
    }
}

/// Convexity of `phi` along the displacement interpolation of `gamma`.
pub fn check_total_convexity(
    phi: &Functional,
    gamma: &Coupling,
    ts: &[f64],
    tol: f64,
) -> Result<ConvexityReport> {
    if phi.is_grid_table() {
        return Err(Error::InvalidParameter(
            "tabulated functionals cannot be evaluated at interpolants".into(),
        ));
    }
    let f0 = evaluate(phi, &displacement_interpolate(gamma, 0.0)?)?;
    let f1 = evaluate(phi, &displacement_interpolate(gamma, 1.0)?)?;
    let excess = ts
        .par_iter()
        .map(|&t| {
            let ft = evaluate(phi, &displacement_interpolate(gamma, t)?)?;
            Ok((t, ft - (1.0 - t) * f0 - t * f1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(convexity_report(excess, tol, 1.0 + f0.abs() + f1.abs()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// `|k_nu(mu1) - k_nu(mu2)|`
    pub difference: f64,
    /// `m_2(nu) w_2(mu1, mu2)`
    pub bound: f64,
    pub holds: bool,
}

/// `|k_nu(mu1) - k_nu(mu2)| <= m_2(nu) w_2(mu1, mu2) + tol`.
pub fn lipschitz_check_knu(
    nu: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    tol: f64,
) -> Result<LipschitzReport> {
    let difference = (pairing(mu1, nu)? - pairing(mu2, nu)?).abs();
    let bound = second_moment(nu).sqrt() * solve_w2(mu1, mu2)?.cost.max(0.0).sqrt();
    Ok(LipschitzReport {
        difference,
        bound,
        holds: difference <= bound + tol,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DilationReport {
    /// `(a phi)*_G(nu)`
    pub lhs: f64,
    /// `a phi*_G(dilate(nu, 1 / a))`
    pub rhs: f64,
    pub holds: bool,
}

/// `(a phi)*_G(nu) = a phi*_G(nu / a)` over the grid of `table`.
pub fn dilation_conjugacy_check(
    table: &GridTable,
    a: f64,
    nu: &DiscreteMeasure,
    tol: f64,
) -> Result<DilationReport> {
    if a <= 0.0 || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "dilation factor {a} must be positive"
        )));
    }
    let scaled = table.scaled(a);
    let lhs = conjugate_from_values(scaled.grid(), scaled.values(), nu)?.value;
    let shrunk = dilate(nu, 1.0 / a)?;
    let rhs = a * conjugate_from_values(table.grid(), table.values(), &shrunk)?.value;
    Ok(DilationReport {
        lhs,
        rhs,
        holds: (lhs - rhs).abs() <= tol * (1.0 + lhs.abs().max(rhs.abs())),
    })
}

/// `min_{nu in G} w_2^2(mu, nu) / (2 tau) + phi(nu)`.
pub fn moreau_yosida_on_grid(
    phi: &Functional,
    grid: &[DiscreteMeasure],
    tau: f64,
    mu: &DiscreteMeasure,
) -> Result<GridExtremum> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "step {tau} must be positive"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Empty);
    }
    let phis = evaluate_on(phi, grid)?;
    let terms = grid
        .par_iter()
        .zip(&phis)
        .map(|(nu, p)| Ok(solve_w2(mu, nu)?.cost / (2.0 * tau) + p))
        .collect::<Result<Vec<_>>>()?;
    let (index, value) = argmin(&terms);
    Ok(GridExtremum { value, index })
}

/// `U^c_G(nu) = min_{mu in G} w_2^2(mu, nu) / 2 - U(mu)`.
pub fn c_transform_on_grid(u: &GridTable, nu: &DiscreteMeasure) -> Result<GridExtremum> {
    let terms = u
        .grid()
        .par_iter()
        .zip(u.values())
        .map(|(mu, v)| Ok(0.5 * solve_w2(mu, nu)?.cost - v))
        .collect::<Result<Vec<_>>>()?;
    let (index, value) = argmin(&terms);
    Ok(GridExtremum { value, index })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CTransformReport {
    /// `U^c_G(nu)` with `U = m_2^2 / 2 - phi`.
    pub c_transform: f64,
    /// `m_2^2(nu) / 2 - phi*_G(nu)`.
    pub conjugate_side: f64,
    pub holds: bool,
}

/// Compares both sides of `U^c = m_2^2 / 2 - phi*` on a grid, with
/// `U = m_2^2 / 2 - phi` tabulated from `table`.
pub fn c_transform_relation(
    table: &GridTable,
    nu: &DiscreteMeasure,
    tol: f64,
) -> Result<CTransformReport> {
    let u_values: Vec<f64> = table
        .grid()
        .iter()
        .zip(table.values())
        .map(|(mu, p)| 0.5 * second_moment(mu) - p)
        .collect();
    let u = GridTable::new(table.grid().to_vec(), u_values)?;
    let c_transform = c_transform_on_grid(&u, nu)?.value;
    let conj = conjugate_from_values(table.grid(), table.values(), nu)?.value;
    let conjugate_side = 0.5 * second_moment(nu) - conj;
    let scale = 1.0 + c_transform.abs().max(conjugate_side.abs());
    Ok(CTransformReport {
        c_transform,
        conjugate_side,
        holds: (c_transform - conjugate_side).abs() <= tol * scale,
    })
}
