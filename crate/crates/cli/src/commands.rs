//! The subcommands; each returns its JSON report and exit status.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use wow_core::lggrm::{
    atomless_diagnostic, berman_integral_estimate, hurst_flag, sub_seed, walsh_criterion,
    walsh_level_amplitudes, Basis, GaussianSpec, HurstFlag, RegularityReport, Sampler,
};
use wow_core::measure::{second_moment, DiscreteMeasure, Point};
use wow_core::nested::{
    big_moment, extract_monge, lift_to_random_coupling, nested_mc, nested_w2, random_coupling_cost,
    verify_geodesic, CouplingOfLaws, GeodesicReport, MongeMap, RandomCouplingLaw, RandomLaw,
};
use wow_core::ot::{solve_mc, solve_w2};
use wow_core::Error;

use crate::args::{Cli, Command};
use crate::error::{CliError, ExitStatus};
use crate::suites;

pub const OT_TOL: f64 = 1e-9;
pub const NESTED_TOL: f64 = 1e-7;

pub fn dispatch(cli: &Cli) -> Result<(Value, ExitStatus), CliError> {
    match &cli.command {
        Command::Ot { mu, nu, csv } => {
            finish(ot(mu, nu, cli.tol.unwrap_or(OT_TOL), csv.as_deref())?)
        }
        Command::Nested {
            m,
            n,
            geodesic_ts,
            extract_monge,
            csv,
        } => finish(nested(
            m,
            n,
            geodesic_ts.as_deref(),
            *extract_monge,
            cli.tol.unwrap_or(NESTED_TOL),
            csv.as_deref(),
        )?),
        Command::Lggrm {
            spec,
            samples,
            berman_samples,
            eps,
            law_out,
            csv,
        } => finish(lggrm(
            spec,
            cli.seed,
            *samples,
            *berman_samples,
            eps,
            law_out.as_deref(),
            csv.as_deref(),
        )?),
        Command::Verify { suite, cases, csv } => {
            let report = suites::run(suite, cli.seed.unwrap_or(0), *cases, cli.tol)?;
            if let Some(path) = csv {
                let rows = report.invariants.iter().map(|c| {
                    vec![
                        c.name.clone(),
                        c.passed.to_string(),
                        c.failed.to_string(),
                        c.skipped.to_string(),
                    ]
                });
                write_csv(path, &["invariant", "passed", "failed", "skipped"], rows)?;
            }
            let pass = report.passed;
            Ok((to_value(&report)?, ExitStatus::from_pass(pass)))
        }
    }
}

fn finish<T: Serialize>((report, pass): (T, bool)) -> Result<(Value, ExitStatus), CliError> {
    Ok((to_value(&report)?, ExitStatus::from_pass(pass)))
}

fn to_value<T: Serialize>(report: &T) -> Result<Value, CliError> {
    serde_json::to_value(report).map_err(|e| CliError::solver(e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn coord_header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

fn coords(p: &Point) -> impl Iterator<Item = String> + '_ {
    p.coords().iter().map(|c| c.to_string())
}

#[derive(Serialize)]
pub struct PlanEntry {
    pub x: Point,
    pub y: Point,
    pub weight: f64,
}

#[derive(Serialize)]
pub struct Duals {
    /// Potentials on the atoms of `mu` with `u_i + v_j <= |x_i - y_j|^2`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub objective: f64,
}

#[derive(Serialize)]
pub struct OtReport {
    pub command: &'static str,
    pub tol: f64,
    pub cost_w2sq: f64,
    pub cost_mc: f64,
    pub m2sq_mu: f64,
    pub m2sq_nu: f64,
    /// `|w_2^2 - (m_2^2(mu) + m_2^2(nu) - 2 <mu, nu>)|`.
    pub decomposition_residual: f64,
    pub decomposition_ok: bool,
    pub plan: Vec<PlanEntry>,
    pub duals: Duals,
}

pub fn ot(
    mu: &Path,
    nu: &Path,
    tol: f64,
    csv: Option<&Path>,
) -> Result<(OtReport, bool), CliError> {
    let mu: DiscreteMeasure = read_json(mu)?;
    let nu: DiscreteMeasure = read_json(nu)?;
    let w2 = solve_w2(&mu, &nu)?;
    let mc = solve_mc(&mu, &nu)?;
    let (a, b) = (second_moment(&mu), second_moment(&nu));
    let residual = (w2.cost - (a + b - 2.0 * mc.cost)).abs();
    let ok = residual <= tol * (1.0 + a + b);
    if let Some(path) = csv {
        let d = mu.dim();
        let mut header = coord_header("x", d);
        header.extend(coord_header("y", d));
        header.push("weight".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = w2
            .plan
            .iter()
            .map(|(x, y, w)| coords(x).chain(coords(y)).chain([w.to_string()]).collect());
        write_csv(path, &header, rows)?;
    }
    let report = OtReport {
        command: "ot",
        tol,
        cost_w2sq: w2.cost,
        cost_mc: mc.cost,
        m2sq_mu: a,
        m2sq_nu: b,
        decomposition_residual: residual,
        decomposition_ok: ok,
        plan: w2
            .plan
            .iter()
            .map(|(x, y, weight)| PlanEntry {
                x: x.clone(),
                y: y.clone(),
                weight,
            })
            .collect(),
        duals: Duals {
            objective: w2.dual_objective(&mu, &nu),
            u: w2.dual_u,
            v: w2.dual_v,
        },
    };
    Ok((report, ok))
}

#[derive(Serialize)]
pub struct NestedReport {
    pub command: &'static str,
    pub tol: f64,
    /// `W_2^2(M, N)`.
    pub w2sq: f64,
    /// `[[M, N]]`.
    pub pairing: f64,
    pub big_moment_m: f64,
    pub big_moment_n: f64,
    pub decomposition_residual: f64,
    pub decomposition_ok: bool,
    pub outer_coupling: CouplingOfLaws,
    pub random_coupling: RandomCouplingLaw,
    pub random_coupling_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geodesic: Option<GeodesicReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monge: Option<MongeMap>,
    pub warnings: Vec<String>,
}

pub fn nested(
    m: &Path,
    n: &Path,
    ts: Option<&[f64]>,
    monge: bool,
    tol: f64,
    csv: Option<&Path>,
) -> Result<(NestedReport, bool), CliError> {
    let m: RandomLaw = read_json(m)?;
    let n: RandomLaw = read_json(n)?;
    let w2 = nested_w2(&m, &n)?;
    let mc = nested_mc(&m, &n)?;
    let (a, b) = (big_moment(&m), big_moment(&n));
    let residual = (w2.value - (a + b - 2.0 * mc.value)).abs();
    let decomposition_ok = residual <= tol * (1.0 + a + b);
    let p = lift_to_random_coupling(&m, &n, &w2.coupling)?;
    let geodesic = ts.map(|ts| verify_geodesic(&p, ts)).transpose()?;
    let geodesic_ok = geodesic.as_ref().is_none_or(|g| g.max_residual <= tol);
    let mut warnings = Vec::new();
    let monge = if monge {
        match extract_monge(&m, &n, &w2.coupling, &p) {
            Ok(map) => Some(map),
            Err(
                e @ (Error::NonDeterministicOuter { .. } | Error::NonDeterministicInner { .. }),
            ) => {
                warnings.push(e.to_string());
                None
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    if let Some(path) = csv {
        let rows = w2
            .coupling
            .pairs()
            .iter()
            .zip(w2.coupling.weights())
            .map(|(&(k, l), w)| vec![k.to_string(), l.to_string(), w.to_string()]);
        write_csv(path, &["atom_m", "atom_n", "weight"], rows)?;
    }
    let report = NestedReport {
        command: "nested",
        tol,
        w2sq: w2.value,
        pairing: mc.value,
        big_moment_m: a,
        big_moment_n: b,
        decomposition_residual: residual,
        decomposition_ok,
        random_coupling_cost: random_coupling_cost(&p),
        outer_coupling: w2.coupling,
        random_coupling: p,
        geodesic,
        monge,
        warnings,
    };
    Ok((report, decomposition_ok && geodesic_ok))
}

#[derive(Serialize)]
pub struct LggrmReport {
    pub command: &'static str,
    pub seed: u64,
    pub samples: usize,
    pub spec: GaussianSpec,
    /// Sum of the squared retained scales, when the basis is explicit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_sum: Option<f64>,
    /// Sample mean of `m_2^2` over the sampled atoms.
    pub big_moment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walsh: Option<RegularityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub berman: Option<RegularityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hurst: Option<HurstFlag>,
    /// `(eps, diagonal mass)` pairs.
    pub atomless: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
    pub law: RandomLaw,
}

pub fn lggrm(
    spec: &Path,
    seed: Option<u64>,
    samples: usize,
    berman_samples: usize,
    eps: &[f64],
    law_out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(LggrmReport, bool), CliError> {
    let spec: GaussianSpec = read_json(spec)?;
    let seed = seed.unwrap_or(spec.seed);
    let sampler = Sampler::new(&spec)?;
    let law = sampler.sample_law(samples, seed)?;
    let mut warnings = Vec::new();
    let walsh = match &spec.basis {
        Basis::Walsh { scales, .. } => {
            match walsh_criterion(&walsh_level_amplitudes(scales), spec.dim) {
                Ok(r) => Some(r),
                Err(e) => {
                    warnings.push(format!("walsh criterion not applicable: {e}"));
                    None
                }
            }
        }
        _ => None,
    };
    // The Berman probe draws from a stream disjoint from the path sub-seeds.
    let berman = match berman_integral_estimate(&spec, berman_samples, sub_seed(seed, u64::MAX)) {
        Ok(r) => Some(r),
        Err(e @ (Error::DegenerateBasis | Error::InvalidParameter(_))) => {
            warnings.push(format!("berman estimate not applicable: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let hurst = match spec.basis {
        Basis::FractionalBm { hurst } => Some(hurst_flag(hurst, spec.dim)),
        _ => None,
    };
    let atomless = atomless_diagnostic(&law, eps)?;
    if let Some(path) = law_out {
        let text =
            serde_json::to_string_pretty(&law).map_err(|e| CliError::solver(e.to_string()))?;
        std::fs::write(path, text + "\n")
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = csv {
        let mut header = vec!["atom".to_string(), "atom_weight".to_string()];
        header.extend(coord_header("x", spec.dim));
        header.push("weight".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = law.iter().enumerate().flat_map(|(k, (mu, wk))| {
            mu.iter()
                .map(move |(x, w)| {
                    [k.to_string(), wk.to_string()]
                        .into_iter()
                        .chain(coords(x))
                        .chain([w.to_string()])
                        .collect()
                })
                .collect::<Vec<Vec<String>>>()
        });
        write_csv(path, &header, rows)?;
    }
    let report = LggrmReport {
        command: "lggrm",
        seed,
        samples,
        scale_sum: spec.scale_sum(),
        big_moment: big_moment(&law),
        spec,
        walsh,
        berman,
        hurst,
        atomless,
        warnings,
        law,
    };
    Ok((report, true))
}
