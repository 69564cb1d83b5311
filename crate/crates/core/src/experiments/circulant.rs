//! Inverse filtering of h(L_sym) on a circulant graph: error decay, fitted
//! rates and iterations to tolerance for every method.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::build_circulant;
use crate::inverse::{
    arma_solve, cheb_sup_error, chebyshev_coeffs, fit_rate, gd0_solve, optimal_poly, solve_with,
    spectral_contraction, Approximant, SolveOptions, SolveTrace,
};
use crate::operator::{FnMap, Operator};
use crate::polyfilter::{apply, apply_single, PolyCoeffs};
use crate::shifts::{circulant_laplacian_spectrum, validate_shift, ShiftFamily};

use super::config::{ExperimentConfig, Method};
use super::kahan_mean;
use super::output::{cell, opt_cell, OutputDir};

#[derive(Debug, Clone, Serialize)]
pub struct MethodRow {
    pub name: String,
    /// Mean E(m, x) for m = 1..=iterations.
    pub mean_errors: Vec<f64>,
    pub mean_residuals: Vec<f64>,
    /// Rate fitted to the mean error curve.
    pub rate: Option<f64>,
    /// Mean of the per-trial fitted rates.
    pub trial_rate_mean: Option<f64>,
    pub iterations_to_tol: Option<usize>,
    pub diverged_trials: usize,
    pub diverged: bool,
    /// a_L, b_K, or the spectral contraction of the approximant.
    pub approx_error: Option<f64>,
    pub mean_wallclock_us: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CirculantReport {
    pub n: usize,
    pub generators: Vec<usize>,
    pub trials: usize,
    pub iterations: usize,
    /// Extreme values of h over the spectrum.
    pub alpha1: f64,
    pub alpha2: f64,
    pub rows: Vec<MethodRow>,
}

impl CirculantReport {
    pub fn row(&self, name: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

enum Prepared {
    Arma { norm: f64 },
    Gd0 { gamma: f64 },
    Iter(Approximant),
}

struct PreparedMethod {
    name: String,
    how: Prepared,
    approx_error: Option<f64>,
}

fn prepare(
    cfg: &ExperimentConfig,
    h: &PolyCoeffs,
    family: &ShiftFamily,
) -> Result<(Vec<PreparedMethod>, f64, f64)> {
    let sp = family.spectrum()?;
    let hv: Vec<f64> = (0..sp.len()).map(|i| h.eval_scalar(&sp.point(i))).collect();
    let a1 = hv.iter().copied().fold(f64::INFINITY, f64::min);
    let a2 = hv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rho = sp.points().amax();
    let mut out = Vec::new();
    for name in &cfg.methods {
        let m = Method::parse(name)?;
        let p = match m {
            Method::Arma => PreparedMethod {
                name: m.name(),
                how: Prepared::Arma { norm: rho },
                approx_error: None,
            },
            Method::Gd0 => {
                let gamma = 2.0 / (a1 + a2);
                let c = spectral_contraction(h, &Approximant::ScaledIdentity(gamma), sp);
                PreparedMethod {
                    name: m.name(),
                    how: Prepared::Gd0 { gamma },
                    approx_error: Some(c),
                }
            }
            Method::Iopa(l) => {
                let fit = optimal_poly(h, sp, l)?;
                PreparedMethod {
                    name: m.name(),
                    how: Prepared::Iter(fit.approximant()),
                    approx_error: Some(fit.a),
                }
            }
            Method::Icpa(k) => {
                let c = chebyshev_coeffs(h, k, &[(0.0, 2.0)], None)?;
                let bk = cheb_sup_error(h, &c, None);
                PreparedMethod {
                    name: m.name(),
                    how: Prepared::Iter(Approximant::Chebyshev(c)),
                    approx_error: Some(bk),
                }
            }
        };
        out.push(p);
    }
    Ok((out, a1, a2))
}

fn run_one(
    p: &PreparedMethod,
    h: &PolyCoeffs,
    family: &ShiftFamily,
    b: &[f64],
    opts: &SolveOptions,
) -> Result<SolveTrace> {
    match &p.how {
        Prepared::Arma { norm } => {
            let coeffs = h
                .as_univariate()
                .ok_or_else(|| Error::Unsupported("ARMA needs a univariate filter".into()))?;
            arma_solve(coeffs, &family.shifts()[0], b, Some(*norm), opts)
        }
        Prepared::Gd0 { gamma } => {
            let hm = FnMap::new(b.len(), |x: &[f64]| {
                apply(h, family, x).expect("dims checked")
            });
            Ok(gd0_solve(&hm, b, *gamma, opts))
        }
        Prepared::Iter(g) => solve_with(h, g, family, b, opts),
    }
}

fn padded(v: &[f64], len: usize) -> Vec<f64> {
    let last = *v.last().unwrap_or(&f64::NAN);
    (0..len).map(|i| *v.get(i).unwrap_or(&last)).collect()
}

/// The single shift L_sym(C(N, Q)) with its analytic spectrum attached.
pub fn circulant_lsym_family(n: usize, generators: &[usize]) -> Result<ShiftFamily> {
    let g = build_circulant(n, generators)?;
    let s = validate_shift(Operator::Sparse(g.sym_normalized_laplacian()?), &g)?;
    Ok(ShiftFamily::new_unchecked(vec![s])
        .with_spectrum(circulant_laplacian_spectrum(n, generators)))
}

pub fn exp_circulant(cfg: &ExperimentConfig) -> Result<CirculantReport> {
    cfg.validate()?;
    let family = circulant_lsym_family(cfg.n, &cfg.generators)?;
    let h = PolyCoeffs::univariate(cfg.filter.clone());
    let (methods, alpha1, alpha2) = prepare(cfg, &h, &family)?;
    let m_iter = cfg.iterations;
    let trials: Vec<Vec<SolveTrace>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(t as u64));
            let x: Vec<f64> = (0..cfg.n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let b = apply_single(h.coeffs(), &family.shifts()[0], &x);
            let opts = SolveOptions::fixed(m_iter).with_truth(x);
            methods
                .iter()
                .map(|p| run_one(p, &h, &family, &b, &opts))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (k, p) in methods.iter().enumerate() {
        let errs: Vec<Vec<f64>> = trials
            .iter()
            .map(|tr| padded(&tr[k].rel_errors[1..], m_iter))
            .collect();
        let res: Vec<Vec<f64>> = trials
            .iter()
            .map(|tr| {
                let r0 = tr[k].residuals[0];
                padded(
                    &tr[k].residuals[1..]
                        .iter()
                        .map(|r| r / r0)
                        .collect::<Vec<_>>(),
                    m_iter,
                )
            })
            .collect();
        let column_mean = |data: &[Vec<f64>], m: usize| {
            kahan_mean(&data.iter().map(|e| e[m]).collect::<Vec<_>>())
        };
        let mean_errors: Vec<f64> = (0..m_iter).map(|m| column_mean(&errs, m)).collect();
        let mean_residuals: Vec<f64> = (0..m_iter).map(|m| column_mean(&res, m)).collect();
        let diverged_trials = trials.iter().filter(|tr| tr[k].diverged).count();
        let trial_rates: Vec<f64> = trials
            .iter()
            .filter_map(|tr| fit_rate(&tr[k].rel_errors[1..]).ok())
            .collect();
        let wall = kahan_mean(
            &trials
                .iter()
                .map(|tr| *tr[k].wallclock_us.last().unwrap() as f64)
                .collect::<Vec<_>>(),
        );
        rows.push(MethodRow {
            name: p.name.clone(),
            rate: fit_rate(&mean_errors).ok(),
            trial_rate_mean: (!trial_rates.is_empty()).then(|| kahan_mean(&trial_rates)),
            iterations_to_tol: mean_errors
                .iter()
                .position(|e| *e <= cfg.tolerance)
                .map(|m| m + 1),
            diverged: 2 * diverged_trials > cfg.trials,
            diverged_trials,
            approx_error: p.approx_error,
            mean_wallclock_us: wall,
            mean_errors,
            mean_residuals,
        });
    }
    Ok(CirculantReport {
        n: cfg.n,
        generators: cfg.generators.clone(),
        trials: cfg.trials,
        iterations: m_iter,
        alpha1,
        alpha2,
        rows,
    })
}

/// table.csv, rates.csv, trace_<method>.csv and meta.json.
pub fn write_report(
    report: &CirculantReport,
    cfg: &ExperimentConfig,
    out: &OutputDir,
) -> Result<()> {
    let mut header = vec!["method".to_string()];
    header.extend((1..=report.iterations).map(|m| format!("E{m}")));
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            std::iter::once(r.name.clone())
                .chain(r.mean_errors.iter().map(|e| cell(*e)))
                .collect()
        })
        .collect();
    out.write_csv("table.csv", &header, &rows)?;
    let header: Vec<String> = [
        "method",
        "rate",
        "trial_rate_mean",
        "approx_error",
        "iterations_to_tol",
        "diverged_trials",
        "diverged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.rate.map_or(String::new(), cell),
                r.trial_rate_mean.map_or(String::new(), cell),
                r.approx_error.map_or(String::new(), cell),
                opt_cell(r.iterations_to_tol),
                r.diverged_trials.to_string(),
                r.diverged.to_string(),
            ]
        })
        .collect();
    out.write_csv("rates.csv", &header, &rows)?;
    for r in &report.rows {
        let header: Vec<String> = ["m", "residual", "rel_error"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows: Vec<Vec<String>> = (0..report.iterations)
            .map(|m| {
                vec![
                    (m + 1).to_string(),
                    cell(r.mean_residuals[m]),
                    cell(r.mean_errors[m]),
                ]
            })
            .collect();
        out.write_csv(&format!("trace_{}.csv", r.name), &header, &rows)?;
    }
    // timings vary between runs, so they stay out of the CSVs
    let wall: serde_json::Map<String, serde_json::Value> = report
        .rows
        .iter()
        .map(|r| (r.name.clone(), r.mean_wallclock_us.into()))
        .collect();
    out.write_meta(
        cfg,
        &serde_json::json!({
            "alpha1": report.alpha1,
            "alpha2": report.alpha2,
            "filter": cfg.filter,
            "mean_wallclock_us": wall,
        }),
    )
}
