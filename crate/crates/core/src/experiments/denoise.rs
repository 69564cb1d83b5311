//! Tikhonov denoising of time-varying graph signals as inverse filtering of a
//! bivariate polynomial in the vertex shift S1 = I ⊗ A and time shift S2 = B ⊗ I.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::{
    chebyshev_coeffs, gd0_solve, optimal_poly, solve_with, spectral_contraction, Approximant,
    SolveOptions, SolveTrace,
};
use crate::operator::FnMap;
use crate::polyfilter::{apply, PolyCoeffs, DENSE_CAP};
use crate::shifts::{kron_lift, JointSpectrum, Shift, ShiftFamily, Side};
use crate::sparse::Csr;

use super::config::{ExperimentConfig, Method};
use super::output::{cell, OutputDir};
use super::{kahan_mean, snr_db};

/// Which regularizers are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// (α, 0)
    Vertex,
    /// (0, β)
    Time,
    /// (α, β)
    Joint,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Vertex, Mode::Time, Mode::Joint];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Vertex => "vertex",
            Mode::Time => "time",
            Mode::Joint => "joint",
        }
    }

    pub fn zero_out(&self, alpha: f64, beta: f64) -> (f64, f64) {
        match self {
            Mode::Vertex => (alpha, 0.0),
            Mode::Time => (0.0, beta),
            Mode::Joint => (alpha, beta),
        }
    }
}

/// Where the quadratic forms in the penalty formulas come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltySource {
    /// XᵀSX + (η²/3) tr S, the expectation of BᵀSB.
    #[default]
    Truth,
    /// BᵀSB from the noisy data.
    Observations,
}

/// num / (scale · quad), or 0 when the denominator vanishes or is negative.
pub fn penalty(num: f64, quad: f64, scale: f64) -> f64 {
    if num == 0.0 {
        return 0.0;
    }
    let den = scale * quad;
    if !den.is_finite() || den <= 0.0 {
        warn!("penalty denominator {den:e} is not positive; using 0");
        return 0.0;
    }
    num / den
}

/// Product-space shifts over n vertices and m time samples, with the
/// factor eigendecompositions used for the direct solve.
pub struct DenoiseProblem {
    n: usize,
    m: usize,
    family: ShiftFamily,
    vertex_vals: DVector<f64>,
    vertex_vecs: DMatrix<f64>,
    time_vals: DVector<f64>,
    time_vecs: DMatrix<f64>,
}

impl DenoiseProblem {
    /// `vertex` is n×n and `time` m×m; both must be symmetric.
    pub fn new(vertex: Csr, time: Csr) -> Result<Self> {
        for s in [&vertex, &time] {
            if !s.is_square() || !s.is_symmetric(1e-12) {
                return Err(Error::Unsupported(
                    "denoising shifts must be square and symmetric".into(),
                ));
            }
        }
        let (n, m) = (vertex.rows(), time.rows());
        for k in [n, m] {
            if k > DENSE_CAP {
                return Err(Error::DenseCapExceeded {
                    n: k,
                    cap: DENSE_CAP,
                });
            }
        }
        let ev = SymmetricEigen::new(vertex.to_dense());
        let et = SymmetricEigen::new(time.to_dense());
        let mut pts = DMatrix::zeros(n * m, 2);
        for j in 0..m {
            for i in 0..n {
                pts[(j * n + i, 0)] = ev.eigenvalues[i];
                pts[(j * n + i, 1)] = et.eigenvalues[j];
            }
        }
        let s1 = Shift::unchecked(kron_lift(vertex, Side::Inner, m)?);
        let s2 = Shift::unchecked(kron_lift(time, Side::Outer, n)?);
        let family =
            ShiftFamily::new_unchecked(vec![s1, s2]).with_spectrum(JointSpectrum::from_points(pts));
        Ok(DenoiseProblem {
            n,
            m,
            family,
            vertex_vals: ev.eigenvalues,
            vertex_vecs: ev.eigenvectors,
            time_vals: et.eigenvalues,
            time_vecs: et.eigenvectors,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn family(&self) -> &ShiftFamily {
        &self.family
    }

    pub fn spectrum(&self) -> &JointSpectrum {
        self.family
            .cached_spectrum()
            .expect("attached at construction")
    }

    /// Extreme values of h over the joint spectrum.
    pub fn h_range(&self, h: &PolyCoeffs) -> (f64, f64) {
        let sp = self.spectrum();
        (0..sp.len())
            .map(|i| h.eval_scalar(&sp.point(i)))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// h(S1, S2)⁻¹ y through the factor eigenbases.
    pub fn direct_solve(&self, h: &PolyCoeffs, y: &[f64]) -> Result<Vec<f64>> {
        let (n, m) = (self.n, self.m);
        if y.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: y.len(),
            });
        }
        // rows are time samples
        let ymat = DMatrix::from_row_slice(m, n, y);
        let mut c = self.time_vecs.transpose() * ymat * &self.vertex_vecs;
        for j in 0..m {
            for i in 0..n {
                let hv = h.eval_scalar(&[self.vertex_vals[i], self.time_vals[j]]);
                if hv == 0.0 {
                    return Err(Error::SingularFilter {
                        points: vec![j * n + i],
                    });
                }
                c[(j, i)] /= hv;
            }
        }
        let x = &self.time_vecs * c * self.vertex_vecs.transpose();
        Ok((0..m)
            .flat_map(|j| (0..n).map(move |i| (j, i)))
            .map(|(j, i)| x[(j, i)])
            .collect())
    }

    /// tr S1 and tr S2.
    pub fn traces(&self) -> (f64, f64) {
        (
            self.m as f64 * self.vertex_vals.sum(),
            self.n as f64 * self.time_vals.sum(),
        )
    }

    /// xᵀ S1 x and xᵀ S2 x.
    pub fn quadratic_forms(&self, x: &[f64]) -> (f64, f64) {
        let q = |k: usize| {
            let y = self.family.shifts()[k]
                .operator()
                .try_apply(x)
                .expect("dims");
            x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>()
        };
        (q(0), q(1))
    }
}

/// min over a grid of [0,2]² of h; errors unless strictly positive.
pub fn pd_certificate(h: &PolyCoeffs, grid: usize) -> Result<f64> {
    let g = grid.max(2);
    let mut min = f64::INFINITY;
    for a in 0..g {
        for b in 0..g {
            let t = [
                2.0 * a as f64 / (g - 1) as f64,
                2.0 * b as f64 / (g - 1) as f64,
            ];
            min = min.min(h.eval_scalar(&t));
        }
    }
    if min > 0.0 {
        Ok(min)
    } else {
        Err(Error::NotPositiveDefinite(min))
    }
}

/// Bivariate filter of total degree one: c00 + c10 t1 + c01 t2.
pub fn affine_filter(c00: f64, c10: f64, c01: f64) -> PolyCoeffs {
    PolyCoeffs::new(vec![1, 1], vec![c00, c01, c10, 0.0]).expect("four coefficients")
}

/// A concrete filter for one (η, mode) cell of the table.
#[derive(Debug, Clone)]
pub struct CellFilter {
    pub h: PolyCoeffs,
    pub alpha: f64,
    pub beta: f64,
}

enum Prepared {
    Gd0(f64),
    Iter(Approximant),
}

fn prepare(
    problem: &DenoiseProblem,
    h: &PolyCoeffs,
    methods: &[Method],
) -> Result<Vec<(Method, Prepared, f64)>> {
    let sp = problem.spectrum();
    let (lo, hi) = problem.h_range(h);
    methods
        .iter()
        .map(|m| {
            let (p, g) = match *m {
                Method::Gd0 => {
                    let gamma = 2.0 / (lo + hi);
                    (Prepared::Gd0(gamma), Approximant::ScaledIdentity(gamma))
                }
                Method::Iopa(l) => {
                    let a = optimal_poly(h, sp, l)?.approximant();
                    (Prepared::Iter(a.clone()), a)
                }
                Method::Icpa(k) => {
                    let a = Approximant::Chebyshev(chebyshev_coeffs(
                        h,
                        k,
                        &[(0.0, 2.0), (0.0, 2.0)],
                        None,
                    )?);
                    (Prepared::Iter(a.clone()), a)
                }
                Method::Arma => {
                    return Err(Error::Unsupported("ARMA needs a univariate filter".into()))
                }
            };
            Ok((*m, p, spectral_contraction(h, &g, sp)))
        })
        .collect()
}

fn run(
    problem: &DenoiseProblem,
    h: &PolyCoeffs,
    p: &Prepared,
    y: &[f64],
    iters: usize,
) -> Result<SolveTrace> {
    let opts = SolveOptions {
        max_iter: iters,
        tol: 0.0,
        truth: None,
        keep_iterates: true,
    };
    let family = problem.family();
    match p {
        Prepared::Gd0(gamma) => {
            let hm = FnMap::new(y.len(), |x: &[f64]| {
                apply(h, family, x).expect("dims checked")
            });
            Ok(gd0_solve(&hm, y, *gamma, &opts))
        }
        Prepared::Iter(g) => solve_with(h, g, family, y, &opts),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SnrRow {
    pub eta: f64,
    pub mode: Mode,
    pub method: String,
    pub alpha: f64,
    pub beta: f64,
    /// max over the spectrum of |1 − g h|.
    pub contraction: f64,
    pub isnr: f64,
    /// Mean SNR(m) at each report iteration.
    pub snr: Vec<f64>,
    pub snr_inf: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DenoiseReport {
    pub report_iterations: Vec<usize>,
    pub rows: Vec<SnrRow>,
}

impl DenoiseReport {
    pub fn row(&self, eta: f64, mode: Mode, method: &str) -> Option<&SnrRow> {
        self.rows
            .iter()
            .find(|r| r.eta == eta && r.mode == mode && r.method == method)
    }

    pub fn write(
        &self,
        cfg: &ExperimentConfig,
        out: &OutputDir,
        extra: serde_json::Value,
    ) -> Result<()> {
        let mut header: Vec<String> = [
            "eta",
            "mode",
            "method",
            "alpha",
            "beta",
            "contraction",
            "isnr",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(self.report_iterations.iter().map(|m| format!("snr_{m}")));
        header.push("snr_inf".into());
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![
                    r.eta.to_string(),
                    r.mode.name().to_string(),
                    r.method.clone(),
                    cell(r.alpha),
                    cell(r.beta),
                    cell(r.contraction),
                    format!("{:.4}", r.isnr),
                ];
                v.extend(r.snr.iter().map(|s| format!("{s:.4}")));
                v.push(format!("{:.4}", r.snr_inf));
                v
            })
            .collect();
        out.write_csv("table.csv", &header, &rows)?;
        out.write_meta(cfg, &extra)
    }
}

/// Runs every (η, mode, method) cell over `cfg.trials` noise draws.
/// `filter_for(eta, mode, observations)` builds the regularized filter.
/// Filter used, SNR per method and reported iteration, SNR of the direct
/// solve, contraction per method.
type TrialResult = (CellFilter, Vec<Vec<f64>>, f64, Vec<f64>);

pub fn run_denoise<F>(
    problem: &DenoiseProblem,
    truth: &[f64],
    cfg: &ExperimentConfig,
    filter_for: F,
) -> Result<DenoiseReport>
where
    F: Fn(f64, Mode, &[f64]) -> Result<CellFilter> + Sync,
{
    cfg.validate()?;
    let methods: Vec<Method> = cfg
        .methods
        .iter()
        .map(|s| Method::parse(s))
        .collect::<Result<_>>()?;
    let iters = cfg
        .report_iterations
        .iter()
        .copied()
        .max()
        .unwrap_or(1)
        .max(1);
    let mut rows = Vec::new();
    for (ei, &eta) in cfg.eta.iter().enumerate() {
        let noisy: Vec<Vec<f64>> = (0..cfg.trials)
            .map(|t| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add((ei * 100_003 + t) as u64));
                truth
                    .iter()
                    .map(|x| {
                        if eta > 0.0 {
                            x + rng.random_range(-eta..=eta)
                        } else {
                            *x
                        }
                    })
                    .collect()
            })
            .collect();
        let isnr = kahan_mean(&noisy.iter().map(|y| snr_db(y, truth)).collect::<Vec<_>>());
        for mode in Mode::ALL {
            // per-trial filters only differ when penalties come from observations
            let per_trial = cfg.penalties == PenaltySource::Observations;
            let shared = if per_trial {
                None
            } else {
                Some(filter_for(eta, mode, &noisy[0])?)
            };
            let results: Vec<TrialResult> = noisy
                .par_iter()
                .map(|y| {
                    let f = match &shared {
                        Some(f) => f.clone(),
                        None => filter_for(eta, mode, y)?,
                    };
                    pd_certificate(&f.h, 201)?;
                    let prepared = prepare(problem, &f.h, &methods)?;
                    let xinf = problem.direct_solve(&f.h, y)?;
                    let snr_inf = snr_db(&xinf, truth);
                    let mut snrs = Vec::new();
                    let mut contr = Vec::new();
                    for (_, p, c) in &prepared {
                        let tr = run(problem, &f.h, p, y, iters)?;
                        snrs.push(
                            cfg.report_iterations
                                .iter()
                                .map(|&m| snr_db(&tr.iterates[m.min(tr.iterations)], truth))
                                .collect(),
                        );
                        contr.push(*c);
                    }
                    Ok((f, snrs, snr_inf, contr))
                })
                .collect::<Result<_>>()?;
            let snr_inf = kahan_mean(&results.iter().map(|r| r.2).collect::<Vec<_>>());
            for (k, m) in methods.iter().enumerate() {
                let snr = (0..cfg.report_iterations.len())
                    .map(|i| kahan_mean(&results.iter().map(|r| r.1[k][i]).collect::<Vec<_>>()))
                    .collect();
                rows.push(SnrRow {
                    eta,
                    mode,
                    method: m.name(),
                    alpha: kahan_mean(&results.iter().map(|r| r.0.alpha).collect::<Vec<_>>()),
                    beta: kahan_mean(&results.iter().map(|r| r.0.beta).collect::<Vec<_>>()),
                    contraction: results.iter().map(|r| r.3[k]).fold(0.0, f64::max),
                    isnr,
                    snr,
                    snr_inf,
                });
            }
        }
    }
    Ok(DenoiseReport {
        report_iterations: cfg.report_iterations.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_circulant, build_path};
    use crate::polyfilter::materialize;

    fn small() -> DenoiseProblem {
        let g = build_circulant(9, &[1, 2]).unwrap();
        let t = build_path(4).unwrap().laplacian().scale(0.5);
        DenoiseProblem::new(g.sym_normalized_laplacian().unwrap(), t).unwrap()
    }

    #[test]
    fn direct_solve_matches_dense_inverse() {
        let p = small();
        let h = affine_filter(1.0, 0.3, 2.0);
        let y: Vec<f64> = (0..36).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let x = p.direct_solve(&h, &y).unwrap();
        let hm = materialize(&h, p.family()).unwrap();
        let back = hm * DVector::from_column_slice(&x);
        for (a, b) in back.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn certificate_rejects_indefinite() {
        assert!(pd_certificate(&affine_filter(1.0, 0.5, 0.5), 11).unwrap() > 0.99);
        assert!(matches!(
            pd_certificate(&affine_filter(0.5, -1.0, 0.0), 11),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn penalty_guards() {
        assert_eq!(penalty(0.0, 0.0, 1.0), 0.0);
        assert_eq!(penalty(1.0, -1.0, 1.0), 0.0);
        assert_eq!(penalty(1.0, 4.0, 2.0), 0.125);
    }
}
