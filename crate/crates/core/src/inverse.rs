//! Inverse filtering: x = H⁻¹ b computed by iterating an approximate inverse.
//!
//! Every method here is an instance of z = G e, e ← e − H z, x ← x + z with
//! a different approximant G (scaled identity, minimax polynomial, Chebyshev
//! partial sum), plus gradient descent and the partial-fraction ARMA scheme.

use std::io::Write;
use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lp::minimax_fit;
use crate::operator::{axpy, norm2, LinearMap};
use crate::polyfilter::{
    apply_cheb_ops, apply_ops, apply_single, cheb_to_monomial, multi_indices, ChebCoeffs,
    PolyCoeffs, CHEB_MONOMIAL_CAP,
};
use crate::shifts::{JointSpectrum, ShiftFamily, Transform};

/// Divergence is declared once ‖e^(m)‖ exceeds this multiple of ‖b‖.
pub const DIVERGENCE_FACTOR: f64 = 10.0;
/// Consecutive residual increases that mark a non-converged run as divergent.
pub const GROWTH_RUN: usize = 3;
/// Errors at or below this are treated as floating-point noise by [`fit_rate`].
pub const RATE_FLOOR: f64 = 1e-12;

/// An approximation G ≈ H⁻¹ that can be applied as a filter.
#[derive(Debug, Clone)]
pub enum Approximant {
    ScaledIdentity(f64),
    Polynomial(PolyCoeffs),
    Chebyshev(ChebCoeffs),
    /// Per-spectrum-point multiplier values in the family's joint eigenbasis.
    SpectralValues {
        values: Vec<f64>,
        basis: Option<DMatrix<f64>>,
    },
}

#[derive(Debug, Clone)]
pub struct TaggedApproximant {
    pub tag: String,
    pub g: Approximant,
}

impl Approximant {
    /// g at spectrum point `i` with coordinates `t`.
    pub fn eval_at(&self, i: usize, t: &[f64]) -> f64 {
        match self {
            Approximant::ScaledIdentity(g) => *g,
            Approximant::Polynomial(p) => p.eval_scalar(t),
            Approximant::Chebyshev(c) => c.eval_scalar(t),
            Approximant::SpectralValues { values, .. } => values[i],
        }
    }

    pub fn apply(&self, shifts: &[&dyn LinearMap], x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Approximant::ScaledIdentity(g) => Ok(x.iter().map(|v| g * v).collect()),
            Approximant::Polynomial(p) => Ok(apply_ops(p, shifts, x)?.0),
            Approximant::Chebyshev(c) => Ok(apply_cheb_ops(c, shifts, x)?.0),
            Approximant::SpectralValues { values, basis } => {
                let v = basis.as_ref().ok_or_else(|| {
                    Error::Unsupported("spectral values without an eigenbasis".into())
                })?;
                if v.nrows() != x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: v.nrows(),
                        got: x.len(),
                    });
                }
                let xh = v.transpose() * DVector::from_column_slice(x);
                let yh = DVector::from_fn(xh.len(), |i, _| values[i] * xh[i]);
                Ok((v * yh).iter().copied().collect())
            }
        }
    }
}

fn family_ops(family: &ShiftFamily) -> Vec<&dyn LinearMap> {
    family
        .shifts()
        .iter()
        .map(|s| s as &dyn LinearMap)
        .collect()
}

/// Stopping and recording options shared by all solvers.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Stop once ‖e^(m)‖/‖b‖ ≤ tol. Zero runs all `max_iter` iterations.
    pub tol: f64,
    /// Ground truth for E(m, x) = ‖x^(m) − x‖/‖x‖.
    pub truth: Option<Vec<f64>>,
    pub keep_iterates: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 100,
            tol: 1e-10,
            truth: None,
            keep_iterates: false,
        }
    }
}

impl SolveOptions {
    pub fn fixed(max_iter: usize) -> Self {
        SolveOptions {
            max_iter,
            tol: 0.0,
            ..Default::default()
        }
    }

    pub fn with_truth(mut self, truth: Vec<f64>) -> Self {
        self.truth = Some(truth);
        self
    }
}

/// Record of one solve. Index m of every per-iteration vector is iteration m,
/// starting from the zero initial guess at m = 0.
#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub residuals: Vec<f64>,
    pub rel_errors: Vec<f64>,
    pub wallclock_us: Vec<u128>,
    pub iterates: Vec<Vec<f64>>,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

impl SolveTrace {
    /// Least-squares rate of the recorded relative errors (or residuals
    /// when no truth was given).
    pub fn rate(&self) -> Result<f64> {
        if self.rel_errors.is_empty() {
            let b = self.residuals[0];
            fit_rate(
                &self.residuals[1..]
                    .iter()
                    .map(|r| r / b)
                    .collect::<Vec<_>>(),
            )
        } else {
            fit_rate(&self.rel_errors[1..])
        }
    }

    /// Writes "m,residual,rel_error,wallclock_us".
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["m", "residual", "rel_error", "wallclock_us"])?;
        for m in 0..self.residuals.len() {
            let e = self
                .rel_errors
                .get(m)
                .map_or(String::new(), |v| format!("{v:.10e}"));
            let t = self
                .wallclock_us
                .get(m)
                .map_or(String::new(), |v| v.to_string());
            wr.write_record([m.to_string(), format!("{:.10e}", self.residuals[m]), e, t])?;
        }
        wr.flush()?;
        Ok(())
    }
}

struct Recorder<'a> {
    opts: &'a SolveOptions,
    trace: SolveTrace,
    bnorm: f64,
    xnorm: f64,
    start: Instant,
}

impl<'a> Recorder<'a> {
    fn new(opts: &'a SolveOptions, b: &[f64]) -> Self {
        let bnorm = norm2(b);
        let xnorm = opts.truth.as_ref().map_or(0.0, |t| norm2(t));
        Recorder {
            opts,
            trace: SolveTrace::default(),
            bnorm,
            xnorm,
            start: Instant::now(),
        }
    }

    /// Records iteration state; returns true when the loop should stop.
    fn push(&mut self, x: &[f64], enorm: f64) -> bool {
        let tr = &mut self.trace;
        tr.residuals.push(enorm);
        tr.wallclock_us.push(self.start.elapsed().as_micros());
        if let Some(t) = &self.opts.truth {
            let d: f64 = x
                .iter()
                .zip(t)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            tr.rel_errors
                .push(if self.xnorm > 0.0 { d / self.xnorm } else { d });
        }
        if self.opts.keep_iterates {
            tr.iterates.push(x.to_vec());
        }
        let m = tr.residuals.len() - 1;
        tr.iterations = m;
        if !enorm.is_finite() || enorm > DIVERGENCE_FACTOR * self.bnorm {
            tr.diverged = true;
            return true;
        }
        if enorm <= self.opts.tol * self.bnorm {
            tr.converged = true;
            return true;
        }
        m >= self.opts.max_iter
    }

    fn finish(mut self, x: Vec<f64>) -> SolveTrace {
        let r = &self.trace.residuals;
        if !self.trace.converged && !self.trace.diverged && r.len() > GROWTH_RUN {
            let tail = &r[r.len() - GROWTH_RUN - 1..];
            if tail.windows(2).all(|w| w[1] > w[0]) {
                self.trace.diverged = true;
            }
        }
        if self.trace.diverged {
            debug!(
                "solve flagged divergent after {} iterations",
                self.trace.iterations
            );
        }
        self.trace.x = x;
        self.trace
    }
}

/// z = G e, e ← e − H z, x ← x + z from e⁰ = b, x⁰ = 0.
pub fn iterative_approx(
    h: &dyn LinearMap,
    g: &dyn LinearMap,
    b: &[f64],
    opts: &SolveOptions,
) -> SolveTrace {
    let n = b.len();
    let mut rec = Recorder::new(opts, b);
    let mut x = vec![0.0; n];
    let mut e = b.to_vec();
    let mut z = vec![0.0; n];
    let mut hz = vec![0.0; n];
    if rec.push(&x, norm2(&e)) {
        return rec.finish(x);
    }
    loop {
        g.apply_into(&e, &mut z);
        h.apply_into(&z, &mut hz);
        axpy(-1.0, &hz, &mut e);
        axpy(1.0, &z, &mut x);
        if rec.push(&x, norm2(&e)) {
            break;
        }
    }
    rec.finish(x)
}

/// x ← x − γ(H x − b) from x⁰ = 0.
pub fn gd0_solve(h: &dyn LinearMap, b: &[f64], gamma: f64, opts: &SolveOptions) -> SolveTrace {
    let n = b.len();
    let mut rec = Recorder::new(opts, b);
    let mut x = vec![0.0; n];
    let mut hx = vec![0.0; n];
    let mut r = b.to_vec();
    if rec.push(&x, norm2(&r)) {
        return rec.finish(x);
    }
    loop {
        for i in 0..n {
            x[i] += gamma * r[i];
        }
        h.apply_into(&x, &mut hx);
        for i in 0..n {
            r[i] = b[i] - hx[i];
        }
        if rec.push(&x, norm2(&r)) {
            break;
        }
    }
    rec.finish(x)
}

/// Least-squares slope of log E(m) against m over the longest leading run
/// with E(m) > 1e−12, returned as the ratio r̂ = exp(slope). `errors[0]` is
/// taken as iteration 1.
pub fn fit_rate(errors: &[f64]) -> Result<f64> {
    let k = errors
        .iter()
        .position(|&e| e.is_nan() || e <= RATE_FLOOR)
        .unwrap_or(errors.len());
    if k < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: k });
    }
    let ms: Vec<f64> = (1..=k).map(|m| m as f64).collect();
    let ls: Vec<f64> = errors[..k].iter().map(|e| e.ln()).collect();
    let mbar = ms.iter().sum::<f64>() / k as f64;
    let lbar = ls.iter().sum::<f64>() / k as f64;
    let num: f64 = ms
        .iter()
        .zip(&ls)
        .map(|(m, l)| (m - mbar) * (l - lbar))
        .sum();
    let den: f64 = ms.iter().map(|m| (m - mbar) * (m - mbar)).sum();
    Ok((num / den).exp())
}

fn real_points(spectrum: &JointSpectrum) -> Result<()> {
    if !spectrum.is_real() {
        return Err(Error::Unsupported("complex joint spectrum".into()));
    }
    Ok(())
}

/// sup_i |1 − h(λ_i) g(λ_i)|.
pub fn spectral_contraction(h: &PolyCoeffs, g: &Approximant, spectrum: &JointSpectrum) -> f64 {
    (0..spectrum.len())
        .map(|i| {
            let t = spectrum.point(i);
            (1.0 - h.eval_scalar(&t) * g.eval_at(i, &t)).abs()
        })
        .fold(0.0, f64::max)
}

/// Multiplier values 1/h(λ_i); with an orthogonal joint eigenbasis this is
/// exactly H⁻¹.
pub fn interpolation_inverse(h: &PolyCoeffs, spectrum: &JointSpectrum) -> Result<Approximant> {
    real_points(spectrum)?;
    let vals: Vec<f64> = (0..spectrum.len())
        .map(|i| h.eval_scalar(&spectrum.point(i)))
        .collect();
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let bad: Vec<usize> = (0..vals.len())
        .filter(|&i| vals[i].abs() <= 1e-12 * scale)
        .collect();
    if !bad.is_empty() {
        return Err(Error::SingularFilter { points: bad });
    }
    let basis = match spectrum.transform() {
        Transform::Orthogonal(v) => Some(v.clone()),
        _ => None,
    };
    Ok(Approximant::SpectralValues {
        values: vals.iter().map(|v| 1.0 / v).collect(),
        basis,
    })
}

/// Minimax polynomial approximation of 1/h on a finite point set.
#[derive(Debug, Clone)]
pub struct OptimalPoly {
    /// Same polynomial in the shifted-Chebyshev basis of the spectrum box.
    pub cheb: ChebCoeffs,
    /// Monomial form; absent when the degree exceeds the conversion cap.
    pub poly: Option<PolyCoeffs>,
    /// sup over the spectrum of |1 − g h|, recomputed from the coefficients.
    pub a: f64,
}

impl OptimalPoly {
    pub fn approximant(&self) -> Approximant {
        match &self.poly {
            Some(p) => Approximant::Polynomial(p.clone()),
            None => Approximant::Chebyshev(self.cheb.clone()),
        }
    }
}

fn widen(bbox: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    bbox.into_iter()
        .map(|(lo, hi)| {
            if hi - lo > 1e-12 {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        })
        .collect()
}

/// Solves min_g sup_{λ∈Λ} |1 − g(λ) h(λ)| over total degree ≤ L. The LP is
/// posed in the Chebyshev basis of Λ's bounding box for conditioning.
pub fn optimal_poly(h: &PolyCoeffs, spectrum: &JointSpectrum, l: usize) -> Result<OptimalPoly> {
    real_points(spectrum)?;
    let d = spectrum.d();
    if h.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: h.d(),
        });
    }
    let pts = spectrum.dedup_points(1e-10);
    let bbox = widen(spectrum.bounding_box());
    let idx = multi_indices(d, l);
    let hv: Vec<f64> = pts.iter().map(|p| h.eval_scalar(p)).collect();
    if let Some(i) = hv.iter().position(|v| *v == 0.0) {
        return Err(Error::SingularFilter { points: vec![i] });
    }
    let basis_vals = |p: &[f64]| -> Vec<f64> {
        let probe = |k: &[usize]| ChebCoeffs::from_terms(l, bbox.clone(), &[(k.to_vec(), 1.0)]);
        idx.iter()
            .map(|k| probe(k).map(|c| c.eval_scalar(p)).unwrap_or(0.0))
            .collect()
    };
    let mut pm = DMatrix::zeros(pts.len(), idx.len());
    for (i, p) in pts.iter().enumerate() {
        for (k, v) in basis_vals(p).into_iter().enumerate() {
            pm[(i, k)] = hv[i] * v;
        }
    }
    let (c, _) = minimax_fit(&pm)?;
    let terms: Vec<(Vec<usize>, f64)> = idx.into_iter().zip(c.iter().copied()).collect();
    let cheb = ChebCoeffs::from_terms(l, bbox, &terms)?;
    let a = pts
        .iter()
        .zip(&hv)
        .map(|(p, hp)| (1.0 - cheb.eval_scalar(p) * hp).abs())
        .fold(0.0, f64::max);
    let poly = if l <= CHEB_MONOMIAL_CAP {
        Some(cheb_to_monomial(&cheb)?)
    } else {
        None
    };
    Ok(OptimalPoly { cheb, poly, a })
}

/// Default nodes per axis for [`chebyshev_coeffs`].
pub fn default_quadrature_nodes(k: usize) -> usize {
    64.max(4 * (k + 1))
}

fn cheb_quadrature(
    h: &PolyCoeffs,
    k_max: usize,
    bbox: &[(f64, f64)],
    q: usize,
) -> Result<ChebCoeffs> {
    let d = bbox.len();
    let theta: Vec<f64> = (0..q)
        .map(|j| std::f64::consts::PI * (j as f64 + 0.5) / q as f64)
        .collect();
    let total = q.pow(d as u32);
    let mut inv_h = Vec::with_capacity(total);
    let mut sign = 0.0f64;
    let mut t = vec![0.0; d];
    for flat in 0..total {
        let mut r = flat;
        for i in (0..d).rev() {
            let (mu, nu) = bbox[i];
            t[i] = 0.5 * (nu + mu) + 0.5 * (nu - mu) * theta[r % q].cos();
            r /= q;
        }
        let v = h.eval_scalar(&t);
        if v == 0.0 || (sign != 0.0 && v.signum() != sign) {
            return Err(Error::SingularIntegrand(t.clone()));
        }
        sign = v.signum();
        inv_h.push(1.0 / v);
    }
    // cos(k θ_j) table
    let cos_tab: Vec<Vec<f64>> = (0..=k_max)
        .map(|k| theta.iter().map(|th| (k as f64 * th).cos()).collect())
        .collect();
    let mut out = ChebCoeffs::zeros(k_max, bbox.to_vec())?;
    for k in multi_indices(d, k_max) {
        let nonzero = k.iter().filter(|&&ki| ki != 0).count();
        let w = 2f64.powi(nonzero as i32) / total as f64;
        let mut s = 0.0;
        for (flat, f) in inv_h.iter().enumerate() {
            let mut r = flat;
            let mut prod = 1.0;
            for i in (0..d).rev() {
                prod *= cos_tab[k[i]][r % q];
                r /= q;
            }
            s += prod * f;
        }
        out.set(&k, w * s)?;
    }
    Ok(out)
}

/// Chebyshev coefficients of 1/h on a box by the midpoint rule in θ,
/// doubling the node count until kept coefficients move less than 1e−10.
pub fn chebyshev_coeffs(
    h: &PolyCoeffs,
    k_max: usize,
    bbox: &[(f64, f64)],
    q: Option<usize>,
) -> Result<ChebCoeffs> {
    if h.d() != bbox.len() {
        return Err(Error::DimensionMismatch {
            expected: bbox.len(),
            got: h.d(),
        });
    }
    let mut q = q.unwrap_or_else(|| default_quadrature_nodes(k_max));
    // the grid has q^d nodes, so refinement is bounded tighter in 3-D
    let max_q = if bbox.len() >= 3 { q.max(128) } else { 16 * q };
    let mut cur = cheb_quadrature(h, k_max, bbox, q)?;
    loop {
        let q2 = 2 * q;
        if q2 > max_q {
            return Err(Error::QuadratureNotConverged {
                q,
                change: f64::NAN,
            });
        }
        let next = cheb_quadrature(h, k_max, bbox, q2)?;
        let change = cur
            .terms()
            .iter()
            .map(|(k, v)| (v - next.get(k)).abs())
            .fold(0.0, f64::max);
        if change <= 1e-10 {
            return Ok(next);
        }
        if q2 == max_q {
            return Err(Error::QuadratureNotConverged { q: q2, change });
        }
        q = q2;
        cur = next;
    }
}

/// Default uniform grid size per axis for [`cheb_sup_error`].
pub fn default_sup_grid(d: usize) -> usize {
    match d {
        1 => 2001,
        2 => 201,
        _ => 41,
    }
}

/// Grid approximation of sup_{t∈box} |1 − h(t) g(t)|.
pub fn cheb_sup_error(h: &PolyCoeffs, c: &ChebCoeffs, grid: Option<usize>) -> f64 {
    let d = c.d();
    let g = grid.unwrap_or_else(|| default_sup_grid(d));
    let total = g.pow(d as u32);
    let mut t = vec![0.0; d];
    let mut worst = 0.0f64;
    for flat in 0..total {
        let mut r = flat;
        for i in (0..d).rev() {
            let (mu, nu) = c.bbox()[i];
            t[i] = mu + (nu - mu) * (r % g) as f64 / (g - 1).max(1) as f64;
            r /= g;
        }
        worst = worst.max((1.0 - h.eval_scalar(&t) * c.eval_scalar(&t)).abs());
    }
    worst
}

fn poly_map<'a>(h: &'a PolyCoeffs, ops: &'a [&'a dyn LinearMap]) -> impl LinearMap + 'a {
    crate::operator::FnMap::new(ops[0].dim(), move |x: &[f64]| {
        apply_ops(h, ops, x).expect("checked dims").0
    })
}

fn check_dims(family: &ShiftFamily, h: &PolyCoeffs, b: &[f64]) -> Result<()> {
    if family.d() != h.d() {
        return Err(Error::DimensionMismatch {
            expected: h.d(),
            got: family.d(),
        });
    }
    if family.dim() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Iterative approximation with a given approximant.
pub fn solve_with(
    h: &PolyCoeffs,
    g: &Approximant,
    family: &ShiftFamily,
    b: &[f64],
    opts: &SolveOptions,
) -> Result<SolveTrace> {
    check_dims(family, h, b)?;
    let ops = family_ops(family);
    let hm = poly_map(h, &ops);
    let gm =
        crate::operator::FnMap::new(b.len(), |x: &[f64]| g.apply(&ops, x).expect("checked dims"));
    Ok(iterative_approx(&hm, &gm, b, opts))
}

/// Iterative optimal polynomial approximation of degree L.
pub fn iopa_solve(
    h: &PolyCoeffs,
    family: &ShiftFamily,
    b: &[f64],
    l: usize,
    opts: &SolveOptions,
) -> Result<(SolveTrace, OptimalPoly)> {
    check_dims(family, h, b)?;
    let fit = optimal_poly(h, family.spectrum()?, l)?;
    if fit.a >= 1.0 {
        warn!(
            "IOPA{l}: a_L = {:.4} ≥ 1, convergence not guaranteed",
            fit.a
        );
    }
    let tr = solve_with(h, &fit.approximant(), family, b, opts)?;
    Ok((tr, fit))
}

/// Iterative Chebyshev polynomial approximation of degree K on `bbox`.
pub fn icpa_solve(
    h: &PolyCoeffs,
    family: &ShiftFamily,
    b: &[f64],
    k: usize,
    bbox: &[(f64, f64)],
    opts: &SolveOptions,
) -> Result<(SolveTrace, ChebCoeffs, f64)> {
    check_dims(family, h, b)?;
    let c = chebyshev_coeffs(h, k, bbox, None)?;
    let bk = cheb_sup_error(h, &c, None);
    if bk >= 1.0 {
        warn!("ICPA{k}: b_K = {bk:.4} ≥ 1, convergence not guaranteed");
    }
    let tr = solve_with(h, &Approximant::Chebyshev(c.clone()), family, b, opts)?;
    Ok((tr, c, bk))
}

/// 1/h(t) = constant + Σ_k a_k / (1 − b_k t).
#[derive(Debug, Clone)]
pub struct PartialFractions {
    pub constant: f64,
    pub terms: Vec<(Complex64, Complex64)>,
}

impl PartialFractions {
    pub fn eval(&self, t: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|(a, b)| a / (Complex64::new(1.0, 0.0) - b * t))
            .sum::<Complex64>()
            + self.constant
    }

    pub fn max_b(&self) -> f64 {
        self.terms.iter().map(|(_, b)| b.norm()).fold(0.0, f64::max)
    }
}

/// Roots of h by companion eigenvalues; a_k = −1/(r_k h'(r_k)), b_k = 1/r_k.
pub fn partial_fractions(h: &[f64]) -> Result<PartialFractions> {
    let mut h = h.to_vec();
    while h.len() > 1 && *h.last().unwrap() == 0.0 {
        h.pop();
    }
    let deg = h.len() - 1;
    if deg == 0 {
        if h[0] == 0.0 {
            return Err(Error::SingularFilter { points: vec![] });
        }
        return Ok(PartialFractions {
            constant: 1.0 / h[0],
            terms: vec![],
        });
    }
    if h[0] == 0.0 {
        return Err(Error::ZeroRoot);
    }
    let lead = h[deg];
    let comp = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -h[deg - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let roots: Vec<Complex64> = comp.complex_eigenvalues().iter().copied().collect();
    for i in 0..deg {
        for j in i + 1..deg {
            if (roots[i] - roots[j]).norm() < 1e-8 * (1.0 + roots[i].norm()) {
                return Err(Error::RepeatedRoot(roots[i].re));
            }
        }
    }
    let dh: Vec<f64> = (1..=deg).map(|k| k as f64 * h[k]).collect();
    let horner = |c: &[f64], z: Complex64| {
        c.iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &v| acc * z + v)
    };
    let mut terms: Vec<(Complex64, Complex64)> = roots
        .iter()
        .map(|&r| {
            if r.norm() < 1e-14 {
                return Err(Error::ZeroRoot);
            }
            Ok((-1.0 / (r * horner(&dh, r)), 1.0 / r))
        })
        .collect::<Result<_>>()?;
    // root-index order: decreasing real part of b, then imaginary part
    terms.sort_by(|x, y| y.1.re.total_cmp(&x.1.re).then(y.1.im.total_cmp(&x.1.im)));
    Ok(PartialFractions {
        constant: 0.0,
        terms,
    })
}

/// Largest |λ| of a symmetric operator by power iteration, padded slightly.
pub fn estimate_norm(s: &dyn LinearMap, iters: usize) -> f64 {
    let n = s.dim();
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0)
        .collect();
    let mut w = vec![0.0; n];
    let mut est = 0.0;
    for _ in 0..iters {
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        s.apply_into(&v, &mut w);
        est = norm2(&w);
        if est == 0.0 {
            return 0.0;
        }
        std::mem::swap(&mut v, &mut w);
    }
    est * 1.01
}

/// L parallel elementary recursions x_k ← b_k S x_k + b, combined as
/// x = Σ a_k x_k. `shift_norm` defaults to a power-iteration estimate.
pub fn arma_solve(
    h: &[f64],
    s: &dyn LinearMap,
    b: &[f64],
    shift_norm: Option<f64>,
    opts: &SolveOptions,
) -> Result<SolveTrace> {
    let pf = partial_fractions(h)?;
    let sn = shift_norm.unwrap_or_else(|| estimate_norm(s, 200));
    for (k, (_, bk)) in pf.terms.iter().enumerate() {
        let v = bk.norm() * sn;
        if v >= 1.0 {
            return Err(Error::ArmaUnstable { index: k, value: v });
        }
    }
    let n = b.len();
    let mut rec = Recorder::new(opts, b);
    let nt = pf.terms.len();
    let mut xr = vec![vec![0.0; n]; nt];
    let mut xi = vec![vec![0.0; n]; nt];
    let mut sr = vec![0.0; n];
    let mut si = vec![0.0; n];
    let combine = |xr: &[Vec<f64>], xi: &[Vec<f64>]| -> Vec<f64> {
        let mut x: Vec<f64> = b.iter().map(|v| pf.constant * v).collect();
        for (k, (a, _)) in pf.terms.iter().enumerate() {
            for i in 0..n {
                x[i] += a.re * xr[k][i] - a.im * xi[k][i];
            }
        }
        x
    };
    let residual = |x: &[f64]| -> f64 {
        let hx = apply_single(h, s, x);
        hx.iter()
            .zip(b)
            .map(|(p, q)| (q - p) * (q - p))
            .sum::<f64>()
            .sqrt()
    };
    let mut x = combine(&xr, &xi);
    if rec.push(&x, residual(&x)) {
        return Ok(rec.finish(x));
    }
    loop {
        for (k, (_, bk)) in pf.terms.iter().enumerate() {
            s.apply_into(&xr[k], &mut sr);
            s.apply_into(&xi[k], &mut si);
            for i in 0..n {
                xr[k][i] = bk.re * sr[i] - bk.im * si[i] + b[i];
                xi[k][i] = bk.re * si[i] + bk.im * sr[i];
            }
        }
        x = combine(&xr, &xi);
        if rec.push(&x, residual(&x)) {
            break;
        }
    }
    Ok(rec.finish(x))
}
