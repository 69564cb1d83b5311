//! Denoising of a simulated wave-like signal on a random geometric graph.

use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{build_path, build_random_geometric_connected, Graph, SignalGrid};
use crate::operator::LinearMap;
use crate::polyfilter::{apply_single, DENSE_CAP};

use super::config::ExperimentConfig;
use super::denoise::{
    affine_filter, penalty, run_denoise, CellFilter, DenoiseProblem, DenoiseReport, Mode,
    PenaltySource,
};
use super::output::OutputDir;

/// P = −I + L_sym/2 as a polynomial in L_sym.
pub const WAVE_P: [f64; 2] = [-1.0, 0.5];

/// Four diagonal strips by s = x + y: linear 0.5 − 2x on the first and
/// third, quadratic 0.5 + x² + y² on the second and fourth.
pub fn initial_signal(coords: &[[f64; 2]]) -> Vec<f64> {
    coords
        .iter()
        .map(|&[x, y]| {
            let strip = (((x + y) / 0.5).floor() as i64).clamp(0, 3);
            if strip % 2 == 0 {
                0.5 - 2.0 * x
            } else {
                0.5 + x * x + y * y
            }
        })
        .collect()
}

/// x(t0) = x(t1) = x0, then x(t_i) = (2I + δ²P) x(t_{i−1}) − x(t_{i−2}) with
/// P = p(L) for a univariate polynomial p.
pub fn simulate_timevarying(
    l: &dyn LinearMap,
    p: &[f64],
    m: usize,
    delta: f64,
    x0: &[f64],
) -> Result<SignalGrid> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::Config(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidSize("need at least one snapshot".into()));
    }
    if x0.len() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            got: x0.len(),
        });
    }
    let d2 = delta * delta;
    let mut snaps: Vec<Vec<f64>> = vec![x0.to_vec()];
    if m > 1 {
        snaps.push(x0.to_vec());
    }
    while snaps.len() < m {
        let k = snaps.len();
        let px = apply_single(p, l, &snaps[k - 1]);
        let next = (0..x0.len())
            .map(|i| 2.0 * snaps[k - 1][i] + d2 * px[i] - snaps[k - 2][i])
            .collect();
        snaps.push(next);
    }
    SignalGrid::from_snapshots(&snaps)
}

pub struct TimevaryingInstance {
    pub graph: Graph,
    /// Seed that produced the connected graph.
    pub graph_seed: u64,
    pub truth: SignalGrid,
    pub problem: DenoiseProblem,
    pub delta: f64,
}

impl TimevaryingInstance {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        if cfg.n > DENSE_CAP {
            return Err(Error::DenseCapExceeded {
                n: cfg.n,
                cap: DENSE_CAP,
            });
        }
        let (graph, graph_seed) =
            build_random_geometric_connected(cfg.n, cfg.radius, cfg.seed, cfg.placement, 1000)?;
        let lsym = graph.sym_normalized_laplacian()?;
        let x0 = initial_signal(graph.coords().expect("geometric graphs carry coordinates"));
        let truth = simulate_timevarying(&lsym, &WAVE_P, cfg.snapshots, cfg.delta, &x0)?;
        let time = build_path(cfg.snapshots)?.laplacian().scale(0.5);
        let problem = DenoiseProblem::new(lsym, time)?;
        Ok(TimevaryingInstance {
            graph,
            graph_seed,
            truth,
            problem,
            delta: cfg.delta,
        })
    }

    /// h = 1 + αt1 + β(−1 + t1/2) + 2βδ⁻²t2.
    pub fn filter(&self, alpha: f64, beta: f64) -> CellFilter {
        let d2 = 2.0 / (self.delta * self.delta);
        CellFilter {
            h: affine_filter(1.0 - beta, alpha + beta / 2.0, d2 * beta),
            alpha,
            beta,
        }
    }

    /// (α, β) from the balancing formulas, before zeroing by mode.
    pub fn penalties(&self, eta: f64, source: PenaltySource, y: &[f64]) -> (f64, f64) {
        let p = &self.problem;
        let (n, m) = (p.n() as f64, p.m() as f64);
        let num = m * n * eta * eta / 3.0;
        let w = 2.0 / (self.delta * self.delta);
        // Q = δ⁻²L_T⊗I + I⊗P = 2δ⁻²S2 − I + S1/2
        let quad = |x: &[f64]| {
            let (q1, q2) = p.quadratic_forms(x);
            let xx: f64 = x.iter().map(|v| v * v).sum();
            (q1, w * q2 - xx + q1 / 2.0)
        };
        let (q1, qq) = match source {
            PenaltySource::Truth => {
                let (q1, qq) = quad(self.truth.vectorize());
                let (t1, t2) = p.traces();
                let s = eta * eta / 3.0;
                (q1 + s * t1, qq + s * (w * t2 - m * n + t1 / 2.0))
            }
            PenaltySource::Observations => quad(y),
        };
        (penalty(num, q1, 1.0), penalty(num, qq, 2.0))
    }
}

pub fn exp_timevarying(cfg: &ExperimentConfig) -> Result<(DenoiseReport, TimevaryingInstance)> {
    let inst = TimevaryingInstance::build(cfg)?;
    let report = run_denoise(
        &inst.problem,
        inst.truth.vectorize(),
        cfg,
        |eta, mode: Mode, y| {
            let (a, b) = inst.penalties(eta, cfg.penalties, y);
            let (a, b) = mode.zero_out(cfg.alpha.unwrap_or(a), cfg.beta.unwrap_or(b));
            Ok(inst.filter(a, b))
        },
    )?;
    Ok((report, inst))
}

pub fn write_report(
    report: &DenoiseReport,
    inst: &TimevaryingInstance,
    cfg: &ExperimentConfig,
    out: &OutputDir,
) -> Result<()> {
    let lsym = inst.graph.sym_normalized_laplacian()?;
    let smooth: Vec<f64> = (0..inst.truth.m())
        .map(|j| {
            let s = inst.truth.snapshot(j);
            s.iter().zip(lsym.matvec(s)).map(|(a, b)| a * b).sum()
        })
        .collect();
    report.write(
        cfg,
        out,
        json!({
            "graph_seed": inst.graph_seed,
            "edges": inst.graph.num_edges(),
            "smoothness": smooth,
        }),
    )
}
