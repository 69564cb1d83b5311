//! Denoising of hourly station temperatures on a k-NN station graph times a
//! 24-hour cycle.
//!
//! Input CSV: a header row, then `station_id,lat,lon,h00,...,h23` per station.
//! Coordinates are treated as planar (lon, lat).

use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{build_circulant, build_knn, Graph, SignalGrid};

use super::config::ExperimentConfig;
use super::denoise::{
    affine_filter, penalty, run_denoise, CellFilter, DenoiseProblem, DenoiseReport, Mode,
    PenaltySource,
};
use super::output::OutputDir;

#[derive(Debug, Clone)]
pub struct TemperatureData {
    pub ids: Vec<String>,
    /// (lat, lon) per station.
    pub coords: Vec<[f64; 2]>,
    pub signal: SignalGrid,
    pub synthetic: bool,
}

pub fn read_temperature_csv<R: Read>(r: R) -> Result<TemperatureData> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let width = rd.headers()?.len();
    if width < 4 {
        return Err(Error::Parse {
            line: 1,
            col: width + 1,
            msg: "need station_id,lat,lon and at least one hour".into(),
        });
    }
    let hours = width - 3;
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                col: 0,
                msg: e.to_string(),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                col: rec.len().min(width) + 1,
                msg: format!("expected {width} fields, got {}", rec.len()),
            });
        }
        let num = |c: usize| -> Result<f64> {
            rec[c]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    col: c + 1,
                    msg: format!("not a number: {:?}", &rec[c]),
                })
        };
        ids.push(rec[0].to_string());
        coords.push([num(1)?, num(2)?]);
        rows.push((0..hours).map(|h| num(3 + h)).collect::<Result<_>>()?);
    }
    if rows.len() < 2 {
        return Err(Error::Parse {
            line: rows.len() + 2,
            col: 1,
            msg: "need at least two stations".into(),
        });
    }
    let snaps: Vec<Vec<f64>> = (0..hours)
        .map(|h| rows.iter().map(|r| r[h]).collect())
        .collect();
    Ok(TemperatureData {
        ids,
        coords,
        signal: SignalGrid::from_snapshots(&snaps)?,
        synthetic: false,
    })
}

/// Smooth synthetic field: latitude gradient, daily cycle and a few
/// Gaussian warm and cold spots, at n stations over a US-sized box.
pub fn synthetic_temperature(n: usize, hours: usize, seed: u64) -> TemperatureData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            [
                rng.random_range(30.0..48.0),
                rng.random_range(-120.0..-75.0),
            ]
        })
        .collect();
    let bumps: Vec<([f64; 2], f64, f64)> = (0..6)
        .map(|_| {
            (
                [
                    rng.random_range(30.0..48.0),
                    rng.random_range(-120.0..-75.0),
                ],
                rng.random_range(-8.0..8.0),
                rng.random_range(3.0..8.0),
            )
        })
        .collect();
    let snaps: Vec<Vec<f64>> = (0..hours)
        .map(|h| {
            let day = (2.0 * std::f64::consts::PI * (h as f64 - 9.0) / hours as f64).sin();
            coords
                .iter()
                .map(|&[lat, lon]| {
                    let spots: f64 = bumps
                        .iter()
                        .map(|&([bl, bo], amp, w)| {
                            let d2 = (lat - bl).powi(2) + (lon - bo).powi(2);
                            amp * (-d2 / (2.0 * w * w)).exp()
                        })
                        .sum();
                    70.0 - 0.6 * (lat - 39.0) + 8.0 * day + spots
                })
                .collect()
        })
        .collect();
    TemperatureData {
        ids: (0..n).map(|i| format!("S{i:03}")).collect(),
        coords,
        signal: SignalGrid::from_snapshots(&snaps).expect("equal lengths"),
        synthetic: true,
    }
}

pub fn load(cfg: &ExperimentConfig) -> Result<TemperatureData> {
    match &cfg.data {
        Some(p) => read_temperature_csv(std::fs::File::open(Path::new(p))?),
        None => Ok(synthetic_temperature(cfg.n, cfg.snapshots, cfg.seed)),
    }
}

pub struct TemperatureInstance {
    pub data: TemperatureData,
    pub graph: Graph,
    pub problem: DenoiseProblem,
}

impl TemperatureInstance {
    pub fn build(data: TemperatureData, k: usize) -> Result<Self> {
        let planar: Vec<[f64; 2]> = data.coords.iter().map(|&[lat, lon]| [lon, lat]).collect();
        let graph = build_knn(&planar, k)?;
        let time = build_circulant(data.signal.m(), &[1])?;
        let problem = DenoiseProblem::new(
            graph.sym_normalized_laplacian()?,
            time.sym_normalized_laplacian()?,
        )?;
        Ok(TemperatureInstance {
            data,
            graph,
            problem,
        })
    }

    /// α̃ and β̃ from MNη²/3 over the expected quadratic forms.
    pub fn penalties(&self, eta: f64, source: PenaltySource, y: &[f64]) -> (f64, f64) {
        let p = &self.problem;
        let num = (p.m() * p.n()) as f64 * eta * eta / 3.0;
        let (q1, q2) = match source {
            PenaltySource::Truth => {
                let (q1, q2) = p.quadratic_forms(self.data.signal.vectorize());
                let (t1, t2) = p.traces();
                let s = eta * eta / 3.0;
                (q1 + s * t1, q2 + s * t2)
            }
            PenaltySource::Observations => p.quadratic_forms(y),
        };
        (penalty(num, q1, 1.0), penalty(num, q2, 1.0))
    }
}

pub fn exp_temperature(cfg: &ExperimentConfig) -> Result<(DenoiseReport, TemperatureInstance)> {
    let inst = TemperatureInstance::build(load(cfg)?, cfg.knn)?;
    let report = run_denoise(
        &inst.problem,
        inst.data.signal.vectorize(),
        cfg,
        |eta, mode: Mode, y| {
            let (a, b) = inst.penalties(eta, cfg.penalties, y);
            let (alpha, beta) = mode.zero_out(cfg.alpha.unwrap_or(a), cfg.beta.unwrap_or(b));
            Ok(CellFilter {
                h: affine_filter(1.0, alpha, beta),
                alpha,
                beta,
            })
        },
    )?;
    Ok((report, inst))
}

pub fn write_report(
    report: &DenoiseReport,
    inst: &TemperatureInstance,
    cfg: &ExperimentConfig,
    out: &OutputDir,
) -> Result<()> {
    report.write(
        cfg,
        out,
        json!({
            "data": if inst.data.synthetic { "synthetic".to_string() } else { cfg.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default() },
            "synthetic": inst.data.synthetic,
            "stations": inst.data.ids.len(),
            "hours": inst.data.signal.m(),
            "edges": inst.graph.num_edges(),
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reports_bad_cells() {
        let good = "station_id,lat,lon,h00,h01\nA,40,-100,50,51\nB,41,-101,52,53\nC,42,-99,54,55\n";
        let d = read_temperature_csv(good.as_bytes()).unwrap();
        assert_eq!((d.signal.n(), d.signal.m()), (3, 2));
        assert_eq!(d.signal.get(2, 1), 55.0);
        let bad = "station_id,lat,lon,h00,h01\nA,40,-100,50,51\nB,41,-101,x,53\n";
        match read_temperature_csv(bad.as_bytes()) {
            Err(Error::Parse { line, col, .. }) => assert_eq!((line, col), (3, 4)),
            other => panic!("{other:?}"),
        }
        let short = "station_id,lat,lon,h00,h01\nA,40,-100,50\n";
        assert!(matches!(
            read_temperature_csv(short.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn synthetic_is_deterministic_and_plausible() {
        let a = synthetic_temperature(50, 24, 3);
        let b = synthetic_temperature(50, 24, 3);
        assert_eq!(a.signal, b.signal);
        assert!(a
            .signal
            .vectorize()
            .iter()
            .all(|v| (30.0..110.0).contains(v)));
    }
}
