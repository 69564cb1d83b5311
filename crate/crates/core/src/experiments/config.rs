use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Placement;

use super::denoise::PenaltySource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Circulant,
    Timevarying,
    Temperature,
}

/// Everything needed to rerun an experiment bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Vertices of the circulant or random geometric graph.
    pub n: usize,
    pub generators: Vec<usize>,
    /// Univariate filter h for the circulant study, low degree first.
    pub filter: Vec<f64>,
    /// Method names, e.g. "ARMA", "GD0", "IOPA3", "ICPA2".
    pub methods: Vec<String>,
    pub trials: usize,
    pub seed: u64,
    /// Iteration budget per solve.
    pub iterations: usize,
    /// Iterations reported in denoising tables.
    pub report_iterations: Vec<usize>,
    pub tolerance: f64,
    pub eta: Vec<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub penalties: PenaltySource,
    /// Time samples of the time-varying signal.
    pub snapshots: usize,
    pub delta: f64,
    pub radius: f64,
    pub placement: Placement,
    pub knn: usize,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_kind(ExperimentKind::Circulant)
    }
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            n: 1000,
            generators: vec![1, 2, 5],
            filter: vec![27.0 / 4.0, -0.75, -1.0],
            methods: Vec::new(),
            trials: 100,
            seed: 2019,
            iterations: 20,
            report_iterations: vec![1, 2, 4, 6],
            tolerance: 1e-3,
            eta: Vec::new(),
            alpha: None,
            beta: None,
            penalties: PenaltySource::Truth,
            snapshots: 24,
            delta: 0.1,
            radius: 1.0 / 16.0,
            placement: Placement::Stratified,
            knn: 5,
            out: None,
            data: None,
        };
        match kind {
            ExperimentKind::Circulant => ExperimentConfig {
                methods: default_circulant_methods(),
                ..base
            },
            ExperimentKind::Timevarying => ExperimentConfig {
                n: 512,
                trials: 10,
                iterations: 50,
                methods: vec!["IOPA1".into(), "ICPA1".into(), "GD0".into()],
                eta: vec![0.75, 0.5, 0.25, 0.125],
                ..base
            },
            ExperimentKind::Temperature => ExperimentConfig {
                n: 218,
                trials: 10,
                iterations: 50,
                methods: vec!["IOPA1".into(), "ICPA1".into(), "GD0".into()],
                eta: vec![35.0, 20.0, 10.0],
                ..base
            },
        }
    }

    /// Parses a possibly partial config; missing fields take the defaults of
    /// the named experiment rather than the circulant ones.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        let kind: ExperimentKind = match obj.get("experiment") {
            Some(k) => serde_json::from_value(k.clone())?,
            None => ExperimentKind::Circulant,
        };
        let mut base = serde_json::to_value(Self::for_kind(kind))?;
        let map = base
            .as_object_mut()
            .expect("struct serializes to an object");
        for (k, val) in obj {
            if !map.contains_key(k) {
                return Err(Error::Config(format!("unknown config field {k:?}")));
            }
            map.insert(k.clone(), val.clone());
        }
        let cfg: ExperimentConfig = serde_json::from_value(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.eta.iter().any(|e| *e < 0.0 || !e.is_finite()) {
            return Err(Error::Config(
                "noise levels must be finite and nonnegative".into(),
            ));
        }
        if self.delta <= 0.0 {
            return Err(Error::Config("delta must be positive".into()));
        }
        for m in &self.methods {
            Method::parse(m)?;
        }
        Ok(())
    }
}

fn default_circulant_methods() -> Vec<String> {
    let mut m = vec!["ARMA".to_string(), "GD0".to_string()];
    m.extend((0..=5).map(|k| format!("ICPA{k}")));
    m.extend((0..=5).map(|k| format!("IOPA{k}")));
    m
}

/// A method name split into its family and degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Arma,
    Gd0,
    Iopa(usize),
    Icpa(usize),
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        let u = s.trim().to_ascii_uppercase();
        let degree = |p: &str| {
            u[p.len()..]
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("method {s:?} needs a degree, e.g. {p}2")))
        };
        match u.as_str() {
            "ARMA" => Ok(Method::Arma),
            "GD0" | "GD" => Ok(Method::Gd0),
            _ if u.starts_with("IOPA") => Ok(Method::Iopa(degree("IOPA")?)),
            _ if u.starts_with("ICPA") => Ok(Method::Icpa(degree("ICPA")?)),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Method::Arma => "ARMA".into(),
            Method::Gd0 => "GD0".into(),
            Method::Iopa(l) => format!("IOPA{l}"),
            Method::Icpa(k) => format!("ICPA{k}"),
        }
    }
}
