use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

use polyshift::experiments::config::Method;
use polyshift::experiments::output::OutputDir;
use polyshift::experiments::{
    circulant, temperature, timevarying, ExperimentConfig, ExperimentKind,
};
use polyshift::inverse::{
    arma_solve, chebyshev_coeffs, gd0_solve, optimal_poly, solve_with, Approximant, SolveOptions,
};
use polyshift::operator::FnMap;
use polyshift::polyfilter::{apply, apply_cheb};
use polyshift::shifts::{circulant_family, circulant_laplacian_spectrum, validate_shift};
use polyshift::{Error, FilterSpec, Graph, Operator, ShiftFamily};

#[derive(Parser)]
#[command(
    name = "polyshift",
    version,
    about = "Polynomial graph filters, inverse filtering and the accompanying experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Inverse filtering convergence on a circulant graph.
    ExpCirculant(ExpArgs),
    /// Denoising of a simulated time-varying signal.
    ExpTimevarying(ExpArgs),
    /// Denoising of hourly temperatures (CSV via --data, else synthetic).
    ExpTemperature(ExpArgs),
    /// Apply a polynomial filter to a signal.
    Filter(FilterArgs),
    /// Solve h(S) x = b iteratively.
    Inverse(InverseArgs),
    /// Write the joint spectrum of the shifts.
    Spectrum(SpectrumArgs),
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    generators: Option<Vec<usize>>,
    /// Comma-separated method names; names without a degree take --degree.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShiftKind {
    /// Symmetric normalized Laplacian.
    Lsym,
    Laplacian,
    Adjacency,
    /// One normalized Laplacian per circulant generator (circulant graphs only).
    Generators,
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list: "n m" header, then "i j" lines.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Circulant order, used when --graph is absent.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
    generators: Vec<usize>,
    #[arg(long, value_enum, default_value = "lsym")]
    shifts: ShiftKind,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Filter JSON, {"degrees":[..],"coeffs":[..]} or {"cheb":{..}}.
    #[arg(long)]
    filter: PathBuf,
    /// Signal CSV with a "value" column.
    #[arg(long)]
    signal: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InverseArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    filter: PathBuf,
    /// Right-hand side b as a "value" CSV.
    #[arg(long)]
    signal: PathBuf,
    #[arg(long, default_value = "IOPA")]
    method: String,
    #[arg(long, default_value_t = 1)]
    degree: usize,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Output directory: solution.csv and trace_<method>.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Precondition(Error),
    Divergence(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Precondition(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Precondition(e.into())
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::ExpCirculant(a) => exp(ExperimentKind::Circulant, a),
        Cmd::ExpTimevarying(a) => exp(ExperimentKind::Timevarying, a),
        Cmd::ExpTemperature(a) => exp(ExperimentKind::Temperature, a),
        Cmd::Filter(a) => filter(a),
        Cmd::Inverse(a) => inverse(a),
        Cmd::Spectrum(a) => spectrum(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Precondition(e)) => {
            error!("{e}");
            ExitCode::from(2)
        }
        Err(Failure::Divergence(msg)) => {
            error!("{msg}");
            ExitCode::from(3)
        }
    }
}

fn with_degree(names: Vec<String>, degree: Option<usize>) -> Vec<String> {
    names
        .into_iter()
        .map(|m| match degree {
            Some(d)
                if !m.ends_with(|c: char| c.is_ascii_digit())
                    && !m.eq_ignore_ascii_case("arma") =>
            {
                format!("{m}{d}")
            }
            _ => m,
        })
        .collect()
}

fn exp(kind: ExperimentKind, a: ExpArgs) -> Res<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let c = ExperimentConfig::from_json_file(p)?;
            if c.experiment != kind {
                return Err(Error::Config(format!(
                    "config is for {:?}, command runs {kind:?}",
                    c.experiment
                ))
                .into());
            }
            c
        }
        None => ExperimentConfig::for_kind(kind),
    };
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.generators {
        cfg.generators = v;
    }
    if let Some(v) = a.method {
        cfg.methods = with_degree(v, a.degree);
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = a.eta {
        cfg.eta = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.iterations {
        cfg.iterations = v;
    }
    if a.out.is_some() {
        cfg.out = a.out;
    }
    if a.data.is_some() {
        cfg.data = a.data;
    }
    cfg.validate()?;
    let dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("out/{}", kind_name(kind))));
    let out = OutputDir::create(&dir)?;
    match kind {
        ExperimentKind::Circulant => {
            let r = circulant::exp_circulant(&cfg)?;
            circulant::write_report(&r, &cfg, &out)?;
            for row in &r.rows {
                info!(
                    "{:6} E(1)={:.4} rate={} iters-to-tol={} {}",
                    row.name,
                    row.mean_errors[0],
                    row.rate.map_or("-".into(), |v| format!("{v:.4}")),
                    row.iterations_to_tol.map_or("-".into(), |v| v.to_string()),
                    if row.diverged { "divergent" } else { "" }
                );
            }
        }
        ExperimentKind::Timevarying => {
            let (r, inst) = timevarying::exp_timevarying(&cfg)?;
            timevarying::write_report(&r, &inst, &cfg, &out)?;
        }
        ExperimentKind::Temperature => {
            let (r, inst) = temperature::exp_temperature(&cfg)?;
            if inst.data.synthetic {
                info!("no --data given; using the synthetic temperature field");
            }
            temperature::write_report(&r, &inst, &cfg, &out)?;
        }
    }
    info!("wrote {}", dir.display());
    Ok(())
}

fn kind_name(k: ExperimentKind) -> &'static str {
    match k {
        ExperimentKind::Circulant => "circulant",
        ExperimentKind::Timevarying => "timevarying",
        ExperimentKind::Temperature => "temperature",
    }
}

fn family_from(a: &GraphArgs) -> Res<ShiftFamily> {
    if let Some(p) = &a.graph {
        let g = Graph::read_edge_list(BufReader::new(File::open(p)?))?;
        let op = match a.shifts {
            ShiftKind::Lsym => g.sym_normalized_laplacian()?,
            ShiftKind::Laplacian => g.laplacian(),
            ShiftKind::Adjacency => g.adjacency(),
            ShiftKind::Generators => {
                return Err(Error::Config(
                    "--shifts generators needs a circulant graph (--n)".into(),
                )
                .into())
            }
        };
        return Ok(ShiftFamily::new(vec![validate_shift(
            Operator::Sparse(op),
            &g,
        )?])?);
    }
    let n =
        a.n.ok_or_else(|| Error::Config("give --graph or --n".into()))?;
    if let ShiftKind::Generators = a.shifts {
        return Ok(circulant_family(n, &a.generators)?.1);
    }
    let g = polyshift::graph::build_circulant(n, &a.generators)?;
    let op = match a.shifts {
        ShiftKind::Lsym => g.sym_normalized_laplacian()?,
        ShiftKind::Laplacian => g.laplacian(),
        _ => g.adjacency(),
    };
    let fam = ShiftFamily::new(vec![validate_shift(Operator::Sparse(op), &g)?])?;
    Ok(match a.shifts {
        ShiftKind::Lsym => fam.with_spectrum(circulant_laplacian_spectrum(n, &a.generators)),
        _ => fam,
    })
}

fn read_signal(p: &Path) -> Res<Vec<f64>> {
    let mut rd = csv::Reader::from_reader(File::open(p)?);
    let col = rd
        .headers()
        .map_err(Error::from)?
        .iter()
        .position(|h| h.trim() == "value")
        .ok_or_else(|| Error::Parse {
            line: 1,
            col: 1,
            msg: "missing \"value\" column".into(),
        })?;
    let mut v = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec.map_err(Error::from)?;
        let s = rec.get(col).unwrap_or("").trim();
        v.push(s.parse().map_err(|_| Error::Parse {
            line: k + 2,
            col: col + 1,
            msg: format!("not a number: {s:?}"),
        })?);
    }
    Ok(v)
}

fn write_signal(p: &Path, x: &[f64]) -> Res<()> {
    let mut w = std::io::BufWriter::new(File::create(p)?);
    writeln!(w, "value")?;
    for v in x {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}

fn filter(a: FilterArgs) -> Res<()> {
    let family = family_from(&a.graph)?;
    let spec = FilterSpec::from_json(&std::fs::read_to_string(&a.filter)?)?;
    let x = read_signal(&a.signal)?;
    let y = match &spec {
        FilterSpec::Poly(h) => apply(h, &family, &x)?,
        FilterSpec::Cheb(c) => apply_cheb(c, &family, &x)?,
    };
    write_signal(&a.out, &y)
}

fn inverse(a: InverseArgs) -> Res<()> {
    let family = family_from(&a.graph)?;
    let h = match FilterSpec::from_json(&std::fs::read_to_string(&a.filter)?)? {
        FilterSpec::Poly(h) => h,
        FilterSpec::Cheb(c) => polyshift::polyfilter::cheb_to_monomial(&c)?,
    };
    let b = read_signal(&a.signal)?;
    if b.len() != family.dim() {
        return Err(Error::DimensionMismatch {
            expected: family.dim(),
            got: b.len(),
        }
        .into());
    }
    let method = Method::parse(&with_degree(vec![a.method], Some(a.degree)).remove(0))?;
    let opts = SolveOptions {
        max_iter: a.iterations,
        tol: a.tol,
        ..Default::default()
    };
    let trace = match method {
        Method::Arma => {
            let coeffs = h
                .as_univariate()
                .ok_or_else(|| Error::Unsupported("ARMA needs a univariate filter".into()))?;
            arma_solve(coeffs, &family.shifts()[0], &b, None, &opts)?
        }
        Method::Gd0 => {
            let sp = family.spectrum()?;
            let (lo, hi) = (0..sp.len())
                .map(|i| h.eval_scalar(&sp.point(i)))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| {
                    (l.min(v), u.max(v))
                });
            let hm = FnMap::new(b.len(), |x: &[f64]| {
                apply(&h, &family, x).expect("dims checked")
            });
            gd0_solve(&hm, &b, 2.0 / (lo + hi), &opts)
        }
        Method::Iopa(l) => {
            let fit = optimal_poly(&h, family.spectrum()?, l)?;
            info!("IOPA{l}: a = {:.6}", fit.a);
            solve_with(&h, &fit.approximant(), &family, &b, &opts)?
        }
        Method::Icpa(k) => {
            let bbox = family.spectrum()?.bounding_box();
            let c = chebyshev_coeffs(&h, k, &bbox, None)?;
            solve_with(&h, &Approximant::Chebyshev(c), &family, &b, &opts)?
        }
    };
    let out = OutputDir::create(&a.out)?;
    write_signal(&out.path("solution.csv"), &trace.x)?;
    trace.write_csv(out.file(&format!("trace_{}.csv", method.name()))?)?;
    info!(
        "{} iterations, residual {:.3e}",
        trace.iterations,
        trace.residuals.last().copied().unwrap_or(f64::NAN)
    );
    if trace.diverged {
        return Err(Failure::Divergence(format!(
            "{} diverged after {} iterations",
            method.name(),
            trace.iterations
        )));
    }
    Ok(())
}

fn spectrum(a: SpectrumArgs) -> Res<()> {
    let family = family_from(&a.graph)?;
    family.spectrum()?.write_csv(File::create(&a.out)?)?;
    Ok(())
}
