//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use polyshift::distnet::{sim_filter_on, Network};
use polyshift::experiments::circulant::{circulant_lsym_family, exp_circulant};
use polyshift::experiments::denoise::{Mode, PenaltySource};
use polyshift::experiments::timevarying::{exp_timevarying, TimevaryingInstance};
use polyshift::experiments::{snr_db, ExperimentConfig, ExperimentKind};
use polyshift::graph::{
    build_path, build_random_geometric_connected, cartesian_product, Placement,
};
use polyshift::inverse::{
    cheb_sup_error, chebyshev_coeffs, gd0_solve, optimal_poly, solve_with, Approximant,
    SolveOptions,
};
use polyshift::operator::FnMap;
use polyshift::polyfilter::{apply, apply_cheb, materialize};
use polyshift::shifts::{
    circulant_family, circulant_laplacian_spectrum, dist_to_polynomial_set, kron_lift,
    recover_spectral_multiplier, validate_shift, Side,
};
use polyshift::{PolyCoeffs, ShiftFamily};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

const REFERENCE_ROWS: [(&str, [f64; 4]); 12] = [
    ("ARMA", [0.3259, 0.2583, 0.1423, 0.0718]),
    ("GD0", [0.2350, 0.0856, 0.0349, 0.0063]),
    ("ICPA1", [0.4494, 0.2191, 0.1103, 0.0295]),
    ("ICPA2", [0.1860, 0.0412, 0.0098, 0.0006]),
    ("ICPA3", [0.0979, 0.0113, 0.0014, 0.0000]),
    ("ICPA4", [0.0499, 0.0030, 0.0002, 0.0000]),
    ("ICPA5", [0.0225, 0.0007, 0.0000, 0.0000]),
    ("IOPA1", [0.1545, 0.0266, 0.0047, 0.0002]),
    ("IOPA2", [0.0365, 0.0019, 0.0001, 0.0000]),
    ("IOPA3", [0.0167, 0.0003, 0.0000, 0.0000]),
    ("IOPA4", [0.0044, 0.0000, 0.0000, 0.0000]),
    ("IOPA5", [0.0019, 0.0000, 0.0000, 0.0000]),
];

const ITERS_TO_TOL: [(&str, usize); 12] = [
    ("ARMA", 20),
    ("GD0", 8),
    ("ICPA1", 11),
    ("ICPA2", 5),
    ("IOPA1", 4),
    ("ICPA3", 4),
    ("ICPA4", 3),
    ("IOPA2", 3),
    ("ICPA5", 2),
    ("IOPA3", 2),
    ("IOPA4", 2),
    ("IOPA5", 2),
];

const IOPA_RATES: [f64; 6] = [0.4401, 0.1820, 0.0593, 0.0208, 0.0067, 0.0023];
const ICPA_RATES: [f64; 5] = [0.5485, 0.2804, 0.1459, 0.0685, 0.0334];
const A_L: [f64; 6] = [0.4502, 0.1852, 0.0612, 0.0212, 0.0072, 0.0025];
const B_K: [f64; 6] = [1.0463, 0.5837, 0.2924, 0.1467, 0.0728, 0.0367];

fn distributed_equals_centralized() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut off_edge = 0usize;
    for inst in 0..100 {
        let (graph, family) = match inst % 3 {
            // circulant generator shifts, d = |Q|
            0 | 1 => {
                let n = rng.random_range(10..=200);
                let d = rng.random_range(1..=3usize);
                let mut gens: Vec<usize> = Vec::new();
                while gens.len() < d {
                    let q = rng.random_range(1..(n - 1) / 2);
                    if !gens.contains(&q) {
                        gens.push(q);
                    }
                }
                gens.sort();
                circulant_family(n, &gens).map_err(|e| e.to_string())?
            }
            // random geometric graph times a path, Kronecker-lifted shifts
            _ => {
                let n1 = rng.random_range(8..=30);
                let m = rng.random_range(2..=6);
                let (g1, _) = build_random_geometric_connected(
                    n1,
                    0.45,
                    rng.random(),
                    Placement::Stratified,
                    200,
                )
                .map_err(|e| e.to_string())?;
                let g2 = build_path(m).unwrap();
                let prod = cartesian_product(&g1, &g2).unwrap();
                let a = kron_lift(g1.sym_normalized_laplacian().unwrap(), Side::Outer, m).unwrap();
                let b = kron_lift(g2.laplacian(), Side::Inner, n1).unwrap();
                let fam = ShiftFamily::new(vec![
                    validate_shift(a, &prod).unwrap(),
                    validate_shift(b, &prod).unwrap(),
                ])
                .map_err(|e| e.to_string())?;
                (prod, fam)
            }
        };
        let degrees: Vec<usize> = (0..family.d()).map(|_| rng.random_range(0..=4)).collect();
        let h = random_poly(degrees, &mut rng);
        let x = random_vec(graph.n(), &mut rng);
        let net = Network::new(&graph, &family)
            .map_err(|e| e.to_string())?
            .with_message_log();
        let (y, stats) = sim_filter_on(&net, &h, &x).map_err(|e| e.to_string())?;
        let want =
            materialize(&h, &family).map_err(|e| e.to_string())? * DVector::from_column_slice(&x);
        worst = worst.max(rel_err(&y, want.as_slice()));
        off_edge += stats.log.as_ref().map_or(0, |l| {
            l.iter().filter(|m| !graph.has_edge(m.src, m.dst)).count()
        });
    }
    check(
        worst <= 1e-9 && off_edge == 0,
        format!("100 instances, max rel err {worst:.2e}, 0 non-edge messages"),
        format!("max rel err {worst:.2e}, {off_edge} non-edge messages"),
    )
}

fn circulant_spectrum_h1() -> polyshift::JointSpectrum {
    circulant_laplacian_spectrum(1000, &[1, 2, 5])
}

fn optimal_poly_errors() -> Outcome {
    let sp = circulant_spectrum_h1();
    let got: Vec<f64> = (0..=5)
        .map(|l| optimal_poly(&h1(), &sp, l).map(|f| f.a))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let dev = got
        .iter()
        .zip(A_L)
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max);
    check(
        dev <= 5e-3,
        format!("a_L = {}, max dev {dev:.1e}", fmt(&got)),
        format!("a_L = {}, max dev {dev:.1e}", fmt(&got)),
    )
}

fn chebyshev_errors() -> Outcome {
    let got: Vec<f64> = (0..=5)
        .map(|k| {
            chebyshev_coeffs(&h1(), k, &[(0.0, 2.0)], None).map(|c| cheb_sup_error(&h1(), &c, None))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let dev = got
        .iter()
        .zip(B_K)
        .map(|(g, w)| (g - w).abs())
        .fold(0.0, f64::max);
    check(
        dev <= 5e-3,
        format!("b_K = {}, max dev {dev:.1e}", fmt(&got)),
        format!("b_K = {}, max dev {dev:.1e}", fmt(&got)),
    )
}

fn fmt(v: &[f64]) -> String {
    format!(
        "[{}]",
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(", ")
    )
}

struct CirculantRun {
    report: polyshift::experiments::circulant::CirculantReport,
}

fn circulant_errors(t: &CirculantRun) -> Outcome {
    let mut worst = (0.0, String::new());
    for (name, want) in REFERENCE_ROWS {
        let row = t.report.row(name).ok_or(format!("missing row {name}"))?;
        for (k, m) in [1usize, 2, 3, 5].iter().enumerate() {
            let d = (row.mean_errors[m - 1] - want[k]).abs();
            if d > worst.0 {
                worst = (d, format!("{name} m={m}"));
            }
        }
    }
    let icpa0 = t.report.row("ICPA0").is_some_and(|r| r.diverged);
    check(
        worst.0 <= 0.02 && icpa0,
        format!(
            "max |ΔE| {:.4} ({}), ICPA0 flagged divergent",
            worst.0, worst.1
        ),
        format!(
            "max |ΔE| {:.4} ({}), ICPA0 divergent: {icpa0}",
            worst.0, worst.1
        ),
    )
}

fn circulant_iterations(t: &CirculantRun) -> Outcome {
    let mut bad = Vec::new();
    for (name, want) in ITERS_TO_TOL {
        let got = t.report.row(name).and_then(|r| r.iterations_to_tol);
        if got.is_none_or(|g| g.abs_diff(want) > 1) {
            bad.push(format!("{name}: {got:?} vs {want}"));
        }
    }
    check(
        bad.is_empty(),
        "all 12 methods within ±1 iteration".into(),
        bad.join("; "),
    )
}

fn circulant_rates(t: &CirculantRun) -> Outcome {
    let mut worst = 0.0f64;
    let mut got = Vec::new();
    let pairs = (0..=5)
        .map(|l| (format!("IOPA{l}"), IOPA_RATES[l]))
        .chain((1..=5).map(|k| (format!("ICPA{k}"), ICPA_RATES[k - 1])));
    for (name, want) in pairs {
        let r = t
            .report
            .row(&name)
            .and_then(|r| r.rate)
            .ok_or(format!("no rate for {name}"))?;
        worst = worst.max((r - want).abs());
        got.push(format!("{name}={r:.4}"));
    }
    check(
        worst <= 0.05,
        format!("max |Δr| {worst:.4}: {}", got.join(" ")),
        format!("max |Δr| {worst:.4}: {}", got.join(" ")),
    )
}

fn identity_equivalences() -> Outcome {
    // IOPA0 against GD0 with the optimal step
    let fam = circulant_lsym_family(1000, &[1, 2, 5]).map_err(|e| e.to_string())?;
    let sp = fam.spectrum().map_err(|e| e.to_string())?;
    let h = h1();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_vec(1000, &mut rng);
    let b = apply(&h, &fam, &x).unwrap();
    let opts = SolveOptions {
        keep_iterates: true,
        ..SolveOptions::fixed(15)
    };
    let iopa0 = solve_with(
        &h,
        &optimal_poly(&h, sp, 0).unwrap().approximant(),
        &fam,
        &b,
        &opts,
    )
    .unwrap();
    let hv: Vec<f64> = (0..sp.len()).map(|i| h.eval_scalar(&sp.point(i))).collect();
    let gamma = 2.0
        / (hv.iter().copied().fold(f64::INFINITY, f64::min)
            + hv.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let hm = FnMap::new(1000, |v: &[f64]| apply(&h, &fam, v).unwrap());
    let gd = gd0_solve(&hm, &b, gamma, &opts);
    let d0 = iopa0
        .iterates
        .iter()
        .zip(&gd.iterates)
        .map(|(a, c)| rel_err(a, c))
        .fold(0.0, f64::max);

    // one ICPA step is one Chebyshev filter application
    let c = chebyshev_coeffs(&h, 3, &[(0.0, 2.0)], None).unwrap();
    let one = solve_with(
        &h,
        &Approximant::Chebyshev(c.clone()),
        &fam,
        &b,
        &SolveOptions::fixed(1),
    )
    .unwrap();
    let cpa = apply_cheb(&c, &fam, &b).unwrap();
    let exact = one.x == cpa;

    // partial sums against dense Neumann sums
    let mut d2 = 0.0f64;
    for n in [12usize, 25, 40] {
        let fam = random_commuting_family(n, 1, &mut rng);
        let h = PolyCoeffs::univariate(vec![2.0, 0.5, 0.3]);
        let g = optimal_poly(&h, fam.spectrum().unwrap(), 1).unwrap();
        let Approximant::Polynomial(gp) = g.approximant() else {
            unreachable!()
        };
        let hd = materialize(&h, &fam).unwrap();
        let gd = materialize(&gp, &fam).unwrap();
        let b = DVector::from_vec(random_vec(n, &mut rng));
        let tr = solve_with(
            &h,
            &g.approximant(),
            &fam,
            b.as_slice(),
            &SolveOptions {
                keep_iterates: true,
                ..SolveOptions::fixed(10)
            },
        )
        .unwrap();
        let t = DMatrix::identity(n, n) - &gd * &hd;
        let mut term = &gd * &b;
        let mut sum = DVector::zeros(n);
        for m in 1..=10 {
            sum += &term;
            term = &t * term;
            d2 = d2.max(rel_err(&tr.iterates[m], sum.as_slice()));
        }
    }
    check(
        d0 <= 1e-12 && exact && d2 <= 1e-10,
        format!("IOPA0 vs GD0 {d0:.1e}, ICPA x(1) bitwise equal, Neumann {d2:.1e}"),
        format!("IOPA0 vs GD0 {d0:.1e}, ICPA x(1) equal: {exact}, Neumann {d2:.1e}"),
    )
}

fn round_trip_and_sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(4..=20);
        let d = rng.random_range(1..=3);
        let fam = random_commuting_family(n, d, &mut rng);
        let h = random_poly((0..d).map(|_| rng.random_range(0..=3)).collect(), &mut rng);
        let hd = materialize(&h, &fam).unwrap();
        let rec = recover_spectral_multiplier(&hd, &fam).map_err(|e| e.to_string())?;
        let sp = fam.spectrum().unwrap();
        let v = match sp.transform() {
            polyshift::shifts::Transform::Orthogonal(v) => v.clone(),
            _ => return Err("expected an orthogonal basis".into()),
        };
        let vals: Vec<f64> = (0..n).map(|i| h.eval_scalar(&sp.point(i))).collect();
        let recon =
            &v * DMatrix::from_diagonal(&DVector::from_vec(rec.values.clone())) * v.transpose();
        worst = worst.max((&recon - &hd).norm());
        worst = worst.max(
            rec.values
                .iter()
                .zip(&vals)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
    }
    let mut violations = 0;
    let mut strict = 0;
    for _ in 0..200 {
        let n = rng.random_range(3..=15);
        let d = rng.random_range(1..=3);
        let fam = random_commuting_family(n, d, &mut rng);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let hd = (&a + a.transpose()) * 0.5;
        let b = dist_to_polynomial_set(&hd, &fam).map_err(|e| e.to_string())?;
        let tol = 1e-10 * (1.0 + b.exact);
        if b.lower > b.exact + tol || b.exact > b.upper + tol {
            violations += 1;
        }
        if b.lower < b.exact && b.exact < b.upper {
            strict += 1;
        }
    }
    check(
        worst <= 1e-8 && violations == 0,
        format!(
            "round-trip max {worst:.1e} over 50; sandwich held on 200 ({strict} strict both sides)"
        ),
        format!("round-trip max {worst:.1e}; {violations} sandwich violations"),
    )
}

fn denoising() -> Outcome {
    let cfg = ExperimentConfig {
        eta: vec![0.75, 0.5, 0.25],
        trials: 5,
        report_iterations: vec![1, 2, 4, 6],
        ..ExperimentConfig::for_kind(ExperimentKind::Timevarying)
    };
    let (rep, _) = exp_timevarying(&cfg).map_err(|e| e.to_string())?;
    let mut msgs = Vec::new();
    for &eta in &cfg.eta {
        let j = rep.row(eta, Mode::Joint, "IOPA1").ok_or("missing row")?;
        if j.snr_inf.is_nan() || j.snr_inf <= j.isnr {
            msgs.push(format!(
                "η={eta}: SNR(∞) {:.3} ≤ ISNR {:.3}",
                j.snr_inf, j.isnr
            ));
        }
        for mode in Mode::ALL {
            for m in ["IOPA1", "ICPA1"] {
                let r = rep.row(eta, mode, m).ok_or("missing row")?;
                let d = (r.snr[3] - r.snr_inf).abs();
                if d > 0.05 {
                    msgs.push(format!(
                        "η={eta} {} {m}: |SNR(6) − SNR(∞)| = {d:.3}",
                        mode.name()
                    ));
                }
            }
        }
    }
    // reduced instance: Kronecker iterative path against dense materialization
    let small = ExperimentConfig {
        n: 64,
        snapshots: 6,
        radius: 0.25,
        ..cfg.clone()
    };
    let inst = TimevaryingInstance::build(&small).map_err(|e| e.to_string())?;
    let truth = inst.truth.vectorize().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let y: Vec<f64> = truth
        .iter()
        .map(|v| v + rng.random_range(-0.5..0.5))
        .collect();
    let (a, b) = inst.penalties(0.5, PenaltySource::Truth, &y);
    let f = inst.filter(a, b);
    let fam = inst.problem.family();
    let dense = materialize(&f.h, fam).map_err(|e| e.to_string())?;
    let yd = DVector::from_column_slice(&y);
    let applied = apply(&f.h, fam, &y).unwrap();
    let apply_err = rel_err(&applied, (&dense * &yd).as_slice());
    let xd = dense.lu().solve(&yd).ok_or("singular dense filter")?;
    let g = optimal_poly(&f.h, inst.problem.spectrum(), 1)
        .unwrap()
        .approximant();
    let xi = solve_with(
        &f.h,
        &g,
        fam,
        &y,
        &SolveOptions {
            max_iter: 200,
            tol: 1e-14,
            ..Default::default()
        },
    )
    .unwrap()
    .x;
    let ddb = (snr_db(&xi, &truth) - snr_db(xd.as_slice(), &truth)).abs();
    if apply_err > 1e-9 || ddb > 1e-6 {
        msgs.push(format!(
            "reduced instance: apply {apply_err:.1e}, SNR gap {ddb:.1e} dB"
        ));
    }
    check(
        msgs.is_empty(),
        format!("SNR(∞) > ISNR for joint at η ∈ {{3/4,1/2,1/4}}; SNR(6) within 0.05 dB; Kronecker ≡ dense ({ddb:.1e} dB)"),
        msgs.join("; "),
    )
}

fn multiset_match(want: &[Vec<f64>], got: &[Vec<f64>], tol: f64) -> bool {
    if want.len() != got.len() {
        return false;
    }
    let mut used = vec![false; got.len()];
    want.iter().all(|w| {
        let hit = (0..got.len())
            .find(|&j| !used[j] && w.iter().zip(&got[j]).all(|(a, b)| (a - b).abs() <= tol));
        hit.map(|j| used[j] = true).is_some()
    })
}

fn joint_spectrum() -> Outcome {
    let (g1, _) = build_random_geometric_connected(24, 0.4, 3, Placement::Stratified, 200)
        .map_err(|e| e.to_string())?;
    let g2 = build_path(5).unwrap();
    let prod = cartesian_product(&g1, &g2).unwrap();
    let l1 = g1.sym_normalized_laplacian().unwrap();
    let l2 = g2.laplacian();
    let fam = ShiftFamily::new(vec![
        validate_shift(kron_lift(l1.clone(), Side::Outer, 5).unwrap(), &prod).unwrap(),
        validate_shift(kron_lift(l2.clone(), Side::Inner, 24).unwrap(), &prod).unwrap(),
    ])
    .map_err(|e| e.to_string())?;
    let sp = fam.spectrum().map_err(|e| e.to_string())?;
    let e1 = SymmetricEigen::new(l1.to_dense()).eigenvalues;
    let e2 = SymmetricEigen::new(l2.to_dense()).eigenvalues;
    let grid: Vec<Vec<f64>> = e1
        .iter()
        .flat_map(|&a| e2.iter().map(move |&b| vec![a, b]))
        .collect();
    let got: Vec<Vec<f64>> = (0..sp.len()).map(|i| sp.point(i)).collect();
    let grid_ok = multiset_match(&grid, &got, 1e-8);

    let g = polyshift::graph::build_circulant(256, &[1, 2, 5]).unwrap();
    let mut dense: Vec<f64> = SymmetricEigen::new(g.sym_normalized_laplacian().unwrap().to_dense())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    let mut analytic: Vec<f64> = circulant_laplacian_spectrum(256, &[1, 2, 5])
        .points()
        .iter()
        .copied()
        .collect();
    dense.sort_by(f64::total_cmp);
    analytic.sort_by(f64::total_cmp);
    let dev = dense
        .iter()
        .zip(&analytic)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(
        grid_ok && dev <= 1e-10,
        format!("product spectrum is the 24×5 grid; circulant N=256 analytic vs dense {dev:.1e}"),
        format!("grid match {grid_ok}; circulant dev {dev:.1e}"),
    )
}

fn main() {
    let _ = env_logger::builder().is_test(true).try_init();
    let started = Instant::now();
    let circulant_run =
        exp_circulant(&ExperimentConfig::default()).map(|report| CirculantRun { report });
    let with_table = |f: fn(&CirculantRun) -> Outcome| -> Outcome {
        match &circulant_run {
            Ok(t) => f(t),
            Err(e) => Err(format!("circulant experiment failed: {e}")),
        }
    };
    let results: Vec<(&str, Outcome)> = vec![
        (
            "distributed filtering equals centralized",
            distributed_equals_centralized(),
        ),
        ("optimal polynomial errors a_0..a_5", optimal_poly_errors()),
        ("Chebyshev errors b_0..b_5", chebyshev_errors()),
        (
            "mean relative errors on the N=1000 circulant",
            with_table(circulant_errors),
        ),
        ("iterations to 1e-3", with_table(circulant_iterations)),
        ("fitted convergence rates", with_table(circulant_rates)),
        ("identity equivalences", identity_equivalences()),
        (
            "spectral round-trip and distance sandwich",
            round_trip_and_sandwich(),
        ),
        ("time-varying denoising", denoising()),
        ("joint spectrum correctness", joint_spectrum()),
    ];
    let mut failed = 0;
    for (k, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", k + 1)
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:.1?}",
        results.len() - failed,
        results.len(),
        started.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
