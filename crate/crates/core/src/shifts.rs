//! Graph shifts, commuting families, and their joint spectrum.
//!
//! A shift is an operator whose nonzero entries only couple a vertex to
//! itself or to an adjacent vertex. A family of commuting shifts can be
//! simultaneously triangularized (diagonalized, when symmetric); the matched
//! diagonal entries form the joint spectrum that the inverse-filter
//! approximations are fitted on.

use std::io::Write;
use std::sync::OnceLock;

use log::{debug, warn};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{build_circulant, Graph};
use crate::operator::{Factor, KronOperator, LinearMap, Operator};
use crate::sparse::Csr;

/// Relative tolerance for pairwise commutators, ‖[A,B]‖_F ≤ tol·‖A‖_F‖B‖_F.
pub const COMMUTE_TOL: f64 = 1e-10;
/// Relative off-diagonal mass accepted after simultaneous diagonalization.
pub const DIAG_TOL: f64 = 1e-8;
/// Eigenvalue gap below which a random combination is treated as degenerate.
pub const GAP_TOL: f64 = 1e-6;
const MAX_COMBINATION_ATTEMPTS: usize = 10;

/// An operator with geodesic-width at most one relative to its host graph.
#[derive(Debug, Clone)]
pub struct Shift {
    op: Operator,
    symmetric: bool,
}

impl Shift {
    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_structured(&self) -> bool {
        self.op.is_structured()
    }

    pub fn to_csr(&self) -> Csr {
        self.op.to_csr()
    }

    /// Wraps an operator without checking locality. Used when the host graph
    /// is implicit (e.g. spectra-only experiments).
    pub fn unchecked(op: Operator) -> Self {
        let symmetric = is_symmetric_op(&op);
        Shift { op, symmetric }
    }
}

impl LinearMap for Shift {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply_into(x, y)
    }

    fn mults(&self) -> usize {
        self.op.mults()
    }
}

fn is_symmetric_op(op: &Operator) -> bool {
    match op {
        Operator::Sparse(m) => m.is_symmetric(1e-14),
        Operator::Kron(k) => [&k.outer, &k.inner].iter().all(|f| match f {
            Factor::Identity(_) => true,
            Factor::Matrix(m) => m.is_symmetric(1e-14),
        }),
    }
}

/// Accepts `op` as a shift on `graph` if every off-diagonal nonzero joins
/// adjacent vertices.
pub fn validate_shift(op: Operator, graph: &Graph) -> Result<Shift> {
    if op.dim() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            got: op.dim(),
        });
    }
    for (i, j, v) in op.entries() {
        if i != j && v != 0.0 && !graph.has_edge(i, j) {
            return Err(Error::WidthViolation {
                i,
                j,
                width: graph.bfs(i)[j],
            });
        }
    }
    Ok(Shift::unchecked(op))
}

/// Frobenius norms of all pairwise commutators, keyed by (k, k').
pub fn commutator_norms(ops: &[&Operator]) -> Result<Vec<((usize, usize), f64)>> {
    let n = ops.first().map_or(0, |o| o.dim());
    if let Some(o) = ops.iter().find(|o| o.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: o.dim(),
        });
    }
    let mats: Vec<Csr> = ops.iter().map(|o| o.to_csr()).collect();
    let mut out = Vec::new();
    for a in 0..mats.len() {
        for b in a + 1..mats.len() {
            let c = mats[a]
                .matmul(&mats[b])
                .add_scaled(1.0, &mats[b].matmul(&mats[a]), -1.0);
            out.push(((a, b), c.frobenius_norm()));
        }
    }
    Ok(out)
}

pub fn max_commutator_norm(ops: &[&Operator]) -> Result<f64> {
    Ok(commutator_norms(ops)?
        .into_iter()
        .map(|(_, v)| v)
        .fold(0.0, f64::max))
}

/// Ordered list of commuting shifts sharing one host graph.
#[derive(Debug)]
pub struct ShiftFamily {
    shifts: Vec<Shift>,
    symmetric: bool,
    spectrum: OnceLock<JointSpectrum>,
}

impl Clone for ShiftFamily {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        ShiftFamily {
            shifts: self.shifts.clone(),
            symmetric: self.symmetric,
            spectrum,
        }
    }
}

impl ShiftFamily {
    /// Checks pairwise commutativity to [`COMMUTE_TOL`].
    pub fn new(shifts: Vec<Shift>) -> Result<Self> {
        let ops: Vec<&Operator> = shifts.iter().map(|s| &s.op).collect();
        let norms: Vec<f64> = shifts.iter().map(|s| s.to_csr().frobenius_norm()).collect();
        for ((a, b), c) in commutator_norms(&ops)? {
            if c > COMMUTE_TOL * norms[a] * norms[b] {
                return Err(Error::NonCommuting { a, b, norm: c });
            }
        }
        Ok(Self::new_unchecked(shifts))
    }

    /// Skips the commutator check, for families whose commutativity is known
    /// structurally and whose size makes the sparse products wasteful.
    pub fn new_unchecked(shifts: Vec<Shift>) -> Self {
        let symmetric = shifts.iter().all(Shift::is_symmetric);
        ShiftFamily {
            shifts,
            symmetric,
            spectrum: OnceLock::new(),
        }
    }

    /// Attaches a precomputed spectrum (e.g. the analytic circulant one).
    pub fn with_spectrum(self, spectrum: JointSpectrum) -> Self {
        assert_eq!(spectrum.d(), self.d());
        let _ = self.spectrum.set(spectrum);
        self
    }

    pub fn shifts(&self) -> &[Shift] {
        &self.shifts
    }

    pub fn d(&self) -> usize {
        self.shifts.len()
    }

    pub fn dim(&self) -> usize {
        self.shifts.first().map_or(0, Shift::dim)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn has_structured(&self) -> bool {
        self.shifts.iter().any(Shift::is_structured)
    }

    /// Cached joint spectrum, computed on first use.
    pub fn spectrum(&self) -> Result<&JointSpectrum> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = compute_joint_spectrum(self, 0x5eed)?;
        Ok(self.spectrum.get_or_init(|| s))
    }

    pub fn cached_spectrum(&self) -> Option<&JointSpectrum> {
        self.spectrum.get()
    }

    /// Same shifts with Kronecker factors expanded into explicit CSR.
    pub fn materialized(&self) -> ShiftFamily {
        let shifts = self
            .shifts
            .iter()
            .map(|s| Shift {
                op: Operator::Sparse(s.to_csr()),
                symmetric: s.symmetric,
            })
            .collect();
        let mut f = ShiftFamily::new_unchecked(shifts);
        if let Some(s) = self.spectrum.get() {
            f = f.with_spectrum(s.clone());
        }
        f
    }
}

/// I − ½(B^q + B^{−q}) with B the cyclic shift; equals the normalized
/// Laplacian of C(N, {q}).
pub fn circulant_generator_shift(n: usize, q: usize) -> Result<Csr> {
    if q == 0 || 2 * q >= n {
        return Err(Error::InvalidGenerator { n, q });
    }
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        t.push((i, i, 1.0));
        t.push((i, (i + q) % n, -0.5));
        t.push((i, (i + n - q) % n, -0.5));
    }
    Ok(Csr::from_triplets(n, n, t))
}

/// C(N, Q) together with the commuting generator shifts L_sym(C(N,{q_k})).
pub fn circulant_family(n: usize, generators: &[usize]) -> Result<(Graph, ShiftFamily)> {
    let g = build_circulant(n, generators)?;
    let shifts = generators
        .iter()
        .map(|&q| validate_shift(Operator::Sparse(circulant_generator_shift(n, q)?), &g))
        .collect::<Result<Vec<_>>>()?;
    let spectrum = circulant_generator_spectrum(n, generators);
    Ok((
        g,
        ShiftFamily::new_unchecked(shifts).with_spectrum(spectrum),
    ))
}

/// Analytic joint spectrum of {L_sym(C(N,{q_k}))}: λ_f = (1 − cos(2π q_k f/N))_k.
pub fn circulant_generator_spectrum(n: usize, generators: &[usize]) -> JointSpectrum {
    let d = generators.len();
    let pts = DMatrix::from_fn(n, d, |f, k| {
        1.0 - (2.0 * std::f64::consts::PI * (generators[k] * f % n) as f64 / n as f64).cos()
    });
    JointSpectrum::from_points(pts)
}

/// Analytic spectrum of the single shift L_sym(C(N, Q)):
/// λ_f = 1 − |Q|⁻¹ Σ_q cos(2π q f/N).
pub fn circulant_laplacian_spectrum(n: usize, generators: &[usize]) -> JointSpectrum {
    let pts = DMatrix::from_fn(n, 1, |f, _| {
        let s: f64 = generators
            .iter()
            .map(|&q| (2.0 * std::f64::consts::PI * (q * f % n) as f64 / n as f64).cos())
            .sum();
        1.0 - s / generators.len() as f64
    });
    JointSpectrum::from_points(pts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// A ⊗ I
    Outer,
    /// I ⊗ A
    Inner,
}

/// Lifts a factor operator onto a product space without materializing.
pub fn kron_lift(l: Csr, side: Side, other_size: usize) -> Result<Operator> {
    if !l.is_square() {
        return Err(Error::DimensionMismatch {
            expected: l.rows(),
            got: l.cols(),
        });
    }
    let k = match side {
        Side::Outer => KronOperator {
            outer: Factor::Matrix(l),
            inner: Factor::Identity(other_size),
        },
        Side::Inner => KronOperator {
            outer: Factor::Identity(other_size),
            inner: Factor::Matrix(l),
        },
    };
    Ok(Operator::Kron(k))
}

/// Columns of the simultaneous (un)triangularizing transform.
#[derive(Debug, Clone)]
pub enum Transform {
    /// Spectrum known analytically; no basis stored.
    None,
    /// Real orthogonal V with Vᵀ S_k V diagonal.
    Orthogonal(DMatrix<f64>),
    /// Unitary Q with Qᴴ S_k Q upper triangular.
    Unitary(DMatrix<Complex64>),
}

/// N joint eigenvalues in R^d (or C^d) plus the transform that exposes them.
#[derive(Debug, Clone)]
pub struct JointSpectrum {
    re: DMatrix<f64>,
    im: Option<DMatrix<f64>>,
    transform: Transform,
    distinct: bool,
}

impl JointSpectrum {
    pub fn from_points(points: DMatrix<f64>) -> Self {
        let distinct = rows_distinct(&points, None);
        JointSpectrum {
            re: points,
            im: None,
            transform: Transform::None,
            distinct,
        }
    }

    pub fn len(&self) -> usize {
        self.re.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d(&self) -> usize {
        self.re.ncols()
    }

    pub fn is_real(&self) -> bool {
        self.im
            .as_ref()
            .is_none_or(|m| m.iter().all(|v| v.abs() <= 1e-12))
    }

    pub fn is_distinct(&self) -> bool {
        self.distinct
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    /// Real parts, N × d.
    pub fn points(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn imag(&self) -> Option<&DMatrix<f64>> {
        self.im.as_ref()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.re.row(i).iter().copied().collect()
    }

    /// Per-dimension [min, max] of the real parts.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.d())
            .map(|k| {
                let c = self.re.column(k);
                (c.min(), c.max())
            })
            .collect()
    }

    /// Points merged to `tol` in ∞-norm, in first-seen order.
    pub fn dedup_points(&self, tol: f64) -> Vec<Vec<f64>> {
        let mut sorted: Vec<Vec<f64>> = (0..self.len()).map(|i| self.point(i)).collect();
        sorted.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut out: Vec<Vec<f64>> = Vec::new();
        for p in sorted {
            // lexicographic order only keeps near-equal points adjacent in the
            // first coordinate, so scan back while that coordinate is close
            let dup = out
                .iter()
                .rev()
                .take_while(|q| (q[0] - p[0]).abs() <= tol)
                .any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= tol));
            if !dup {
                out.push(p);
            }
        }
        out
    }

    /// Writes "i,lambda_1,...,lambda_d" rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["i".to_string()];
        header.extend((1..=self.d()).map(|k| format!("lambda_{k}")));
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![i.to_string()];
            rec.extend(self.re.row(i).iter().map(|v| format!("{v:.17e}")));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Pairwise distinctness with tolerance 1e−8·(1 + max|λ|) in the ∞-norm.
fn rows_distinct(re: &DMatrix<f64>, im: Option<&DMatrix<f64>>) -> bool {
    let scale = 1.0 + re.amax().max(im.map_or(0.0, |m| m.amax()));
    let tol = 1e-8 * scale;
    let n = re.nrows();
    // sort by first coordinate so only a window needs comparing
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| re[(a, 0)].total_cmp(&re[(b, 0)]));
    for (p, &a) in order.iter().enumerate() {
        for &b in order[p + 1..].iter() {
            if re[(b, 0)] - re[(a, 0)] > tol {
                break;
            }
            let close_re = (0..re.ncols()).all(|k| (re[(a, k)] - re[(b, k)]).abs() < tol);
            let close_im =
                im.is_none_or(|m| (0..m.ncols()).all(|k| (m[(a, k)] - m[(b, k)]).abs() < tol));
            if close_re && close_im {
                return false;
            }
        }
    }
    true
}

fn dense_shifts(family: &ShiftFamily) -> Vec<DMatrix<f64>> {
    family.shifts.iter().map(|s| s.op.to_dense()).collect()
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Simultaneous diagonalization (symmetric families) or triangularization
/// (general families) through a random linear combination of the shifts.
pub fn compute_joint_spectrum(family: &ShiftFamily, seed: u64) -> Result<JointSpectrum> {
    let n = family.dim();
    let d = family.d();
    if d == 0 {
        return Err(Error::InvalidSize("empty shift family".into()));
    }
    let mats = dense_shifts(family);
    let norms: Vec<f64> = mats.iter().map(|m| m.norm()).collect();
    let ops: Vec<&Operator> = family.shifts.iter().map(|s| &s.op).collect();
    for ((a, b), c) in commutator_norms(&ops)? {
        if c > COMMUTE_TOL * norms[a] * norms[b] {
            return Err(Error::NonCommuting { a, b, norm: c });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if family.symmetric {
        symmetric_joint_spectrum(&mats, &norms, n, &mut rng)
    } else {
        schur_joint_spectrum(&mats, &norms, n, &mut rng)
    }
}

fn random_combination(mats: &[DMatrix<f64>], norms: &[f64], rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = mats[0].nrows();
    let mut t = DMatrix::zeros(n, n);
    for (m, &nm) in mats.iter().zip(norms) {
        let c: f64 = StandardNormal.sample(rng);
        let w = if nm > 0.0 { c / nm } else { c };
        t += m * w;
    }
    t
}

fn diag_residuals(mats: &[DMatrix<f64>], v: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, Vec<f64>) {
    let hats: Vec<DMatrix<f64>> = mats.iter().map(|m| v.transpose() * m * v).collect();
    let res = hats.iter().map(off_diagonal_norm).collect();
    (hats, res)
}

fn symmetric_joint_spectrum(
    mats: &[DMatrix<f64>],
    norms: &[f64],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<JointSpectrum> {
    let ok = |res: &[f64]| {
        res.iter()
            .zip(norms)
            .all(|(r, nm)| *r <= DIAG_TOL * nm.max(f64::MIN_POSITIVE))
    };
    let mut best: Option<(DMatrix<f64>, f64)> = None;
    for attempt in 0..MAX_COMBINATION_ATTEMPTS {
        let t = random_combination(mats, norms, rng);
        let eig = SymmetricEigen::new(t);
        let v = eig.eigenvectors;
        let (hats, res) = diag_residuals(mats, &v);
        if ok(&res) {
            return Ok(spectrum_from_hats(&hats, Transform::Orthogonal(v)));
        }
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let gap = ev
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        debug!("joint diagonalization attempt {attempt}: min gap {gap:e}, residuals {res:?}");
        let total: f64 = res.iter().sum();
        if best.as_ref().is_none_or(|(_, b)| total < *b) {
            best = Some((v, total));
        }
        if gap >= GAP_TOL {
            // a well-separated combination that still fails to diagonalize
            // means the family is not simultaneously diagonalizable
            break;
        }
    }
    warn!("random-combination diagonalization degenerate; falling back to Jacobi sweeps");
    let (v0, _) = best.expect("at least one attempt");
    let v = jacobi_joint_diagonalize(mats, v0, n);
    let (hats, res) = diag_residuals(mats, &v);
    if !ok(&res) {
        let worst = res
            .iter()
            .zip(norms)
            .map(|(r, nm)| r / nm.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        return Err(Error::TriangularizationResidual {
            residual: worst,
            tol: DIAG_TOL,
        });
    }
    Ok(spectrum_from_hats(&hats, Transform::Orthogonal(v)))
}

/// Jacobi-type joint diagonalization by plane rotations (real symmetric
/// case), starting from the basis `v`.
fn jacobi_joint_diagonalize(mats: &[DMatrix<f64>], mut v: DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut a: Vec<DMatrix<f64>> = mats.iter().map(|m| v.transpose() * m * &v).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
                for m in &a {
                    let h0 = m[(p, p)] - m[(q, q)];
                    let h1 = m[(p, q)] + m[(q, p)];
                    g11 += h0 * h0;
                    g12 += h0 * h1;
                    g22 += h1 * h1;
                }
                // principal eigenvector of [[g11, g12], [g12, g22]]
                let ton = g11 - g22;
                let toff = 2.0 * g12;
                let theta = 0.5 * toff.atan2(ton + (ton * ton + toff * toff).sqrt());
                let (mut x, mut y) = (theta.cos(), theta.sin());
                if x < 0.0 {
                    x = -x;
                    y = -y;
                }
                let r = (x * x + y * y).sqrt();
                if r == 0.0 {
                    continue;
                }
                let c = ((x + r) / (2.0 * r)).sqrt();
                let s = y / (2.0 * r * (x + r)).sqrt();
                if s.abs() < 1e-15 {
                    continue;
                }
                rotated = true;
                for m in a.iter_mut() {
                    for j in 0..n {
                        let (mp, mq) = (m[(p, j)], m[(q, j)]);
                        m[(p, j)] = c * mp + s * mq;
                        m[(q, j)] = -s * mp + c * mq;
                    }
                    for i in 0..n {
                        let (mp, mq) = (m[(i, p)], m[(i, q)]);
                        m[(i, p)] = c * mp + s * mq;
                        m[(i, q)] = -s * mp + c * mq;
                    }
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp + s * vq;
                    v[(i, q)] = -s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

fn spectrum_from_hats(hats: &[DMatrix<f64>], transform: Transform) -> JointSpectrum {
    let n = hats[0].nrows();
    let re = DMatrix::from_fn(n, hats.len(), |i, k| hats[k][(i, i)]);
    let distinct = rows_distinct(&re, None);
    JointSpectrum {
        re,
        im: None,
        transform,
        distinct,
    }
}

fn schur_joint_spectrum(
    mats: &[DMatrix<f64>],
    norms: &[f64],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<JointSpectrum> {
    let cmats: Vec<DMatrix<Complex64>> = mats
        .iter()
        .map(|m| m.map(|v| Complex64::new(v, 0.0)))
        .collect();
    let mut worst_seen = f64::INFINITY;
    for _ in 0..MAX_COMBINATION_ATTEMPTS {
        let t = random_combination(mats, norms, rng).map(|v| Complex64::new(v, 0.0));
        let schur = nalgebra::Schur::new(t);
        let (q, _) = schur.unpack();
        let qh = q.adjoint();
        let hats: Vec<DMatrix<Complex64>> = cmats.iter().map(|m| &qh * m * &q).collect();
        let mut worst: f64 = 0.0;
        for (h, nm) in hats.iter().zip(norms) {
            let mut lower = 0.0;
            for j in 0..n {
                for i in j + 1..n {
                    lower += h[(i, j)].norm_sqr();
                }
            }
            worst = worst.max(lower.sqrt() / nm.max(f64::MIN_POSITIVE));
        }
        if worst <= DIAG_TOL {
            let re = DMatrix::from_fn(n, hats.len(), |i, k| hats[k][(i, i)].re);
            let im = DMatrix::from_fn(n, hats.len(), |i, k| hats[k][(i, i)].im);
            let distinct = rows_distinct(&re, Some(&im));
            return Ok(JointSpectrum {
                re,
                im: Some(im),
                transform: Transform::Unitary(q),
                distinct,
            });
        }
        worst_seen = worst_seen.min(worst);
    }
    Err(Error::TriangularizationResidual {
        residual: worst_seen,
        tol: DIAG_TOL,
    })
}

fn commutator_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Spectral multiplier values ĥ_i of a filter that commutes with the family.
#[derive(Debug, Clone)]
pub struct RecoveredMultiplier {
    pub values: Vec<f64>,
    /// ‖H − V diag(ĥ) Vᵀ‖_F
    pub residual: f64,
}

/// Reads ĥ_i = (Vᵀ H V)_{ii} and certifies that H is exactly that multiplier,
/// i.e. a polynomial in the shifts interpolating ĥ on the joint spectrum.
pub fn recover_spectral_multiplier(
    h: &DMatrix<f64>,
    family: &ShiftFamily,
) -> Result<RecoveredMultiplier> {
    let spectrum = family.spectrum()?;
    if !spectrum.is_distinct() {
        return Err(Error::NonDistinctSpectrum);
    }
    let Transform::Orthogonal(v) = spectrum.transform() else {
        return Err(Error::Unsupported(
            "multiplier recovery needs an orthogonal joint eigenbasis".into(),
        ));
    };
    let hn = h.norm();
    for (k, s) in dense_shifts(family).iter().enumerate() {
        let c = commutator_dense(h, s).norm();
        if c > DIAG_TOL * hn.max(1.0) * s.norm().max(1.0) {
            return Err(Error::FilterNotCommuting { k, norm: c });
        }
    }
    let hat = v.transpose() * h * v;
    let values: Vec<f64> = (0..hat.nrows()).map(|i| hat[(i, i)]).collect();
    let recon =
        v * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values.clone())) * v.transpose();
    let residual = (h - recon).norm();
    if residual > DIAG_TOL * hn.max(1.0) {
        return Err(Error::TriangularizationResidual {
            residual,
            tol: DIAG_TOL,
        });
    }
    Ok(RecoveredMultiplier { values, residual })
}

/// Frobenius distance from a filter to the polynomials of the family, with
/// the commutator-based lower and upper bounds.
#[derive(Debug, Clone, Copy)]
pub struct DistanceBounds {
    pub exact: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn dist_to_polynomial_set(h: &DMatrix<f64>, family: &ShiftFamily) -> Result<DistanceBounds> {
    let spectrum = family.spectrum()?;
    if !spectrum.is_distinct() {
        return Err(Error::NonDistinctSpectrum);
    }
    let Transform::Orthogonal(v) = spectrum.transform() else {
        return Err(Error::Unsupported(
            "distance bounds need a symmetric family".into(),
        ));
    };
    let hat = v.transpose() * h * v;
    let exact = off_diagonal_norm(&hat);
    let mats = dense_shifts(family);
    let comm: Vec<f64> = mats.iter().map(|s| commutator_dense(h, s).norm()).collect();
    let lower = comm
        .iter()
        .zip(&mats)
        .map(|(c, s)| c / (2.0 * s.norm()))
        .fold(0.0, f64::max);
    let pts = spectrum.points();
    let mut min_gap = f64::INFINITY;
    for i in 0..pts.nrows() {
        for j in i + 1..pts.nrows() {
            let g: f64 = (0..pts.ncols())
                .map(|k| (pts[(i, k)] - pts[(j, k)]).powi(2))
                .sum();
            min_gap = min_gap.min(g.sqrt());
        }
    }
    let upper = comm.iter().map(|c| c * c).sum::<f64>().sqrt() / min_gap;
    Ok(DistanceBounds {
        exact,
        lower,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_circulant, build_path, cartesian_product};

    #[test]
    fn generator_shift_first_row() {
        let s = circulant_generator_shift(4, 1).unwrap().to_dense();
        assert_eq!(
            s.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, -0.5, 0.0, -0.5]
        );
        assert!(circulant_generator_shift(8, 4).is_err());
        let l = build_circulant(9, &[2])
            .unwrap()
            .sym_normalized_laplacian()
            .unwrap();
        assert_eq!(circulant_generator_shift(9, 2).unwrap(), l);
    }

    #[test]
    fn validate_rejects_wide_operator() {
        let g = build_circulant(12, &[1]).unwrap();
        let l = g.sym_normalized_laplacian().unwrap();
        assert!(validate_shift(Operator::Sparse(l.clone()), &g).is_ok());
        assert!(validate_shift(Operator::Sparse(Csr::identity(12)), &g).is_ok());
        let l2 = l.matmul(&l);
        match validate_shift(Operator::Sparse(l2), &g) {
            Err(Error::WidthViolation { width: Some(2), .. }) => {}
            other => panic!("expected width-2 violation, got {other:?}"),
        }
    }

    #[test]
    fn circulant_generators_commute() {
        for n in [20, 100, 1000] {
            let a = Operator::Sparse(circulant_generator_shift(n, 1).unwrap());
            let b = Operator::Sparse(circulant_generator_shift(n, 2).unwrap());
            assert!(max_commutator_norm(&[&a, &b]).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn non_commuting_pair_detected() {
        let g = build_path(3).unwrap();
        let l = g.sym_normalized_laplacian().unwrap();
        let r = Csr::from_dense(&DMatrix::from_row_slice(
            3,
            3,
            &[0.3, 0.7, 0.0, 0.7, -1.1, 0.2, 0.0, 0.2, 0.5],
        ));
        let ops = [Operator::Sparse(l), Operator::Sparse(r)];
        let refs: Vec<&Operator> = ops.iter().collect();
        assert!(max_commutator_norm(&refs).unwrap() > 1e-3);
        let shifts = ops
            .iter()
            .cloned()
            .map(|o| validate_shift(o, &g).unwrap())
            .collect();
        assert!(matches!(
            ShiftFamily::new(shifts),
            Err(Error::NonCommuting { .. })
        ));
    }

    #[test]
    fn cycle_spectrum() {
        let g = build_circulant(8, &[1]).unwrap();
        let fam = ShiftFamily::new(vec![validate_shift(
            Operator::Sparse(g.sym_normalized_laplacian().unwrap()),
            &g,
        )
        .unwrap()])
        .unwrap();
        let sp = compute_joint_spectrum(&fam, 1).unwrap();
        let mut got: Vec<f64> = sp.points().column(0).iter().copied().collect();
        got.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = (0..8)
            .map(|k| 1.0 - (std::f64::consts::PI * k as f64 / 4.0).cos())
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(!sp.is_distinct());
    }

    #[test]
    fn product_family_spectrum_is_grid() {
        let (p3, p4) = (build_path(3).unwrap(), build_path(4).unwrap());
        let prod = cartesian_product(&p3, &p4).unwrap();
        let a = kron_lift(p3.sym_normalized_laplacian().unwrap(), Side::Outer, 4).unwrap();
        let b = kron_lift(p4.sym_normalized_laplacian().unwrap(), Side::Inner, 3).unwrap();
        let fam = ShiftFamily::new(vec![
            validate_shift(a, &prod).unwrap(),
            validate_shift(b, &prod).unwrap(),
        ])
        .unwrap();
        let sp = fam.spectrum().unwrap();
        assert!(sp.is_distinct());
        let e3 = [0.0, 1.0, 2.0];
        let e4: Vec<f64> = (0..4)
            .map(|k| 1.0 - (std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect();
        let mut grid: Vec<(f64, f64)> = e3
            .iter()
            .flat_map(|&x| e4.iter().map(move |&y| (x, y)))
            .collect();
        let mut got: Vec<(f64, f64)> = (0..12)
            .map(|i| (sp.points()[(i, 0)], sp.points()[(i, 1)]))
            .collect();
        let key = |p: &(f64, f64)| ((p.0 * 1e6).round() as i64, (p.1 * 1e6).round() as i64);
        grid.sort_by_key(key);
        got.sort_by_key(key);
        for (a, b) in grid.iter().zip(&got) {
            assert!(
                (a.0 - b.0).abs() < 1e-8 && (a.1 - b.1).abs() < 1e-8,
                "{a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn jacobi_fallback_diagonalizes_commuting_pair() {
        // identical shifts make every combination degenerate along the
        // repeated eigenvalues of a path-3 product, exercising the sweeps
        let p = build_path(3).unwrap();
        let prod = cartesian_product(&p, &p).unwrap();
        let l = p.sym_normalized_laplacian().unwrap();
        let a = kron_lift(l.clone(), Side::Outer, 3).unwrap().to_dense();
        let b = kron_lift(l, Side::Inner, 3).unwrap().to_dense();
        let mats = vec![a.clone(), b.clone()];
        // start from a deliberately bad basis: eigenvectors of A alone
        let v0 = SymmetricEigen::new(a.clone()).eigenvectors;
        let v = jacobi_joint_diagonalize(&mats, v0, prod.n());
        let (_, res) = diag_residuals(&mats, &v);
        assert!(res.iter().all(|r| *r < 1e-10), "{res:?}");
    }

    #[test]
    fn complex_schur_path_for_directed_cycle() {
        // B and B² (cyclic shifts) commute but are not symmetric
        let n = 5;
        let b = Csr::from_triplets(n, n, (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect());
        let b2 = b.matmul(&b);
        let fam = ShiftFamily::new(vec![
            Shift::unchecked(Operator::Sparse(b)),
            Shift::unchecked(Operator::Sparse(b2)),
        ])
        .unwrap();
        let sp = compute_joint_spectrum(&fam, 3).unwrap();
        assert!(!sp.is_real());
        let im = sp.imag().unwrap();
        for i in 0..n {
            let z = Complex64::new(sp.points()[(i, 0)], im[(i, 0)]);
            let z2 = Complex64::new(sp.points()[(i, 1)], im[(i, 1)]);
            assert!((z.norm() - 1.0).abs() < 1e-10);
            assert!((z * z - z2).norm() < 1e-9);
        }
    }

    #[test]
    fn dedup_merges_close_points() {
        let sp = circulant_laplacian_spectrum(10, &[1]);
        assert_eq!(sp.dedup_points(1e-10).len(), 6);
    }

    #[test]
    fn spectrum_csv_header() {
        let sp = circulant_generator_spectrum(4, &[1]);
        let mut buf = Vec::new();
        sp.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("i,lambda_1\n0,"));
        assert_eq!(s.lines().count(), 5);
    }
}
