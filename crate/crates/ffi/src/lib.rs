//! C ABI over `polyshift`.
//!
//! Objects cross the boundary as opaque handles created by `ps_*_new`-style
//! constructors and released with the matching `ps_*_free`. Every fallible
//! call returns a [`PsStatus`]; on failure [`ps_last_error_message`] holds a
//! description for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use polyshift::distnet::sim_filter;
use polyshift::graph::{build_circulant, Graph};
use polyshift::inverse::{
    arma_solve, chebyshev_coeffs, gd0_solve, optimal_poly, solve_with, Approximant, SolveOptions,
    SolveTrace,
};
use polyshift::operator::{FnMap, Operator};
use polyshift::polyfilter::{apply, cheb_to_monomial, FilterSpec};
use polyshift::shifts::{circulant_family, circulant_laplacian_spectrum, validate_shift};
use polyshift::{Error, PolyCoeffs, ShiftFamily};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// A structural check failed: non-commuting shifts, singular filter,
    /// unstable recursion, LP failure.
    Numerical = 4,
    /// The solver ran but its iterates blew up; the output is still written.
    Diverged = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsShiftKind {
    /// Symmetric normalized Laplacian.
    Lsym = 0,
    Laplacian = 1,
    Adjacency = 2,
    /// One normalized Laplacian per circulant generator.
    Generators = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsMethod {
    Iopa = 0,
    Icpa = 1,
    Gd0 = 2,
    Arma = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PsSolveOptions {
    pub max_iter: usize,
    /// Relative residual at which to stop; 0 runs all `max_iter` iterations.
    pub tol: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsSolveInfo {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub diverged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsCommStats {
    pub rounds: usize,
    pub messages: usize,
    pub flops: usize,
}

pub struct PsGraph {
    graph: Graph,
    generators: Option<Vec<usize>>,
}

pub struct PsFamily {
    family: ShiftFamily,
    graph: Graph,
}

pub struct PsFilter {
    h: PolyCoeffs,
}

struct Failure(PsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::DimensionMismatch { .. } => PsStatus::DimensionMismatch,
            Error::Io(_) => PsStatus::Io,
            Error::InvalidGenerator { .. }
            | Error::InvalidSize(_)
            | Error::InvalidK { .. }
            | Error::IsolatedVertex(_)
            | Error::Parse { .. }
            | Error::Config(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Unsupported(_)
            | Error::DenseCapExceeded { .. }
            | Error::DegreeCapExceeded { .. } => PsStatus::InvalidArgument,
            _ => PsStatus::Numerical,
        };
        Failure(code, e.to_string())
    }
}

fn fail<T>(code: PsStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(code, msg.into()))
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PsStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(Failure(code, msg))) => {
            set_last_error(&msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {msg}"));
            PsStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(PsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(PsStatus::NullPointer, format!("{what} is null"));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(PsStatus::NullPointer, format!("{what} is null"));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return fail(PsStatus::NullPointer, "output handle pointer is null");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn check_len(expected: usize, got: usize) -> Result<(), Failure> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got }.into());
    }
    Ok(())
}

/// Description of the last failure on this thread, or "" after a success.
/// The pointer stays valid until the next `ps_*` call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Circulant graph C_n({g_1..g_k}).
///
/// # Safety
/// `generators` must point to `count` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_graph_circulant(
    n: usize,
    generators: *const usize,
    count: usize,
    out: *mut *mut PsGraph,
) -> PsStatus {
    guard(|| {
        let gens = input(generators, count, "generators")?.to_vec();
        let graph = build_circulant(n, &gens)?;
        store(
            out,
            PsGraph {
                graph,
                generators: Some(gens),
            },
        )
    })
}

/// Undirected simple graph from `count` pairs laid out as i0 j0 i1 j1 ...
///
/// # Safety
/// `edges` must point to `2 * count` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_graph_from_edges(
    n: usize,
    edges: *const usize,
    count: usize,
    out: *mut *mut PsGraph,
) -> PsStatus {
    guard(|| {
        let flat = input(edges, 2 * count, "edges")?;
        let graph = Graph::from_edges(n, flat.chunks_exact(2).map(|e| (e[0], e[1])))?;
        store(
            out,
            PsGraph {
                graph,
                generators: None,
            },
        )
    })
}

/// # Safety
/// `g` must come from a `ps_graph_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_graph_free(g: *mut PsGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ps_graph_num_vertices(g: *const PsGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.n())
}

/// # Safety
/// `g` must be a live graph handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ps_graph_num_edges(g: *const PsGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.num_edges())
}

/// Shift family on `g`. `Generators` needs a circulant graph. The family
/// keeps its own copy of the graph, so `g` may be freed afterwards.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_family_new(
    g: *const PsGraph,
    kind: PsShiftKind,
    out: *mut *mut PsFamily,
) -> PsStatus {
    guard(|| {
        let g = as_ref(g, "graph")?;
        let graph = g.graph.clone();
        let family = match (kind, &g.generators) {
            (PsShiftKind::Generators, Some(gens)) => circulant_family(graph.n(), gens)?.1,
            (PsShiftKind::Generators, None) => {
                return fail(
                    PsStatus::InvalidArgument,
                    "per-generator shifts need a circulant graph",
                )
            }
            _ => {
                let op = match kind {
                    PsShiftKind::Lsym => graph.sym_normalized_laplacian()?,
                    PsShiftKind::Laplacian => graph.laplacian(),
                    _ => graph.adjacency(),
                };
                let fam = ShiftFamily::new(vec![validate_shift(Operator::Sparse(op), &graph)?])?;
                match (kind, &g.generators) {
                    (PsShiftKind::Lsym, Some(gens)) => {
                        fam.with_spectrum(circulant_laplacian_spectrum(graph.n(), gens))
                    }
                    _ => fam,
                }
            }
        };
        store(out, PsFamily { family, graph })
    })
}

/// # Safety
/// `f` must come from [`ps_family_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_family_free(f: *mut PsFamily) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of vertices N.
///
/// # Safety
/// `f` must be a live family handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ps_family_dim(f: *const PsFamily) -> usize {
    f.as_ref().map_or(0, |f| f.family.dim())
}

/// Number of shifts d.
///
/// # Safety
/// `f` must be a live family handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn ps_family_len(f: *const PsFamily) -> usize {
    f.as_ref().map_or(0, |f| f.family.shifts().len())
}

/// Joint spectrum as N rows of d values, row-major; `len` must be N·d.
///
/// # Safety
/// `f` must be a live family handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_family_spectrum(
    f: *const PsFamily,
    out: *mut f64,
    len: usize,
) -> PsStatus {
    guard(|| {
        let f = as_ref(f, "family")?;
        let sp = f.family.spectrum()?;
        let d = f.family.shifts().len();
        check_len(sp.len() * d, len)?;
        let out = output(out, len, "out")?;
        for i in 0..sp.len() {
            out[i * d..(i + 1) * d].copy_from_slice(&sp.point(i));
        }
        Ok(())
    })
}

/// h(t) = Σ c_k t^k over the multi-indices k ≤ `degrees`, coefficients in
/// lexicographic order with the last index fastest.
///
/// # Safety
/// `degrees` must hold `d` values and `coeffs` `count` values.
#[no_mangle]
pub unsafe extern "C" fn ps_filter_new(
    degrees: *const usize,
    d: usize,
    coeffs: *const f64,
    count: usize,
    out: *mut *mut PsFilter,
) -> PsStatus {
    guard(|| {
        let degrees = input(degrees, d, "degrees")?.to_vec();
        let coeffs = input(coeffs, count, "coeffs")?.to_vec();
        store(
            out,
            PsFilter {
                h: PolyCoeffs::new(degrees, coeffs)?,
            },
        )
    })
}

/// Filter from the JSON accepted by the command line tool.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_filter_from_json(
    json: *const c_char,
    out: *mut *mut PsFilter,
) -> PsStatus {
    guard(|| {
        if json.is_null() {
            return fail(PsStatus::NullPointer, "json is null");
        }
        let s = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(PsStatus::InvalidArgument, e.to_string()))?;
        let h = match FilterSpec::from_json(s)? {
            FilterSpec::Poly(h) => h,
            FilterSpec::Cheb(c) => cheb_to_monomial(&c)?,
        };
        store(out, PsFilter { h })
    })
}

/// # Safety
/// `h` must come from a `ps_filter_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_filter_free(h: *mut PsFilter) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// y = h(S_1, .., S_d) x.
///
/// # Safety
/// Handles must be live; `x` and `y` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_filter_apply(
    h: *const PsFilter,
    f: *const PsFamily,
    x: *const f64,
    y: *mut f64,
    n: usize,
) -> PsStatus {
    guard(|| {
        let (h, f) = (as_ref(h, "filter")?, as_ref(f, "family")?);
        check_len(f.family.dim(), n)?;
        let r = apply(&h.h, &f.family, input(x, n, "x")?)?;
        output(y, n, "y")?.copy_from_slice(&r);
        Ok(())
    })
}

/// Same result as [`ps_filter_apply`], computed by the vertex-level network
/// simulator; `stats` may be null.
///
/// # Safety
/// Handles must be live; `x` and `y` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_filter_apply_distributed(
    h: *const PsFilter,
    f: *const PsFamily,
    x: *const f64,
    y: *mut f64,
    n: usize,
    stats: *mut PsCommStats,
) -> PsStatus {
    guard(|| {
        let (h, f) = (as_ref(h, "filter")?, as_ref(f, "family")?);
        check_len(f.family.dim(), n)?;
        let (r, st) = sim_filter(&f.graph, &f.family, &h.h, input(x, n, "x")?)?;
        output(y, n, "y")?.copy_from_slice(&r);
        if let Some(s) = stats.as_mut() {
            *s = PsCommStats {
                rounds: st.rounds,
                messages: st.total_messages(),
                flops: st.flops,
            };
        }
        Ok(())
    })
}

/// Solves h(S) x = b. `degree` is L for IOPA and K for ICPA and is ignored
/// otherwise. ICPA fits on the bounding box of the spectrum. Returns
/// `Diverged` with `x` still written when the iterates blow up. `opts` and
/// `info` may be null.
///
/// # Safety
/// Handles must be live; `b` and `x` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_inverse_solve(
    h: *const PsFilter,
    f: *const PsFamily,
    method: PsMethod,
    degree: usize,
    b: *const f64,
    x: *mut f64,
    n: usize,
    opts: *const PsSolveOptions,
    info: *mut PsSolveInfo,
) -> PsStatus {
    guard(|| {
        let (h, f) = (&as_ref(h, "filter")?.h, as_ref(f, "family")?);
        let family = &f.family;
        check_len(family.dim(), n)?;
        let b = input(b, n, "b")?;
        let x = output(x, n, "x")?;
        let o = opts.as_ref().copied().unwrap_or(PsSolveOptions {
            max_iter: 100,
            tol: 1e-10,
        });
        let so = SolveOptions {
            max_iter: o.max_iter,
            tol: o.tol,
            ..Default::default()
        };
        let tr: SolveTrace = match method {
            PsMethod::Iopa => solve_with(
                h,
                &optimal_poly(h, family.spectrum()?, degree)?.approximant(),
                family,
                b,
                &so,
            )?,
            PsMethod::Icpa => {
                let c = chebyshev_coeffs(h, degree, &family.spectrum()?.bounding_box(), None)?;
                solve_with(h, &Approximant::Chebyshev(c), family, b, &so)?
            }
            PsMethod::Gd0 => {
                let sp = family.spectrum()?;
                let (lo, hi) = (0..sp.len())
                    .map(|i| h.eval_scalar(&sp.point(i)))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| {
                        (l.min(v), u.max(v))
                    });
                let hm = FnMap::new(n, |v: &[f64]| apply(h, family, v).expect("dims checked"));
                gd0_solve(&hm, b, 2.0 / (lo + hi), &so)
            }
            PsMethod::Arma => {
                let coeffs = h
                    .as_univariate()
                    .ok_or_else(|| Error::Unsupported("ARMA needs a univariate filter".into()))?;
                arma_solve(coeffs, &family.shifts()[0], b, None, &so)?
            }
        };
        x.copy_from_slice(&tr.x);
        if let Some(i) = info.as_mut() {
            *i = PsSolveInfo {
                iterations: tr.iterations,
                residual: tr.residuals.last().copied().unwrap_or(f64::NAN),
                converged: tr.converged,
                diverged: tr.diverged,
            };
        }
        if tr.diverged {
            return fail(
                PsStatus::Diverged,
                format!("diverged after {} iterations", tr.iterations),
            );
        }
        Ok(())
    })
}

/// a_L = min over degree-L polynomials g of max over the spectrum |1 − g h|.
///
/// # Safety
/// Handles must be live; `a` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_optimal_poly_error(
    h: *const PsFilter,
    f: *const PsFamily,
    l: usize,
    a: *mut f64,
) -> PsStatus {
    guard(|| {
        let (h, f) = (as_ref(h, "filter")?, as_ref(f, "family")?);
        let fit = optimal_poly(&h.h, f.family.spectrum()?, l)?;
        *output(a, 1, "a")?.first_mut().expect("one slot") = fit.a;
        Ok(())
    })
}
