//! Multivariate polynomial filters h(S_1, …, S_d) in the monomial and the
//! shifted-Chebyshev bases.
//!
//! Monomial coefficients are stored as a dense tensor in lexicographic order
//! with the last index varying fastest, so entry (l_1, …, l_d) sits at
//! l_d + (L_d+1)(l_{d−1} + (L_{d−1}+1)(…)).

use std::collections::BTreeMap;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{axpy, LinearMap};
use crate::shifts::ShiftFamily;
use crate::sparse::Csr;

/// Default dense-materialization cap.
pub const DENSE_CAP: usize = 2048;
/// Largest Chebyshev degree accepted by [`cheb_to_monomial`].
pub const CHEB_MONOMIAL_CAP: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoly", into = "RawPoly")]
pub struct PolyCoeffs {
    degrees: Vec<usize>,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPoly {
    degrees: Vec<usize>,
    coeffs: Vec<f64>,
}

impl TryFrom<RawPoly> for PolyCoeffs {
    type Error = Error;
    fn try_from(r: RawPoly) -> Result<Self> {
        PolyCoeffs::new(r.degrees, r.coeffs)
    }
}

impl From<PolyCoeffs> for RawPoly {
    fn from(p: PolyCoeffs) -> Self {
        RawPoly {
            degrees: p.degrees,
            coeffs: p.coeffs,
        }
    }
}

/// Work done by one filter application.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApplyStats {
    pub shift_applies: usize,
    pub mults: usize,
}

impl std::ops::AddAssign for ApplyStats {
    fn add_assign(&mut self, o: Self) {
        self.shift_applies += o.shift_applies;
        self.mults += o.mults;
    }
}

impl PolyCoeffs {
    pub fn new(degrees: Vec<usize>, coeffs: Vec<f64>) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::InvalidSize(
                "polynomial needs at least one variable".into(),
            ));
        }
        let len: usize = degrees.iter().map(|l| l + 1).product();
        if coeffs.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: coeffs.len(),
            });
        }
        Ok(PolyCoeffs { degrees, coeffs })
    }

    pub fn zeros(degrees: Vec<usize>) -> Self {
        let len = degrees.iter().map(|l| l + 1).product();
        PolyCoeffs {
            degrees,
            coeffs: vec![0.0; len],
        }
    }

    /// Univariate h_0 + h_1 t + … .
    pub fn univariate(coeffs: Vec<f64>) -> Self {
        let l = coeffs.len().saturating_sub(1);
        assert!(
            !coeffs.is_empty(),
            "univariate polynomial needs a coefficient"
        );
        PolyCoeffs {
            degrees: vec![l],
            coeffs,
        }
    }

    pub fn constant(d: usize, c: f64) -> Self {
        PolyCoeffs {
            degrees: vec![0; d],
            coeffs: vec![c],
        }
    }

    pub fn d(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Flat lexicographic position of a multi-index.
    pub fn index(&self, l: &[usize]) -> usize {
        debug_assert_eq!(l.len(), self.d());
        l.iter().zip(&self.degrees).fold(0, |acc, (&li, &lk)| {
            debug_assert!(li <= lk);
            acc * (lk + 1) + li
        })
    }

    /// Inverse of [`index`](Self::index).
    pub fn multi_index(&self, mut v: usize) -> Vec<usize> {
        let mut l = vec![0; self.d()];
        for k in (0..self.d()).rev() {
            let b = self.degrees[k] + 1;
            l[k] = v % b;
            v /= b;
        }
        l
    }

    pub fn get(&self, l: &[usize]) -> f64 {
        self.coeffs[self.index(l)]
    }

    pub fn set(&mut self, l: &[usize], v: f64) {
        let i = self.index(l);
        self.coeffs[i] = v;
    }

    pub fn total_degree(&self) -> usize {
        (0..self.len())
            .filter(|&v| self.coeffs[v] != 0.0)
            .map(|v| self.multi_index(v).iter().sum())
            .max()
            .unwrap_or(0)
    }

    /// Σ h_l t^l by nested Horner, outermost variable t_1.
    pub fn eval_scalar(&self, t: &[f64]) -> f64 {
        assert_eq!(t.len(), self.d());
        fn rec(c: &[f64], deg: &[usize], t: &[f64]) -> f64 {
            if deg.is_empty() {
                return c[0];
            }
            let stride = c.len() / (deg[0] + 1);
            let mut acc = 0.0;
            for l in (0..=deg[0]).rev() {
                acc = acc * t[0] + rec(&c[l * stride..(l + 1) * stride], &deg[1..], &t[1..]);
            }
            acc
        }
        rec(&self.coeffs, &self.degrees, t)
    }

    /// Term-by-term Σ h_l Π t_k^{l_k}; a naive oracle for [`eval_scalar`](Self::eval_scalar).
    pub fn eval_naive(&self, t: &[f64]) -> f64 {
        (0..self.len())
            .map(|v| {
                let l = self.multi_index(v);
                self.coeffs[v]
                    * l.iter()
                        .zip(t)
                        .map(|(&e, &x)| x.powi(e as i32))
                        .product::<f64>()
            })
            .sum()
    }

    /// Coefficients of a univariate polynomial (d = 1).
    pub fn as_univariate(&self) -> Option<&[f64]> {
        (self.d() == 1).then_some(&self.coeffs)
    }
}

/// Horner over one shift: z⁰ = h_L x, z^{n+1} = h_{L−n−1} x + S zⁿ.
pub fn apply_single(h: &[f64], s: &dyn LinearMap, x: &[f64]) -> Vec<f64> {
    apply_single_counted(h, s, x).0
}

pub fn apply_single_counted(h: &[f64], s: &dyn LinearMap, x: &[f64]) -> (Vec<f64>, ApplyStats) {
    let n = x.len();
    let l = h.len() - 1;
    let mut z: Vec<f64> = x.iter().map(|v| h[l] * v).collect();
    let mut tmp = vec![0.0; n];
    let mut st = ApplyStats {
        shift_applies: 0,
        mults: n,
    };
    for k in (0..l).rev() {
        s.apply_into(&z, &mut tmp);
        for i in 0..n {
            z[i] = h[k] * x[i] + tmp[i];
        }
        st.shift_applies += 1;
        st.mults += s.mults() + n;
    }
    (z, st)
}

/// Unit-coefficient Horner over S on a run of columns c_0..c_L:
/// c_L, then c_{L−n−1} + S z, giving Σ_l S^l c_l.
fn horner_columns(cols: &[Vec<f64>], s: &dyn LinearMap, st: &mut ApplyStats) -> Vec<f64> {
    let l = cols.len() - 1;
    let mut z = cols[l].clone();
    let mut tmp = vec![0.0; z.len()];
    for k in (0..l).rev() {
        s.apply_into(&z, &mut tmp);
        for (zi, (ti, ci)) in z.iter_mut().zip(tmp.iter().zip(&cols[k])) {
            *zi = ci + ti;
        }
        st.shift_applies += 1;
        st.mults += s.mults();
    }
    z
}

/// Evaluates Σ_l h_l S_1^{l_1}⋯S_d^{l_d} x through the U_m column recursion:
/// the U_{d−1} columns are univariate filters in S_d, and each U_m is folded
/// into U_{m−1} by Horner over S_m.
pub fn apply_ops(
    h: &PolyCoeffs,
    shifts: &[&dyn LinearMap],
    x: &[f64],
) -> Result<(Vec<f64>, ApplyStats)> {
    let d = h.d();
    if shifts.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: shifts.len(),
        });
    }
    for s in shifts {
        if s.dim() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: s.dim(),
                got: x.len(),
            });
        }
    }
    let mut st = ApplyStats::default();
    let ld = h.degrees[d - 1] + 1;
    let mut cols: Vec<Vec<f64>> = h
        .coeffs
        .chunks(ld)
        .map(|c| {
            let (v, s) = apply_single_counted(c, shifts[d - 1], x);
            st += s;
            v
        })
        .collect();
    for m in (0..d - 1).rev() {
        let lm = h.degrees[m] + 1;
        cols = cols
            .chunks(lm)
            .map(|run| horner_columns(run, shifts[m], &mut st))
            .collect();
    }
    debug_assert_eq!(cols.len(), 1);
    Ok((cols.pop().unwrap(), st))
}

pub fn apply(h: &PolyCoeffs, family: &ShiftFamily, x: &[f64]) -> Result<Vec<f64>> {
    Ok(apply_counted(h, family, x)?.0)
}

pub fn apply_counted(
    h: &PolyCoeffs,
    family: &ShiftFamily,
    x: &[f64],
) -> Result<(Vec<f64>, ApplyStats)> {
    let ops: Vec<&dyn LinearMap> = family
        .shifts()
        .iter()
        .map(|s| s as &dyn LinearMap)
        .collect();
    apply_ops(h, &ops, x)
}

/// Dense Σ_l h_l Π_k S_k^{l_k}, built from explicit sparse powers rather than
/// the recursion used by [`apply`].
pub fn materialize(h: &PolyCoeffs, family: &ShiftFamily) -> Result<DMatrix<f64>> {
    materialize_capped(h, family, DENSE_CAP)
}

pub fn materialize_capped(
    h: &PolyCoeffs,
    family: &ShiftFamily,
    cap: usize,
) -> Result<DMatrix<f64>> {
    let n = family.dim();
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    if family.d() != h.d() {
        return Err(Error::DimensionMismatch {
            expected: h.d(),
            got: family.d(),
        });
    }
    let powers: Vec<Vec<Csr>> = family
        .shifts()
        .iter()
        .zip(&h.degrees)
        .map(|(s, &l)| {
            let m = s.to_csr();
            let mut p = vec![Csr::identity(n)];
            for k in 1..=l {
                p.push(p[k - 1].matmul(&m));
            }
            p
        })
        .collect();
    let mut out = DMatrix::zeros(n, n);
    for v in 0..h.len() {
        let c = h.coeffs[v];
        if c == 0.0 {
            continue;
        }
        let l = h.multi_index(v);
        let mut term = powers[0][l[0]].clone();
        for k in 1..h.d() {
            term = term.matmul(&powers[k][l[k]]);
        }
        for (i, j, t) in term.iter() {
            out[(i, j)] += c * t;
        }
    }
    Ok(out)
}

/// Per-dimension affine map onto [−1, 1]: u = a t + b.
fn affine(bx: (f64, f64)) -> (f64, f64) {
    let (mu, nu) = bx;
    (2.0 / (nu - mu), -(mu + nu) / (nu - mu))
}

/// All multi-indices k ∈ N^d with |k| ≤ K, in lexicographic order.
pub fn multi_indices(d: usize, k_max: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(d, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, k_max, &mut Vec::with_capacity(d), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Truncated multivariate shifted-Chebyshev series Σ_{|k|≤K} c_k T̄_k(t).
#[derive(Debug, Clone, PartialEq)]
pub struct ChebCoeffs {
    k_max: usize,
    bbox: Vec<(f64, f64)>,
    /// Dense (K+1)^d tensor, last index fastest; zero where |k| > K.
    dense: Vec<f64>,
}

impl ChebCoeffs {
    pub fn zeros(k_max: usize, bbox: Vec<(f64, f64)>) -> Result<Self> {
        if bbox.is_empty() {
            return Err(Error::InvalidSize(
                "Chebyshev box needs at least one dimension".into(),
            ));
        }
        if let Some(&(mu, nu)) = bbox
            .iter()
            .find(|(mu, nu)| mu.is_nan() || nu.is_nan() || mu >= nu)
        {
            return Err(Error::InvalidSize(format!(
                "degenerate box interval [{mu}, {nu}]"
            )));
        }
        let len = (k_max + 1).pow(bbox.len() as u32);
        Ok(ChebCoeffs {
            k_max,
            bbox,
            dense: vec![0.0; len],
        })
    }

    pub fn from_terms(
        k_max: usize,
        bbox: Vec<(f64, f64)>,
        terms: &[(Vec<usize>, f64)],
    ) -> Result<Self> {
        let mut c = Self::zeros(k_max, bbox)?;
        for (k, v) in terms {
            c.set(k, *v)?;
        }
        Ok(c)
    }

    pub fn d(&self) -> usize {
        self.bbox.len()
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn bbox(&self) -> &[(f64, f64)] {
        &self.bbox
    }

    /// C(K+d, d).
    pub fn count(&self) -> usize {
        binomial(self.k_max + self.d(), self.d())
    }

    fn pos(&self, k: &[usize]) -> usize {
        k.iter().fold(0, |a, &ki| a * (self.k_max + 1) + ki)
    }

    pub fn get(&self, k: &[usize]) -> f64 {
        if k.len() != self.d() || k.iter().sum::<usize>() > self.k_max {
            return 0.0;
        }
        self.dense[self.pos(k)]
    }

    pub fn set(&mut self, k: &[usize], v: f64) -> Result<()> {
        if k.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: k.len(),
            });
        }
        let tot: usize = k.iter().sum();
        if tot > self.k_max {
            return Err(Error::DegreeCapExceeded {
                degree: tot,
                cap: self.k_max,
            });
        }
        let p = self.pos(k);
        self.dense[p] = v;
        Ok(())
    }

    /// (multi-index, value) for every |k| ≤ K.
    pub fn terms(&self) -> Vec<(Vec<usize>, f64)> {
        multi_indices(self.d(), self.k_max)
            .into_iter()
            .map(|k| {
                let v = self.get(&k);
                (k, v)
            })
            .collect()
    }

    /// Partial sum truncated at total degree `k` ≤ K.
    pub fn truncated(&self, k: usize) -> ChebCoeffs {
        let k = k.min(self.k_max);
        let mut out = ChebCoeffs::zeros(k, self.bbox.clone()).expect("box already validated");
        for (idx, v) in self.terms() {
            if idx.iter().sum::<usize>() <= k {
                out.set(&idx, v).expect("within degree");
            }
        }
        out
    }

    /// Evaluates with the three-term recurrence in each coordinate.
    pub fn eval_scalar(&self, t: &[f64]) -> f64 {
        assert_eq!(t.len(), self.d());
        let k = self.k_max;
        let tabs: Vec<Vec<f64>> = t
            .iter()
            .zip(&self.bbox)
            .map(|(&ti, &bx)| {
                let (a, b) = affine(bx);
                let u = a * ti + b;
                let mut tk = vec![1.0; k + 1];
                if k >= 1 {
                    tk[1] = u;
                }
                for j in 2..=k {
                    tk[j] = 2.0 * u * tk[j - 1] - tk[j - 2];
                }
                tk
            })
            .collect();
        self.terms()
            .iter()
            .map(|(idx, v)| {
                v * idx
                    .iter()
                    .enumerate()
                    .map(|(i, &ki)| tabs[i][ki])
                    .product::<f64>()
            })
            .sum()
    }
}

/// Monomial coefficients (in t) of T̄_0..T̄_K on one box interval.
fn shifted_cheb_monomials(k_max: usize, bx: (f64, f64)) -> Vec<Vec<f64>> {
    let (a, b) = affine(bx);
    let mut out: Vec<Vec<f64>> = vec![vec![1.0]];
    if k_max >= 1 {
        out.push(vec![b, a]);
    }
    for j in 2..=k_max {
        // 2(a t + b) T_{j−1} − T_{j−2}
        let prev = &out[j - 1];
        let mut next = vec![0.0; j + 1];
        for (p, &c) in prev.iter().enumerate() {
            next[p] += 2.0 * b * c;
            next[p + 1] += 2.0 * a * c;
        }
        for (p, &c) in out[j - 2].iter().enumerate() {
            next[p] -= c;
        }
        out.push(next);
    }
    out
}

/// Exact change of basis to a monomial tensor with every L_k = K.
pub fn cheb_to_monomial(c: &ChebCoeffs) -> Result<PolyCoeffs> {
    if c.k_max > CHEB_MONOMIAL_CAP {
        return Err(Error::DegreeCapExceeded {
            degree: c.k_max,
            cap: CHEB_MONOMIAL_CAP,
        });
    }
    let d = c.d();
    let mono: Vec<Vec<Vec<f64>>> = c
        .bbox
        .iter()
        .map(|&bx| shifted_cheb_monomials(c.k_max, bx))
        .collect();
    let mut out = PolyCoeffs::zeros(vec![c.k_max; d]);
    for (k, v) in c.terms() {
        if v == 0.0 {
            continue;
        }
        // expand Π_i T̄_{k_i}(t_i) into monomials
        let mut acc: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), v)];
        for i in 0..d {
            let poly = &mono[i][k[i]];
            acc = acc
                .into_iter()
                .flat_map(|(l, w)| {
                    poly.iter()
                        .enumerate()
                        .filter(|(_, &p)| p != 0.0)
                        .map(move |(e, &p)| {
                            let mut l2 = l.clone();
                            l2.push(e);
                            (l2, w * p)
                        })
                })
                .collect();
        }
        for (l, w) in acc {
            let idx = out.index(&l);
            out.coeffs[idx] += w;
        }
    }
    Ok(out)
}

/// g_K(S_1..S_d) x by nested per-dimension Chebyshev recurrences.
pub fn apply_cheb_ops(
    c: &ChebCoeffs,
    shifts: &[&dyn LinearMap],
    x: &[f64],
) -> Result<(Vec<f64>, ApplyStats)> {
    if shifts.len() != c.d() {
        return Err(Error::DimensionMismatch {
            expected: c.d(),
            got: shifts.len(),
        });
    }
    let n = x.len();
    let mut out = vec![0.0; n];
    let mut st = ApplyStats::default();
    let mut prefix = Vec::with_capacity(c.d());
    cheb_rec(c, shifts, x, c.k_max, &mut prefix, &mut out, &mut st);
    Ok((out, st))
}

fn cheb_rec(
    c: &ChebCoeffs,
    shifts: &[&dyn LinearMap],
    v: &[f64],
    left: usize,
    prefix: &mut Vec<usize>,
    out: &mut [f64],
    st: &mut ApplyStats,
) {
    let dim = prefix.len();
    let last = dim + 1 == c.d();
    // skip branches whose coefficients are all zero
    if last
        && (0..=left).all(|j| {
            prefix.push(j);
            let z = c.get(prefix) == 0.0;
            prefix.pop();
            z
        })
    {
        return;
    }
    let s = shifts[dim];
    let (a, b) = affine(c.bbox[dim]);
    let n = v.len();
    let mut tmp = vec![0.0; n];
    let mut step = |w: &[f64], st: &mut ApplyStats| -> Vec<f64> {
        s.apply_into(w, &mut tmp);
        st.shift_applies += 1;
        st.mults += s.mults() + 2 * n;
        tmp.iter().zip(w).map(|(sw, wi)| a * sw + b * wi).collect()
    };
    let mut w_prev: Vec<f64> = Vec::new();
    let mut w: Vec<f64> = v.to_vec();
    for j in 0..=left {
        if j == 1 {
            let next = step(&w, st);
            w_prev = std::mem::replace(&mut w, next);
        } else if j >= 2 {
            let uw = step(&w, st);
            let next: Vec<f64> = uw.iter().zip(&w_prev).map(|(u, p)| 2.0 * u - p).collect();
            w_prev = std::mem::replace(&mut w, next);
        }
        prefix.push(j);
        if last {
            let coef = c.get(prefix);
            if coef != 0.0 {
                axpy(coef, &w, out);
                st.mults += n;
            }
        } else {
            cheb_rec(c, shifts, &w, left - j, prefix, out, st);
        }
        prefix.pop();
    }
}

/// Chebyshev filter on a family; logs a warning when the family's spectrum
/// (if cached) leaves the coefficient box.
pub fn apply_cheb(c: &ChebCoeffs, family: &ShiftFamily, x: &[f64]) -> Result<Vec<f64>> {
    if let Some(sp) = family.cached_spectrum() {
        for (k, ((lo, hi), (mu, nu))) in sp.bounding_box().iter().zip(c.bbox()).enumerate() {
            if *lo < mu - 1e-9 || *hi > nu + 1e-9 {
                warn!(
                    "spectrum dimension {k} spans [{lo}, {hi}], outside Chebyshev box [{mu}, {nu}]"
                );
            }
        }
    }
    let ops: Vec<&dyn LinearMap> = family
        .shifts()
        .iter()
        .map(|s| s as &dyn LinearMap)
        .collect();
    Ok(apply_cheb_ops(c, &ops, x)?.0)
}

/// Filter file contents: a monomial tensor or a Chebyshev series.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterSpec {
    Poly(PolyCoeffs),
    Cheb(ChebCoeffs),
}

#[derive(Serialize, Deserialize)]
struct RawCheb {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "box")]
    bbox: Vec<[f64; 2]>,
    coeffs: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSpec {
    Cheb { cheb: RawCheb },
    Poly(PolyCoeffs),
}

fn parse_multi_index(s: &str) -> Result<Vec<usize>> {
    s.split(['-', ','])
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("bad multi-index {s:?}: {e}")))
        })
        .collect()
}

impl FilterSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        match serde_json::from_str::<RawSpec>(s)? {
            RawSpec::Poly(p) => Ok(FilterSpec::Poly(p)),
            RawSpec::Cheb { cheb } => {
                let bbox = cheb.bbox.iter().map(|b| (b[0], b[1])).collect();
                let mut c = ChebCoeffs::zeros(cheb.k, bbox)?;
                for (key, v) in &cheb.coeffs {
                    c.set(&parse_multi_index(key)?, *v)?;
                }
                Ok(FilterSpec::Cheb(c))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = match self {
            FilterSpec::Poly(p) => RawSpec::Poly(p.clone()),
            FilterSpec::Cheb(c) => RawSpec::Cheb {
                cheb: RawCheb {
                    k: c.k_max,
                    bbox: c.bbox.iter().map(|&(a, b)| [a, b]).collect(),
                    coeffs: c
                        .terms()
                        .into_iter()
                        .filter(|(_, v)| *v != 0.0)
                        .map(|(k, v)| {
                            (
                                k.iter()
                                    .map(|x| x.to_string())
                                    .collect::<Vec<_>>()
                                    .join("-"),
                                v,
                            )
                        })
                        .collect(),
                },
            },
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    pub fn d(&self) -> usize {
        match self {
            FilterSpec::Poly(p) => p.d(),
            FilterSpec::Cheb(c) => c.d(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_circulant;
    use crate::operator::Operator;
    use crate::shifts::{circulant_family, validate_shift};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn h1() -> PolyCoeffs {
        PolyCoeffs::univariate(vec![27.0 / 4.0, -0.75, -1.0])
    }

    fn cycle_family(n: usize) -> ShiftFamily {
        let g = build_circulant(n, &[1]).unwrap();
        let s =
            validate_shift(Operator::Sparse(g.sym_normalized_laplacian().unwrap()), &g).unwrap();
        ShiftFamily::new(vec![s]).unwrap()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn lexicographic_index_roundtrip() {
        let p = PolyCoeffs::zeros(vec![2, 3, 1]);
        for v in 0..p.len() {
            assert_eq!(p.index(&p.multi_index(v)), v);
        }
        assert_eq!(p.index(&[0, 0, 1]), 1);
        assert_eq!(p.index(&[0, 1, 0]), 2);
        assert_eq!(p.index(&[1, 0, 0]), 8);
    }

    #[test]
    fn single_shift_basics() {
        let fam = cycle_family(16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = rand_vec(&mut rng, 16);
        let s = &fam.shifts()[0];
        assert_eq!(apply_single(&[1.0], s, &x), x);
        let (sx, st) = apply_single_counted(&[0.0, 1.0], s, &x);
        assert_eq!(st.shift_applies, 1);
        let sd = s.to_csr().to_dense();
        let want = &sd * nalgebra::DVector::from_column_slice(&x);
        for (a, b) in sx.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        let got = apply_single(h1().coeffs(), s, &x);
        let dense = DMatrix::identity(16, 16) * 6.75 - &sd * 0.75 - &sd * &sd;
        let want = dense * nalgebra::DVector::from_column_slice(&x);
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_scalar_values() {
        assert_eq!(h1().eval_scalar(&[0.0]), 6.75);
        assert!(h1().eval_scalar(&[2.25]).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = PolyCoeffs::zeros(vec![2, 3, 1]);
        for v in 0..p.len() {
            p.coeffs[v] = rng.random_range(-1.0..1.0);
        }
        for _ in 0..20 {
            let t = rand_vec(&mut rng, 3);
            assert!((p.eval_scalar(&t) - p.eval_naive(&t)).abs() < 1e-13);
        }
    }

    #[test]
    fn separable_and_cross_term() {
        let (_, fam) = circulant_family(20, &[1, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_vec(&mut rng, 20);
        let a = [0.5, -1.0, 0.25];
        let b = [1.0, 2.0, 0.0, -0.5];
        let mut h = PolyCoeffs::zeros(vec![2, 3]);
        for (i, ai) in a.iter().enumerate() {
            for (j, bj) in b.iter().enumerate() {
                h.set(&[i, j], ai * bj);
            }
        }
        let got = apply(&h, &fam, &x).unwrap();
        let (s1, s2) = (&fam.shifts()[0], &fam.shifts()[1]);
        let want = apply_single(&a, s1, &apply_single(&b, s2, &x));
        for (p, q) in got.iter().zip(&want) {
            assert!((p - q).abs() < 1e-12);
        }
        let mut e = PolyCoeffs::zeros(vec![1, 1]);
        e.set(&[1, 1], 1.0);
        let got = apply(&e, &fam, &x).unwrap();
        let want = s1.apply(&s2.apply(&x));
        for (p, q) in got.iter().zip(&want) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn materialize_matches_apply_columns() {
        let (_, fam) = circulant_family(14, &[1, 2, 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut h = PolyCoeffs::zeros(vec![2, 1, 2]);
        for v in 0..h.len() {
            h.coeffs[v] = rng.random_range(-1.0..1.0);
        }
        let m = materialize(&h, &fam).unwrap();
        for j in 0..14 {
            let mut e = vec![0.0; 14];
            e[j] = 1.0;
            let col = apply(&h, &fam, &e).unwrap();
            for i in 0..14 {
                assert!((m[(i, j)] - col[i]).abs() < 1e-12);
            }
        }
        assert_eq!(
            materialize(&PolyCoeffs::constant(3, 1.0), &fam).unwrap(),
            DMatrix::identity(14, 14)
        );
        assert!(matches!(
            materialize_capped(&h, &fam, 10),
            Err(Error::DenseCapExceeded { .. })
        ));
    }

    #[test]
    fn cheb_basics() {
        let c =
            ChebCoeffs::from_terms(3, vec![(0.0, 2.0), (-1.0, 1.0)], &[(vec![0, 0], 1.0)]).unwrap();
        assert_eq!(c.count(), 10);
        let m = cheb_to_monomial(&c).unwrap();
        assert_eq!(m.eval_scalar(&[0.3, 0.9]), 1.0);
        let t1 = ChebCoeffs::from_terms(1, vec![(0.0, 2.0)], &[(vec![1], 1.0)]).unwrap();
        let m = cheb_to_monomial(&t1).unwrap();
        assert_eq!(m.coeffs(), &[-1.0, 1.0]);
        assert!(ChebCoeffs::zeros(2, vec![(1.0, 1.0)]).is_err());
        let big = ChebCoeffs::zeros(31, vec![(0.0, 2.0)]).unwrap();
        assert!(matches!(
            cheb_to_monomial(&big),
            Err(Error::DegreeCapExceeded { .. })
        ));
    }

    #[test]
    fn cheb_monomial_agree_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bbox = vec![(0.0, 2.0), (-0.5, 1.5)];
        let terms: Vec<(Vec<usize>, f64)> = multi_indices(2, 5)
            .into_iter()
            .map(|k| (k, rng.random_range(-1.0..1.0)))
            .collect();
        let c = ChebCoeffs::from_terms(5, bbox, &terms).unwrap();
        let m = cheb_to_monomial(&c).unwrap();
        for _ in 0..100 {
            let t = [rng.random_range(0.0..2.0), rng.random_range(-0.5..1.5)];
            assert!((c.eval_scalar(&t) - m.eval_scalar(&t)).abs() < 1e-10);
        }
    }

    #[test]
    fn apply_cheb_paths_agree() {
        let (_, fam) = circulant_family(60, &[1, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let terms: Vec<(Vec<usize>, f64)> = multi_indices(2, 4)
            .into_iter()
            .map(|k| (k, rng.random_range(-1.0..1.0)))
            .collect();
        let c = ChebCoeffs::from_terms(4, vec![(0.0, 2.0), (0.0, 2.0)], &terms).unwrap();
        let x = rand_vec(&mut rng, 60);
        let a = apply_cheb(&c, &fam, &x).unwrap();
        let b = apply(&cheb_to_monomial(&c).unwrap(), &fam, &x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-9);
        }
        let g =
            ChebCoeffs::from_terms(0, vec![(0.0, 2.0), (0.0, 2.0)], &[(vec![0, 0], 2.5)]).unwrap();
        let y = apply_cheb(&g, &fam, &x).unwrap();
        assert!(y.iter().zip(&x).all(|(p, q)| (p - 2.5 * q).abs() < 1e-15));
    }

    #[test]
    fn cheb_affine_single() {
        let fam = cycle_family(10);
        let c = ChebCoeffs::from_terms(1, vec![(0.0, 2.0)], &[(vec![0], 0.7), (vec![1], -0.4)])
            .unwrap();
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let got = apply_cheb(&c, &fam, &x).unwrap();
        let sx = fam.shifts()[0].apply(&x);
        for i in 0..10 {
            assert!((got[i] - (0.7 * x[i] - 0.4 * (sx[i] - x[i]))).abs() < 1e-13);
        }
    }

    #[test]
    fn filter_spec_json_roundtrip() {
        let p = FilterSpec::Poly(
            PolyCoeffs::new(vec![1, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
        );
        assert_eq!(FilterSpec::from_json(&p.to_json().unwrap()).unwrap(), p);
        let c = FilterSpec::Cheb(
            ChebCoeffs::from_terms(
                2,
                vec![(0.0, 2.0), (0.0, 1.0)],
                &[(vec![0, 0], 1.0), (vec![1, 1], -0.5)],
            )
            .unwrap(),
        );
        let s = c.to_json().unwrap();
        assert!(s.contains("\"1-1\""));
        assert_eq!(FilterSpec::from_json(&s).unwrap(), c);
        assert!(FilterSpec::from_json(r#"{"degrees":[2],"coeffs":[1.0]}"#).is_err());
    }

    #[test]
    fn op_count_bound() {
        let (g, fam) = circulant_family(50, &[1, 2, 5]).unwrap();
        let h = PolyCoeffs::zeros(vec![2, 2, 2]);
        let (_, st) = apply_counted(&h, &fam, &vec![1.0; 50]).unwrap();
        let bound = 4 * 50 * (g.max_degree() + 1) * 27;
        assert!(st.mults <= bound, "{} > {bound}", st.mults);
    }
}
