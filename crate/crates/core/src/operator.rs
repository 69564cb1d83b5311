//! Linear operators acting on graph signals, including matrix-free Kronecker
//! structure for product graphs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::Csr;

/// Anything that maps a length-`dim` signal to another.
pub trait LinearMap: Sync {
    fn dim(&self) -> usize;

    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    /// Scalar multiplications performed by one `apply_into`.
    fn mults(&self) -> usize {
        self.dim() * self.dim()
    }
}

/// A Kronecker factor: either an identity of the given size or an explicit matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Identity(usize),
    Matrix(Csr),
}

impl Factor {
    pub fn size(&self) -> usize {
        match self {
            Factor::Identity(n) => *n,
            Factor::Matrix(m) => m.rows(),
        }
    }

    fn to_csr(&self) -> Csr {
        match self {
            Factor::Identity(n) => Csr::identity(*n),
            Factor::Matrix(m) => m.clone(),
        }
    }
}

/// outer ⊗ inner applied to signals laid out with index = o * inner_size + i.
#[derive(Debug, Clone, PartialEq)]
pub struct KronOperator {
    pub outer: Factor,
    pub inner: Factor,
}

impl KronOperator {
    pub fn dim(&self) -> usize {
        self.outer.size() * self.inner.size()
    }

    /// Y = A X B^T with X the (outer × inner) row-major reshape of x.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let (no, ni) = (self.outer.size(), self.inner.size());
        let mut tmp;
        let z: &[f64] = match &self.inner {
            Factor::Identity(_) => x,
            Factor::Matrix(b) => {
                tmp = vec![0.0; no * ni];
                for o in 0..no {
                    b.matvec_into(&x[o * ni..(o + 1) * ni], &mut tmp[o * ni..(o + 1) * ni]);
                }
                &tmp
            }
        };
        match &self.outer {
            Factor::Identity(_) => y.copy_from_slice(z),
            Factor::Matrix(a) => {
                y.iter_mut().for_each(|v| *v = 0.0);
                for o in 0..no {
                    let (idx, val) = a.row(o);
                    let yo = &mut y[o * ni..(o + 1) * ni];
                    for (&k, &w) in idx.iter().zip(val) {
                        let zk = &z[k * ni..(k + 1) * ni];
                        yo.iter_mut().zip(zk).for_each(|(a, b)| *a += w * b);
                    }
                }
            }
        }
    }

    pub fn materialize(&self) -> Csr {
        self.outer.to_csr().kron(&self.inner.to_csr())
    }

    /// Nonzero pattern entries, enumerated without materializing.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let (o, i) = (self.outer.to_csr(), self.inner.to_csr());
        let ni = i.rows();
        let mut out = Vec::with_capacity(o.nnz() * i.nnz());
        for (a, b, u) in o.iter() {
            for (c, d, v) in i.iter() {
                out.push((a * ni + c, b * ni + d, u * v));
            }
        }
        out
    }

    /// Multiplications of the matrix-free apply.
    pub fn apply_mults(&self) -> usize {
        let (no, ni) = (self.outer.size(), self.inner.size());
        let a = match &self.outer {
            Factor::Identity(_) => 0,
            Factor::Matrix(m) => m.nnz() * ni,
        };
        let b = match &self.inner {
            Factor::Identity(_) => 0,
            Factor::Matrix(m) => m.nnz() * no,
        };
        a + b
    }

    pub fn nnz(&self) -> usize {
        let nz = |f: &Factor| match f {
            Factor::Identity(n) => *n,
            Factor::Matrix(m) => m.nnz(),
        };
        nz(&self.outer) * nz(&self.inner)
    }
}

/// A square operator that is either an explicit sparse matrix or a
/// Kronecker-structured product with an identity factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Sparse(Csr),
    Kron(KronOperator),
}

impl Operator {
    pub fn dim(&self) -> usize {
        match self {
            Operator::Sparse(m) => m.rows(),
            Operator::Kron(k) => k.dim(),
        }
    }

    pub fn is_structured(&self) -> bool {
        matches!(self, Operator::Kron(_))
    }

    pub fn nnz(&self) -> usize {
        match self {
            Operator::Sparse(m) => m.nnz(),
            Operator::Kron(k) => k.nnz(),
        }
    }

    pub fn to_csr(&self) -> Csr {
        match self {
            Operator::Sparse(m) => m.clone(),
            Operator::Kron(k) => k.materialize(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.to_csr().to_dense()
    }

    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        match self {
            Operator::Sparse(m) => m.iter().collect(),
            Operator::Kron(k) => k.entries(),
        }
    }

    pub fn try_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(LinearMap::apply(self, x))
    }
}

impl LinearMap for Operator {
    fn dim(&self) -> usize {
        Operator::dim(self)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Operator::Sparse(m) => m.matvec_into(x, y),
            Operator::Kron(k) => k.apply_into(x, y),
        }
    }

    fn mults(&self) -> usize {
        match self {
            Operator::Sparse(m) => m.nnz(),
            Operator::Kron(k) => k.apply_mults(),
        }
    }
}

impl LinearMap for Csr {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y)
    }

    fn mults(&self) -> usize {
        self.nnz()
    }
}

impl LinearMap for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.nrows();
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            *yi = (0..self.ncols()).map(|j| self[(i, j)] * x[j]).sum();
        }
    }
}

/// γ·I
#[derive(Debug, Clone, Copy)]
pub struct ScaledIdentity {
    pub n: usize,
    pub gamma: f64,
}

impl LinearMap for ScaledIdentity {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().zip(x).for_each(|(a, b)| *a = self.gamma * b);
    }

    fn mults(&self) -> usize {
        self.n
    }
}

/// Wraps a closure as a [`LinearMap`].
pub struct FnMap<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> FnMap<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnMap { n, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> LinearMap for FnMap<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&(self.f)(x));
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(a, b)| *a += alpha * b);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> Csr {
        let mut t = Vec::new();
        let mut s = seed;
        for i in 0..n {
            for j in 0..n {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                if (s >> 60) < 6 {
                    t.push((i, j, ((s >> 20) % 1000) as f64 / 500.0 - 1.0));
                }
            }
        }
        Csr::from_triplets(n, n, t)
    }

    #[test]
    fn kron_apply_matches_materialized() {
        let a = sample(4, 1);
        let b = sample(5, 2);
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        for k in [
            KronOperator {
                outer: Factor::Matrix(a.clone()),
                inner: Factor::Identity(5),
            },
            KronOperator {
                outer: Factor::Identity(4),
                inner: Factor::Matrix(b.clone()),
            },
            KronOperator {
                outer: Factor::Matrix(a.clone()),
                inner: Factor::Matrix(b.clone()),
            },
        ] {
            let mut y = vec![0.0; 20];
            k.apply_into(&x, &mut y);
            let z = k.materialize().matvec(&x);
            for (p, q) in y.iter().zip(&z) {
                assert!((p - q).abs() < 1e-14);
            }
            assert_eq!(
                k.entries().len(),
                k.materialize().nnz().max(k.entries().len())
            );
        }
    }

    #[test]
    fn kron_outer_acts_by_right_multiplication() {
        // (A ⊗ I)x == vec(reshape(x, n×M) · Aᵀ) in column-major snapshot terms.
        let a = sample(3, 9);
        let n = 4;
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 2.0).collect();
        let k = KronOperator {
            outer: Factor::Matrix(a.clone()),
            inner: Factor::Identity(n),
        };
        let mut y = vec![0.0; 12];
        k.apply_into(&x, &mut y);
        let xm = DMatrix::from_column_slice(n, 3, &x);
        let ym = &xm * a.to_dense().transpose();
        for (p, q) in y.iter().zip(ym.as_slice()) {
            assert!((p - q).abs() < 1e-14);
        }
    }
}
