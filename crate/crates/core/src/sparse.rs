//! Compressed sparse row storage for real square/rectangular matrices.

use nalgebra::DMatrix;

/// CSR matrix with sorted column indices and no explicit duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from unsorted triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < rows && j < cols, "triplet ({i},{j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Csr {
            rows,
            cols,
            indptr,
            indices,
            values,
        };
        m.prune(0.0);
        m
    }

    pub fn identity(n: usize) -> Self {
        Csr {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Csr {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: vec![],
            values: vec![],
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Csr::from_triplets(m.nrows(), m.ncols(), t)
    }

    /// Removes entries with |v| <= tol.
    fn prune(&mut self, tol: f64) {
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.values[k].abs() > tol {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[i + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.row(i);
        match idx.binary_search(&j) {
            Ok(p) => val[p],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (idx, val) = self.row(i);
            idx.iter().zip(val).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// y = A x
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Csr {
        let t = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Csr::from_triplets(self.cols, self.rows, t)
    }

    pub fn scale(&self, alpha: f64) -> Csr {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m.prune(0.0);
        m
    }

    /// alpha * self + beta * other
    pub fn add_scaled(&self, alpha: f64, other: &Csr, beta: f64) -> Csr {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let t = self
            .iter()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(other.iter().map(|(i, j, v)| (i, j, beta * v)))
            .collect();
        Csr::from_triplets(self.rows, self.cols, t)
    }

    /// Sparse product self * other.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.cols, other.rows);
        let mut t = Vec::new();
        let mut acc = vec![0.0; other.cols];
        let mut touched = vec![false; other.cols];
        let mut list = Vec::new();
        for i in 0..self.rows {
            let (ai, av) = self.row(i);
            for (&k, &a) in ai.iter().zip(av) {
                let (bi, bv) = other.row(k);
                for (&j, &b) in bi.iter().zip(bv) {
                    if !touched[j] {
                        touched[j] = true;
                        list.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &list {
                t.push((i, j, acc[j]));
                acc[j] = 0.0;
                touched[j] = false;
            }
            list.clear();
        }
        Csr::from_triplets(self.rows, other.cols, t)
    }

    /// Kronecker product self ⊗ other.
    pub fn kron(&self, other: &Csr) -> Csr {
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for (i, j, a) in self.iter() {
            for (k, l, b) in other.iter() {
                t.push((i * other.rows + k, j * other.cols + l, a * b));
            }
        }
        Csr::from_triplets(self.rows * other.rows, self.cols * other.cols, t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && self
                .iter()
                .all(|(i, j, v)| (self.get(j, i) - v).abs() <= tol)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute row sum and column sum product bound on the 2-norm.
    pub fn norm2_upper_bound(&self) -> f64 {
        let row_max = (0..self.rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut col = vec![0.0; self.cols];
        for (_, j, v) in self.iter() {
            col[j] += v.abs();
        }
        let col_max = col.into_iter().fold(0.0, f64::max);
        (row_max * col_max).sqrt()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_sort() {
        let m = Csr::from_triplets(
            2,
            3,
            vec![(1, 2, 1.0), (0, 1, 2.0), (1, 2, 3.0), (0, 0, 0.0)],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 4.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn kron_matches_dense() {
        let a = Csr::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 2.0), (1, 1, 3.0)]);
        let b = Csr::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, -1.0)]);
        let k = a.kron(&b).to_dense();
        let (ad, bd) = (a.to_dense(), b.to_dense());
        assert_eq!(k, ad.kronecker(&bd));
    }

    #[test]
    fn matmul_matches_dense() {
        let a = Csr::from_triplets(
            3,
            3,
            vec![(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0), (2, 2, 1.0)],
        );
        let p = a.matmul(&a).to_dense();
        let d = a.to_dense();
        assert_eq!(p, &d * &d);
    }
}
