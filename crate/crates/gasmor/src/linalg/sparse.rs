//! Compressed sparse row matrices.

use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};

/// Sparse matrix in CSR layout with sorted, duplicate-free column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let n = d.len();
        Csr {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed, explicit zeros kept.
    pub fn from_triplets(nrows: usize, ncols: usize, trip: &[(usize, usize, T)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in trip {
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) outside {nrows}x{ncols}");
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; trip.len()];
        let mut vals = vec![T::zero(); trip.len()];
        for &(i, j, v) in trip {
            let k = next[i];
            cols[k] = j;
            vals[k] = v;
            next[i] += 1;
        }
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values = Vec::with_capacity(trip.len());
        let mut row: Vec<(usize, T)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                if indices.len() > indptr[i] && *indices.last().unwrap() == j {
                    let last = values.last_mut().unwrap();
                    *last += v;
                } else {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr[i + 1] = indices.len();
        }
        Csr { nrows, ncols, indptr, indices, values }
    }

    pub fn from_dense(m: &DMatrix<T>) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != T::zero() {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out.push((i, j, v));
            }
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let trip: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &trip)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    /// Drops stored entries that are exactly zero.
    pub fn pruned(&self) -> Self {
        let trip: Vec<_> = self.triplets().into_iter().filter(|t| t.2 != T::zero()).collect();
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }

    /// `a*self + b*other`.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trip: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (i, j, a * v)).collect();
        trip.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, b * v)));
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }

    /// Rows selected by `rows` (in that order).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut trip = Vec::new();
        for (new_i, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                trip.push((new_i, j, v));
            }
        }
        Self::from_triplets(rows.len(), self.ncols, &trip)
    }

    /// Sparse-sparse product.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows);
        let mut trip = Vec::new();
        let mut acc = vec![T::zero(); rhs.ncols];
        let mut mark = vec![usize::MAX; rhs.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in rhs.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = T::zero();
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                trip.push((i, j, acc[j]));
            }
        }
        Self::from_triplets(self.nrows, rhs.ncols, &trip)
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let mut s = T::zero();
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            y[i] = s;
        }
    }

    /// `y += alpha * self * x`.
    pub fn mul_vec_add(&self, alpha: T, x: &[T], y: &mut [T]) {
        for i in 0..self.nrows {
            let mut s = T::zero();
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            y[i] += alpha * s;
        }
    }

    pub fn mul_dvec(&self, x: &DVector<T>) -> DVector<T> {
        let mut y = DVector::zeros(self.nrows);
        self.mul_vec(x.as_slice(), y.as_mut_slice());
        y
    }

    /// Sparse times dense.
    pub fn mul_dense(&self, x: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(self.ncols, x.nrows());
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut yc = y.column_mut(c);
            for i in 0..self.nrows {
                let mut s = T::zero();
                for k in self.indptr[i]..self.indptr[i + 1] {
                    s += self.values[k] * xc[self.indices[k]];
                }
                yc[i] = s;
            }
        }
        y
    }

    /// `xᵀ · self` for dense `x` (returns `x.ncols × self.ncols`).
    pub fn tr_mul_dense_left(&self, x: &DMatrix<T>) -> DMatrix<T> {
        assert_eq!(x.nrows(), self.nrows);
        let mut y = DMatrix::zeros(x.ncols(), self.ncols);
        for c in 0..x.ncols() {
            for i in 0..self.nrows {
                let xi = x[(i, c)];
                if xi == T::zero() {
                    continue;
                }
                for (j, v) in self.row(i) {
                    y[(c, j)] += xi * v;
                }
            }
        }
        y
    }

    pub fn is_diagonal(&self) -> bool {
        self.nrows == self.ncols && self.triplets().iter().all(|&(i, j, v)| i == j || v == T::zero())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn cast<S: Scalar>(&self) -> Csr<S> {
        Csr {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| S::lit(v.to_f64_lossy())).collect(),
        }
    }

    /// Horizontal/vertical block assembly: `blocks[r][c]` may be `None` (zero block).
    pub fn block(blocks: &[Vec<Option<&Csr<T>>>], row_sizes: &[usize], col_sizes: &[usize]) -> Self {
        let mut trip = Vec::new();
        let mut r0 = 0;
        for (r, brow) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (c, b) in brow.iter().enumerate() {
                if let Some(m) = b {
                    assert_eq!((m.nrows, m.ncols), (row_sizes[r], col_sizes[c]), "block ({r},{c})");
                    for (i, j, v) in m.triplets() {
                        trip.push((r0 + i, c0 + j, v));
                    }
                }
                c0 += col_sizes[c];
            }
            r0 += row_sizes[r];
        }
        Self::from_triplets(r0, col_sizes.iter().sum(), &trip)
    }
}
