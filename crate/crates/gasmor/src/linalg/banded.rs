//! Banded LU with partial pivoting after reverse Cuthill-McKee reordering.

use super::sparse::Csr;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

/// Reverse Cuthill-McKee ordering of the symmetrized pattern. Returns `perm` with
/// `perm[new] = old`.
pub fn rcm<T: Scalar>(m: &Csr<T>) -> Vec<usize> {
    let n = m.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in m.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // start each component at a minimum-degree node
        let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| adj[i].len()).unwrap();
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| adj[w].len());
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// LU factors of a banded matrix (LAPACK `gbtrf` layout).
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<T>,
    ipiv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    /// Factors `m` (already permuted) given its lower/upper bandwidths.
    pub fn factor(m: &Csr<T>, kl: usize, ku: usize) -> Result<Self> {
        let n = m.nrows();
        let kv = ku + kl;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![T::zero(); ldab * n];
        for (i, j, v) in m.triplets() {
            ab[(kv + i - j) + j * ldab] = v;
        }
        let mut ipiv = vec![0usize; n];
        let idx = |r: usize, c: usize| r + c * ldab;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = ab[idx(kv, j)].abs();
            for r in 1..=km {
                let v = ab[idx(kv + r, j)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            ipiv[j] = j + p;
            if best == T::zero() {
                return Err(Error::Singular(format!("zero pivot in column {j}")));
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    ab.swap(idx(kv + j - c, c), idx(kv + j + p - c, c));
                }
            }
            let piv = ab[idx(kv, j)];
            for r in 1..=km {
                ab[idx(kv + r, j)] /= piv;
            }
            for c in j + 1..=ju {
                let ujc = ab[idx(kv + j - c, c)];
                if ujc != T::zero() {
                    for r in 1..=km {
                        let l = ab[idx(kv + r, j)];
                        ab[idx(kv + j + r - c, c)] -= l * ujc;
                    }
                }
            }
        }
        Ok(BandLu { n, kl, kv, ldab, ab, ipiv })
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, kl, kv, ldab) = (self.n, self.kl, self.kv, self.ldab);
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != T::zero() {
                for r in 1..=km {
                    b[j + r] -= self.ab[kv + r + j * ldab] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[kv + j * ldab];
            let bj = b[j];
            if bj != T::zero() {
                let lo = j.saturating_sub(kv);
                for i in lo..j {
                    b[i] -= self.ab[kv + i - j + j * ldab] * bj;
                }
            }
        }
    }
}

/// Square linear solver choosing a banded or dense LU.
#[derive(Clone, Debug)]
pub enum LinearSolver<T: Scalar> {
    Banded { perm: Vec<usize>, lu: BandLu<T> },
    Dense(nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>),
    Diagonal(Vec<T>),
}

impl<T: Scalar> LinearSolver<T> {
    /// Factors a sparse square matrix.
    pub fn sparse(m: &Csr<T>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(Error::Dimension(format!("{}x{} is not square", n, m.ncols())));
        }
        if n == 0 {
            return Ok(LinearSolver::Diagonal(Vec::new()));
        }
        if m.is_diagonal() {
            let d = m.diagonal();
            if let Some(i) = d.iter().position(|v| *v == T::zero()) {
                return Err(Error::Singular(format!("zero diagonal entry {i}")));
            }
            return Ok(LinearSolver::Diagonal(d));
        }
        let perm = rcm(m);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let trip: Vec<_> = m.triplets().into_iter().map(|(i, j, v)| (inv[i], inv[j], v)).collect();
        let pm = Csr::from_triplets(n, n, &trip);
        let (mut kl, mut ku) = (0, 0);
        for &(i, j, _) in &trip {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        if 2 * kl + ku + 1 > n / 2 {
            return Self::dense(&m.to_dense());
        }
        let lu = BandLu::factor(&pm, kl, ku)?;
        Ok(LinearSolver::Banded { perm, lu })
    }

    pub fn dense(m: &DMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        let lu = m.clone().lu();
        let u = lu.u();
        let scale = m.amax();
        let tiny = <T as Scalar>::epsilon() * scale * T::lit(1e-3);
        if (0..u.nrows()).any(|i| u[(i, i)].abs() <= tiny) {
            return Err(Error::Singular("dense LU pivot below tolerance".into()));
        }
        Ok(LinearSolver::Dense(lu))
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        match self {
            LinearSolver::Banded { perm, lu } => {
                let mut pb: Vec<T> = perm.iter().map(|&old| b[old]).collect();
                lu.solve_in_place(&mut pb);
                for (new, &old) in perm.iter().enumerate() {
                    b[old] = pb[new];
                }
            }
            LinearSolver::Dense(lu) => {
                let mut v = DVector::from_column_slice(b);
                lu.solve_mut(&mut v);
                b.copy_from_slice(v.as_slice());
            }
            LinearSolver::Diagonal(d) => {
                for (x, di) in b.iter_mut().zip(d) {
                    *x /= *di;
                }
            }
        }
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }
}
