//! Dense decompositions: truncated symmetric eigen/singular value decompositions and a
//! real-Schur based non-symmetric eigensolver with left and right eigenvectors.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use nalgebra::{Complex, DMatrix, DVector};

/// Eigen-decomposition of the symmetric part of `m`, sorted by descending eigenvalue.
pub fn sym_eig_desc<T: Scalar>(m: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let s = (m + m.transpose()) * T::lit(0.5);
    let eig = s.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Leading eigenpairs of a symmetric PSD matrix with eigenvalue > `rel_tol`·λ_max,
/// at most `r_max` of them.
pub fn sym_eig_trunc<T: Scalar>(m: &DMatrix<T>, rel_tol: T, r_max: usize) -> (Vec<T>, DMatrix<T>) {
    let (vals, vecs) = sym_eig_desc(m);
    let lmax = vals.first().copied().unwrap_or_else(T::zero);
    if lmax <= T::zero() {
        return (Vec::new(), DMatrix::zeros(m.nrows(), 0));
    }
    let r = vals.iter().take_while(|&&v| v > rel_tol * lmax).count().min(r_max);
    (vals[..r].to_vec(), vecs.columns(0, r).into_owned())
}

/// Thin SVD sorted by descending singular value.
pub fn svd_desc<T: Scalar>(m: &DMatrix<T>) -> (DMatrix<T>, Vec<T>, DMatrix<T>) {
    let (nr, nc) = m.shape();
    let k = nr.min(nc);
    if k == 0 {
        return (DMatrix::zeros(nr, 0), Vec::new(), DMatrix::zeros(nc, 0));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap_or(std::cmp::Ordering::Equal));
    let s = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let us = DMatrix::from_fn(nr, k, |r, c| u[(r, idx[c])]);
    let vs = DMatrix::from_fn(nc, k, |r, c| vt[(idx[c], r)]);
    (us, s, vs)
}

/// Truncated SVD keeping singular values > `rel_tol`·σ_max, at most `r_max`.
pub fn svd_trunc<T: Scalar>(m: &DMatrix<T>, rel_tol: T, r_max: usize) -> (DMatrix<T>, Vec<T>, DMatrix<T>) {
    let (u, s, v) = svd_desc(m);
    let smax = s.first().copied().unwrap_or_else(T::zero);
    if smax <= T::zero() {
        return (DMatrix::zeros(m.nrows(), 0), Vec::new(), DMatrix::zeros(m.ncols(), 0));
    }
    let r = s.iter().take_while(|&&v| v > rel_tol * smax).count().min(r_max);
    (u.columns(0, r).into_owned(), s[..r].to_vec(), v.columns(0, r).into_owned())
}

/// Left singular vectors of `m` for singular values above the threshold; uses the
/// smaller Gram side when `m` is very wide.
pub fn left_singular_trunc<T: Scalar>(m: &DMatrix<T>, rel_tol: T, r_max: usize) -> (DMatrix<T>, Vec<T>) {
    let (u, s, _) = svd_trunc(m, rel_tol, r_max);
    (u, s)
}

/// Eigenpairs of a general real matrix.
#[derive(Clone, Debug)]
pub struct GeneralEigen<T: Scalar> {
    /// Eigenvalues in Schur order.
    pub values: Vec<Complex<T>>,
    /// Right eigenvectors as columns (complex).
    pub right: Vec<Vec<Complex<T>>>,
    /// Left eigenvectors as columns: `yᴴ M = λ yᴴ`.
    pub left: Vec<Vec<Complex<T>>>,
}

fn cz<T: Scalar>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

fn cabs<T: Scalar>(z: Complex<T>) -> T {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// Eigenvalues of the 2x2 block `[[a,b],[c,d]]`.
fn eig2<T: Scalar>(a: T, b: T, c: T, d: T) -> (Complex<T>, Complex<T>) {
    let half = T::lit(0.5);
    let tr = (a + d) * half;
    let disc = ((a - d) * half) * ((a - d) * half) + b * c;
    if disc >= T::zero() {
        let s = disc.sqrt();
        (Complex::new(tr + s, T::zero()), Complex::new(tr - s, T::zero()))
    } else {
        let s = (-disc).sqrt();
        (Complex::new(tr, s), Complex::new(tr, -s))
    }
}

/// Block starts of a quasi upper triangular matrix.
fn blocks<T: Scalar>(t: &DMatrix<T>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != T::zero() {
            out.push((i, 2));
            i += 2;
        } else {
            out.push((i, 1));
            i += 1;
        }
    }
    out
}

/// Right eigenvectors of a quasi upper triangular matrix by back substitution.
fn quasi_eigvecs<T: Scalar>(t: &DMatrix<T>) -> (Vec<Complex<T>>, Vec<Vec<Complex<T>>>) {
    let n = t.nrows();
    let blk = blocks(t);
    let tnorm = t.amax().max(T::lit(f64::MIN_POSITIVE));
    let small = <T as Scalar>::epsilon() * tnorm;
    let mut values = Vec::with_capacity(n);
    let mut vecs = Vec::with_capacity(n);
    let clamp = |z: Complex<T>| if cabs(z) < small { Complex::new(small, T::zero()) } else { z };
    for (bi, &(s, sz)) in blk.iter().enumerate() {
        let lams: Vec<Complex<T>> = if sz == 1 {
            vec![Complex::new(t[(s, s)], T::zero())]
        } else {
            let (l1, l2) = eig2(t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
            vec![l1, l2]
        };
        for lam in lams {
            let mut x = vec![cz::<T>(); n];
            if sz == 1 {
                x[s] = Complex::new(T::one(), T::zero());
            } else {
                let b11 = t[(s, s)];
                let b12 = t[(s, s + 1)];
                let b21 = t[(s + 1, s)];
                let b22 = t[(s + 1, s + 1)];
                if b12 != T::zero() {
                    x[s] = Complex::new(b12, T::zero());
                    x[s + 1] = lam - Complex::new(b11, T::zero());
                } else {
                    x[s] = lam - Complex::new(b22, T::zero());
                    x[s + 1] = Complex::new(b21, T::zero());
                }
            }
            let top = s + sz;
            for &(r, rsz) in blk[..bi].iter().rev() {
                let mut rhs = [cz::<T>(), cz::<T>()];
                for (k, rr) in (r..r + rsz).enumerate() {
                    let mut acc = cz::<T>();
                    for j in r + rsz..top {
                        let tv = t[(rr, j)];
                        if tv != T::zero() {
                            acc += x[j] * tv;
                        }
                    }
                    rhs[k] = -acc;
                }
                if rsz == 1 {
                    let d = clamp(Complex::new(t[(r, r)], T::zero()) - lam);
                    x[r] = rhs[0] / d;
                } else {
                    let a = clamp(Complex::new(t[(r, r)], T::zero()) - lam);
                    let b = Complex::new(t[(r, r + 1)], T::zero());
                    let c = Complex::new(t[(r + 1, r)], T::zero());
                    let d = Complex::new(t[(r + 1, r + 1)], T::zero()) - lam;
                    let det = clamp(a * d - b * c);
                    x[r] = (rhs[0] * d - b * rhs[1]) / det;
                    x[r + 1] = (a * rhs[1] - c * rhs[0]) / det;
                }
            }
            values.push(lam);
            vecs.push(x);
        }
    }
    (values, vecs)
}

fn mul_real_complex<T: Scalar>(q: &DMatrix<T>, x: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = q.nrows();
    let mut re = DVector::zeros(x.len());
    let mut im = DVector::zeros(x.len());
    for (i, z) in x.iter().enumerate() {
        re[i] = z.re;
        im[i] = z.im;
    }
    let yr = q * re;
    let yi = q * im;
    let nrm = (yr.norm_squared() + yi.norm_squared()).sqrt();
    let nrm = if nrm > T::zero() { nrm } else { T::one() };
    (0..n).map(|i| Complex::new(yr[i] / nrm, yi[i] / nrm)).collect()
}

/// Computes eigenvalues plus right and left eigenvectors of a real square matrix.
pub fn general_eig<T: Scalar>(m: &DMatrix<T>) -> Result<GeneralEigen<T>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension("eigen-decomposition needs a square matrix".into()));
    }
    if n == 0 {
        return Ok(GeneralEigen { values: vec![], right: vec![], left: vec![] });
    }
    if !m.iter().all(|v| v.is_finite_val()) {
        return Err(Error::Invalid("non-finite matrix entry".into()));
    }
    let schur = m.clone().schur();
    let (q, t) = schur.unpack();
    let (values, xs) = quasi_eigvecs(&t);
    let right: Vec<_> = xs.iter().map(|x| mul_real_complex(&q, x)).collect();
    // left eigenvectors: right eigenvectors of Tᵀ, via index reversal to upper form
    let tr = DMatrix::from_fn(n, n, |i, j| t[(n - 1 - j, n - 1 - i)]);
    let (lv, ws) = quasi_eigvecs(&tr);
    // match each right eigenvalue to a left one (same Schur block, reversed order)
    let mut used = vec![false; n];
    let mut left = Vec::with_capacity(n);
    for lam in &values {
        let mut best = usize::MAX;
        let mut bd = T::max_value().unwrap();
        for (k, l2) in lv.iter().enumerate() {
            if used[k] {
                continue;
            }
            // left eigvec for λ: solves wᴴ T = λ wᴴ, i.e. Tᵀ w̄ = λ w̄ -> eigenvalue λ
            let d = cabs(*l2 - *lam);
            if d < bd {
                bd = d;
                best = k;
            }
        }
        used[best] = true;
        let w: Vec<Complex<T>> = (0..n).map(|i| ws[best][n - 1 - i]).collect();
        // w solves Tᵀ w = λ w; left eigenvector y with yᴴ M = λ yᴴ is conj(Q w)
        let y = mul_real_complex(&q, &w);
        left.push(y.into_iter().map(|z| z.conj()).collect());
    }
    Ok(GeneralEigen { values, right, left })
}

/// Real bases of dominant right/left invariant subspaces of `m`, biorthonormalized
/// (`Yᵀ X = I`), together with eigenvalue magnitudes per column. Complex conjugate
/// pairs contribute their real and imaginary parts as two columns sharing |λ|.
/// Eigenvalues with |λ| ≤ `rel_tol`·max are dropped; at most `r_max` columns.
pub fn dominant_eigenspaces<T: Scalar>(
    m: &DMatrix<T>,
    rel_tol: T,
    r_max: usize,
) -> Result<(DMatrix<T>, DMatrix<T>, Vec<T>)> {
    let n = m.nrows();
    let eig = general_eig(m)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        cabs(eig.values[b])
            .partial_cmp(&cabs(eig.values[a]))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(eig.values[b].re.partial_cmp(&eig.values[a].re).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.cmp(&b))
    });
    let lmax = order.first().map(|&i| cabs(eig.values[i])).unwrap_or_else(T::zero);
    let mut xcols: Vec<DVector<T>> = Vec::new();
    let mut ycols: Vec<DVector<T>> = Vec::new();
    let mut mags: Vec<T> = Vec::new();
    let mut taken = vec![false; n];
    let imag_tol = T::lit(1e3) * <T as Scalar>::epsilon() * lmax.max(T::lit(f64::MIN_POSITIVE));
    for &i in &order {
        if taken[i] {
            continue;
        }
        let lam = eig.values[i];
        let mag = cabs(lam);
        if mag <= rel_tol * lmax || lmax <= T::zero() {
            break;
        }
        taken[i] = true;
        let x = &eig.right[i];
        let y = &eig.left[i];
        if lam.im.abs() <= imag_tol {
            if xcols.len() + 1 > r_max {
                break;
            }
            // real eigenvalue: choose the phase that makes the vector real
            xcols.push(real_phase(x));
            ycols.push(real_phase(y));
            mags.push(mag);
        } else {
            // mark conjugate partner
            if let Some(&k) = order.iter().find(|&&k| !taken[k] && cabs(eig.values[k] - lam.conj()) <= T::lit(1e-6) * mag) {
                taken[k] = true;
            }
            if xcols.len() + 2 > r_max {
                break;
            }
            xcols.push(DVector::from_iterator(n, x.iter().map(|z| z.re)));
            xcols.push(DVector::from_iterator(n, x.iter().map(|z| z.im)));
            ycols.push(DVector::from_iterator(n, y.iter().map(|z| z.re)));
            ycols.push(DVector::from_iterator(n, y.iter().map(|z| z.im)));
            mags.push(mag);
            mags.push(mag);
        }
    }
    let r = xcols.len();
    let mut x = DMatrix::from_columns(&xcols);
    let y = DMatrix::from_columns(&ycols);
    if r == 0 {
        return Ok((DMatrix::zeros(n, 0), DMatrix::zeros(n, 0), mags));
    }
    let g = y.transpose() * &x;
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("left/right eigenvector pairing is singular".into()))?;
    x *= ginv;
    Ok((x, y, mags))
}

fn real_phase<T: Scalar>(z: &[Complex<T>]) -> DVector<T> {
    // rotate so the largest component is real
    let mut best = 0;
    let mut bm = T::zero();
    for (i, v) in z.iter().enumerate() {
        let m = cabs(*v);
        if m > bm {
            bm = m;
            best = i;
        }
    }
    if bm == T::zero() {
        return DVector::zeros(z.len());
    }
    let ph = z[best] / Complex::new(bm, T::zero());
    let rot = ph.conj();
    DVector::from_iterator(z.len(), z.iter().map(|v| (*v * rot).re))
}

/// Gram-Schmidt (two passes) orthonormalization of the columns, preserving nesting.
pub fn orthonormalize<T: Scalar>(u: &DMatrix<T>) -> DMatrix<T> {
    let mut q = u.clone();
    for k in 0..q.ncols() {
        for _ in 0..2 {
            for j in 0..k {
                let d = q.column(j).dot(&q.column(k));
                let cj = q.column(j).into_owned();
                q.column_mut(k).axpy(-d, &cj, T::one());
            }
        }
        let nrm = q.column(k).norm();
        if nrm > T::zero() {
            q.column_mut(k).scale_mut(T::one() / nrm);
        }
    }
    q
}

/// Nesting-preserving biorthogonalization so that `Vᵀ U = I` column by column; each
/// trial column is normalized to unit length.
pub fn biorthogonalize<T: Scalar>(u: &DMatrix<T>, v: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let mut u = u.clone();
    let mut v = v.clone();
    for k in 0..u.ncols() {
        for _ in 0..2 {
            for j in 0..k {
                let a = v.column(j).dot(&u.column(k));
                let uj = u.column(j).into_owned();
                u.column_mut(k).axpy(-a, &uj, T::one());
                let b = u.column(j).dot(&v.column(k));
                let vj = v.column(j).into_owned();
                v.column_mut(k).axpy(-b, &vj, T::one());
            }
        }
        let nu = u.column(k).norm();
        if nu == T::zero() {
            return Err(Error::Singular(format!("trial column {k} vanished")));
        }
        u.column_mut(k).scale_mut(T::one() / nu);
        let d = v.column(k).dot(&u.column(k));
        if d == T::zero() || !d.is_finite_val() {
            return Err(Error::Singular(format!("test/trial columns {k} are orthogonal")));
        }
        v.column_mut(k).scale_mut(T::one() / d);
    }
    Ok((u, v))
}
