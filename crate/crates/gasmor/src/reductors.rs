//! Structured reductors: pressure and flux projector pairs built separately from
//! Gramians or trajectory data.

use crate::error::{Error, Result};
use crate::gramians::{GramianKind, GramianPair, TrajectoryBank};
use crate::linalg::dense::{
    biorthogonalize, dominant_eigenspaces, left_singular_trunc, orthonormalize, svd_trunc, sym_eig_trunc,
};
use crate::linalg::Csr;
use crate::scalar::Scalar;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Relative threshold of truncated eigen/singular value decompositions.
pub const TRUNC_TOL: f64 = 1e-12;
/// Relative threshold below which balancing values are treated as breakdown.
pub const BALANCE_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Pod,
    Gopod,
    Dmd,
    Eds,
    Bpod,
    Ebt,
    Ebg,
}

/// Gramian data feeding a reductor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Data {
    /// Reachability only (or state snapshots for DMD).
    R,
    /// Reachability and observability.
    RO,
    WX,
    WZ,
}

/// A reductor: family, data variant, and whether observability-type data comes from
/// the dual system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Method {
    pub family: Family,
    pub data: Data,
    pub dual: bool,
}

impl Method {
    /// The thirteen base reductors.
    pub fn all() -> Vec<Method> {
        use Data::*;
        use Family::*;
        let m = |family, data| Method { family, data, dual: false };
        vec![
            m(Pod, R),
            m(Gopod, R),
            m(Dmd, R),
            m(Eds, RO),
            m(Eds, WX),
            m(Eds, WZ),
            m(Bpod, RO),
            m(Ebt, RO),
            m(Ebt, WX),
            m(Ebt, WZ),
            m(Ebg, RO),
            m(Ebg, WX),
            m(Ebg, WZ),
        ]
    }

    /// The ten dual-based variants.
    pub fn all_dual() -> Vec<Method> {
        Method::all()
            .into_iter()
            .filter(|m| m.data != Data::R)
            .map(|m| Method { dual: true, ..m })
            .collect()
    }

    pub fn id(&self) -> String {
        let fam = match self.family {
            Family::Pod => "pod",
            Family::Gopod => "gopod",
            Family::Dmd => "dmd",
            Family::Eds => "eds",
            Family::Bpod => "bpod",
            Family::Ebt => "ebt",
            Family::Ebg => "ebg",
        };
        let data = match self.data {
            Data::R => "r",
            Data::RO => "ro",
            Data::WX => "wx",
            Data::WZ => "wz",
        };
        format!("{fam}_{data}{}", if self.dual { "_l" } else { "" })
    }

    pub fn galerkin(&self) -> bool {
        matches!(self.family, Family::Pod | Family::Gopod | Family::Dmd | Family::Eds)
    }

    /// Gramians the method consumes.
    pub fn needs(&self) -> Vec<(GramianKind, bool)> {
        match self.data {
            Data::R => vec![(GramianKind::WR, false)],
            Data::RO => vec![(GramianKind::WR, false), (GramianKind::WO, self.dual)],
            Data::WX => vec![(GramianKind::WX, self.dual)],
            Data::WZ => vec![(GramianKind::WZ, self.dual)],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Method::all()
            .into_iter()
            .chain(Method::all_dual())
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown reductor `{s}`")))
    }
}

/// Truncatable pressure and flux projector pairs with importance weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorSeries<T: Scalar> {
    pub up: DMatrix<T>,
    pub vp: DMatrix<T>,
    pub uq: DMatrix<T>,
    pub vq: DMatrix<T>,
    pub wp: Vec<T>,
    pub wq: Vec<T>,
    pub galerkin: bool,
    pub method: String,
}

impl<T: Scalar> ProjectorSeries<T> {
    pub fn rank_p(&self) -> usize {
        self.up.ncols()
    }

    pub fn rank_q(&self) -> usize {
        self.uq.ncols()
    }

    /// Identity projectors (exactness check).
    pub fn identity(np: usize, nq: usize) -> Self {
        ProjectorSeries {
            up: DMatrix::identity(np, np),
            vp: DMatrix::identity(np, np),
            uq: DMatrix::identity(nq, nq),
            vq: DMatrix::identity(nq, nq),
            wp: vec![T::one(); np],
            wq: vec![T::one(); nq],
            galerkin: true,
            method: "identity".into(),
        }
    }

    /// Largest deviation of Vᵀ U from the identity over both blocks at order r.
    pub fn biorthogonality_error(&self, rp: usize, rq: usize) -> T {
        let e = |u: &DMatrix<T>, v: &DMatrix<T>, r: usize| {
            let g = v.columns(0, r).transpose() * u.columns(0, r);
            (g - DMatrix::identity(r, r)).amax()
        };
        e(&self.up, &self.vp, rp).max(e(&self.uq, &self.vq, rq))
    }
}

/// One block's basis pair and weights.
#[derive(Clone, Debug)]
pub struct BlockBasis<T: Scalar> {
    pub u: DMatrix<T>,
    pub v: DMatrix<T>,
    pub w: Vec<T>,
}

fn tol<T: Scalar>() -> T {
    T::lit(TRUNC_TOL)
}

/// POD: leading eigenvectors of W_R with weights √λ.
pub fn pod_block<T: Scalar>(wr: &DMatrix<T>, r_max: usize) -> BlockBasis<T> {
    let (vals, vecs) = sym_eig_trunc(wr, tol(), r_max);
    BlockBasis { u: vecs.clone(), v: vecs, w: vals.iter().map(|l| l.sqrt()).collect() }
}

/// Dominant subspaces from the weighted concatenation of factor pairs.
fn compress<T: Scalar>(parts: &[DMatrix<T>], r_max: usize) -> Result<BlockBasis<T>> {
    let n = parts[0].nrows();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    if cols == 0 {
        return Err(Error::Invalid("no subspace data (zero Gramian)".into()));
    }
    let mut cat = DMatrix::zeros(n, cols);
    let mut c = 0;
    for p in parts {
        cat.columns_mut(c, p.ncols()).copy_from(p);
        c += p.ncols();
    }
    let (u, s) = left_singular_trunc(&cat, tol(), r_max);
    if u.ncols() == 0 {
        return Err(Error::Invalid("no subspace data (zero Gramian)".into()));
    }
    Ok(BlockBasis { u: u.clone(), v: u, w: s })
}

fn scaled_factor<T: Scalar>(w: &DMatrix<T>, r_max: usize) -> DMatrix<T> {
    let (vals, mut vecs) = sym_eig_trunc(w, tol(), r_max);
    for (k, l) in vals.iter().enumerate() {
        vecs.column_mut(k).scale_mut(*l);
    }
    vecs
}

/// Dominant subspaces of W_R and W_O, each weighted by its inverse Frobenius norm.
pub fn eds_ro_block<T: Scalar>(wr: &DMatrix<T>, wo: &DMatrix<T>, r_max: usize) -> Result<BlockBasis<T>> {
    let n = wr.nrows();
    let mut parts = Vec::new();
    for w in [wr, wo] {
        let f = w.norm();
        if f > T::zero() {
            parts.push(scaled_factor(w, n) * (T::one() / f));
        }
    }
    if parts.is_empty() {
        return Err(Error::Invalid("no subspace data (zero Gramian)".into()));
    }
    compress(&parts, r_max)
}

/// Dominant subspaces of a cross Gramian from its left and right singular vectors.
pub fn eds_cross_block<T: Scalar>(wx: &DMatrix<T>, r_max: usize) -> Result<BlockBasis<T>> {
    let n = wx.nrows();
    let (u, s, v) = svd_trunc(wx, tol(), n);
    let mut us = u;
    let mut vs = v;
    for (k, sk) in s.iter().enumerate() {
        us.column_mut(k).scale_mut(*sk);
        vs.column_mut(k).scale_mut(*sk);
    }
    compress(&[us, vs], r_max)
}

/// Balancing from trial/test factors: SVD of T_Oᵀ T_R = U_B D V_Bᵀ,
/// U = T_R V_B D^{−1/2}, V = T_O U_B D^{−1/2}.
fn balance_factors<T: Scalar>(tr: &DMatrix<T>, to: &DMatrix<T>, r_max: usize) -> Result<BlockBasis<T>> {
    let n = tr.nrows();
    if tr.ncols() == 0 || to.ncols() == 0 {
        return Err(Error::Invalid("balancing needs nonzero Gramians".into()));
    }
    let m = to.transpose() * tr;
    let (ub, d, vb) = svd_trunc(&m, T::lit(BALANCE_TOL), r_max);
    if d.is_empty() {
        return Err(Error::Singular("balancing breakdown".into()));
    }
    let r = d.len();
    let mut u = tr * &vb;
    let mut v = to * &ub;
    for k in 0..r {
        let s = T::one() / d[k].sqrt();
        u.column_mut(k).scale_mut(s);
        v.column_mut(k).scale_mut(s);
    }
    debug_assert_eq!(u.nrows(), n);
    Ok(BlockBasis { u, v, w: d })
}

/// Balancing of W_R W_O through the square-root factor W_R = L Lᵀ and the eigenvectors
/// of the symmetric product Lᵀ W_O L = Y Σ² Yᵀ: U = L Y Σ^{−1/2}, V = W_O L Y Σ^{−3/2}.
pub fn ebt_ro_block<T: Scalar>(wr: &DMatrix<T>, wo: &DMatrix<T>, r_max: usize) -> Result<BlockBasis<T>> {
    let n = wr.nrows();
    let (lr, ur) = sym_eig_trunc(wr, tol(), n);
    if lr.is_empty() {
        return Err(Error::Invalid("balancing needs a nonzero reachability Gramian".into()));
    }
    let mut l = ur;
    for (k, v) in lr.iter().enumerate() {
        l.column_mut(k).scale_mut(v.sqrt());
    }
    let wol = wo * &l;
    let m = l.transpose() * &wol;
    let (lm, y) = sym_eig_trunc(&m, T::lit(BALANCE_TOL), r_max);
    if lm.is_empty() {
        return Err(Error::Invalid("balancing needs a nonzero observability Gramian".into()));
    }
    let sigma: Vec<T> = lm.iter().map(|v| v.sqrt()).collect();
    let mut u = &l * &y;
    let mut v = &wol * &y;
    for (k, s) in sigma.iter().enumerate() {
        u.column_mut(k).scale_mut(T::one() / s.sqrt());
        v.column_mut(k).scale_mut(T::one() / (*s * s.sqrt()));
    }
    Ok(BlockBasis { u, v, w: sigma })
}

/// Balanced POD: factors U_R Λ_R^{1/2} and U_O Λ_O^{1/2}.
pub fn bpod_block<T: Scalar>(wr: &DMatrix<T>, wo: &DMatrix<T>, r_max: usize) -> Result<BlockBasis<T>> {
    let n = wr.nrows();
    let f = |w: &DMatrix<T>| {
        let (vals, mut vecs) = sym_eig_trunc(w, tol(), n);
        for (k, l) in vals.iter().enumerate() {
            vecs.column_mut(k).scale_mut(l.sqrt());
        }
        vecs
    };
    balance_factors(&f(wr), &f(wo), r_max)
}

/// Balancing from the dominant right/left eigenspaces of a cross Gramian, scaled by
/// |λ|^{1/2}.
pub fn ebt_cross_block<T: Scalar>(wx: &DMatrix<T>, r_max: usize) -> Result<BlockBasis<T>> {
    let n = wx.nrows();
    let (mut x, mut y, mags) = dominant_eigenspaces(wx, tol(), n)?;
    if mags.is_empty() {
        return Err(Error::Invalid("balancing needs a nonzero cross Gramian".into()));
    }
    for (k, m) in mags.iter().enumerate() {
        let s = m.sqrt();
        x.column_mut(k).scale_mut(s);
        y.column_mut(k).scale_mut(s);
    }
    balance_factors(&x, &y, r_max)
}

/// DMD: basis from the leading left singular vectors of Â W_R^{1/2}, the snapshot
/// operator restricted to the empirical reachability Gramian W_R = X₋ X₋ᵀ of the same
/// snapshots. With X₋ = U Σ Vᵀ this is X₊ V Uᵀ. Also returns Â itself.
pub fn dmd_block<T: Scalar>(pairs: &[(DMatrix<T>, DMatrix<T>)], r_max: usize) -> Result<(BlockBasis<T>, DMatrix<T>)> {
    let (xp, u, s, v) = dmd_parts(pairs)?;
    let (basis, w) = left_singular_trunc(&(&xp * &v), tol(), r_max);
    if basis.ncols() == 0 {
        return Err(Error::Invalid("DMD kernel vanishes".into()));
    }
    let ahat = pinv_product(xp, u, &s, v);
    Ok((BlockBasis { u: basis.clone(), v: basis, w }, ahat))
}

/// X₊ V Σ⁻¹ Uᵀ.
fn pinv_product<T: Scalar>(xp: DMatrix<T>, u: DMatrix<T>, s: &[T], mut v: DMatrix<T>) -> DMatrix<T> {
    for (k, sk) in s.iter().enumerate() {
        v.column_mut(k).scale_mut(T::one() / *sk);
    }
    xp * v * u.transpose()
}

/// Concatenated X₊ and the truncated SVD of X₋.
#[allow(clippy::type_complexity)]
fn dmd_parts<T: Scalar>(pairs: &[(DMatrix<T>, DMatrix<T>)]) -> Result<(DMatrix<T>, DMatrix<T>, Vec<T>, DMatrix<T>)> {
    let n = pairs.first().map(|p| p.0.nrows()).unwrap_or(0);
    let m: usize = pairs.iter().map(|p| p.0.ncols()).sum();
    if m == 0 {
        return Err(Error::Invalid("DMD needs at least two snapshots".into()));
    }
    let mut xm = DMatrix::zeros(n, m);
    let mut xp = DMatrix::zeros(n, m);
    let mut c = 0;
    for (a, b) in pairs {
        xm.columns_mut(c, a.ncols()).copy_from(a);
        xp.columns_mut(c, b.ncols()).copy_from(b);
        c += a.ncols();
    }
    let (u, s, v) = svd_trunc(&xm, tol(), n.min(m));
    if s.is_empty() {
        return Err(Error::Invalid("DMD snapshots are all zero".into()));
    }
    Ok((xp, u, s, v))
}

/// Â = X₊ X₋⁺ over all snapshot pairs jointly (least squares, minimum norm).
pub fn dmd_operator<T: Scalar>(pairs: &[(DMatrix<T>, DMatrix<T>)]) -> Result<DMatrix<T>> {
    let (xp, u, s, v) = dmd_parts(pairs)?;
    Ok(pinv_product(xp, u, &s, v))
}

/// Reorders columns by descending ‖C u_k‖²·w_k.
pub fn sort_by_gain<T: Scalar>(b: &BlockBasis<T>, c: &Csr<T>) -> BlockBasis<T> {
    let cu = c.mul_dense(&b.u);
    let gains: Vec<T> = (0..b.u.ncols()).map(|k| cu.column(k).norm_squared() * b.w[k]).collect();
    let mut idx: Vec<usize> = (0..gains.len()).collect();
    idx.sort_by(|&i, &j| gains[j].partial_cmp(&gains[i]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    BlockBasis {
        u: DMatrix::from_fn(b.u.nrows(), idx.len(), |r, k| b.u[(r, idx[k])]),
        v: DMatrix::from_fn(b.v.nrows(), idx.len(), |r, k| b.v[(r, idx[k])]),
        w: idx.iter().map(|&i| b.w[i]).collect(),
    }
}

/// Goal-oriented POD ordering d_k = ‖C u_k‖² σ_k.
pub fn goal_oriented_sort<T: Scalar>(b: &BlockBasis<T>, c: &Csr<T>) -> BlockBasis<T> {
    sort_by_gain(b, c)
}

/// Balanced-gains ordering: per direction, ‖C u_k‖² times its balancing value.
pub fn sort_balanced_gains<T: Scalar>(b: &BlockBasis<T>, c: &Csr<T>) -> BlockBasis<T> {
    sort_by_gain(b, c)
}

fn finish<T: Scalar>(b: BlockBasis<T>, galerkin: bool) -> Result<BlockBasis<T>> {
    if galerkin {
        let u = orthonormalize(&b.u);
        Ok(BlockBasis { v: u.clone(), u, w: b.w })
    } else {
        let (u, v) = biorthogonalize(&b.u, &b.v)?;
        Ok(BlockBasis { u, v, w: b.w })
    }
}

/// Builds one block (pressure if `pressure`) of a method's projector series.
fn build_block<T: Scalar>(
    method: Method,
    bank: &TrajectoryBank<T>,
    pressure: bool,
    c: &Csr<T>,
    r_max: usize,
) -> Result<BlockBasis<T>> {
    let get = |k: GramianKind, d: bool| -> Result<GramianPair<T>> { bank.gramian(k, d) };
    let blk = |g: &GramianPair<T>| g.block(pressure).clone();
    let b = match (method.family, method.data) {
        (Family::Pod, _) => pod_block(&blk(&get(GramianKind::WR, false)?), r_max),
        (Family::Gopod, _) => goal_oriented_sort(&pod_block(&blk(&get(GramianKind::WR, false)?), r_max), c),
        (Family::Dmd, _) => {
            let np = bank.anchors[0].model.np;
            let n = if pressure { np } else { bank.anchors[0].model.nq };
            let off = if pressure { 0 } else { np };
            let pairs: Vec<_> = bank
                .snapshots()?
                .into_iter()
                .filter(|x| x.ncols() >= 2)
                .map(|x| {
                    let k = x.ncols();
                    (x.view((off, 0), (n, k - 1)).into_owned(), x.view((off, 1), (n, k - 1)).into_owned())
                })
                .collect();
            dmd_block(&pairs, r_max)?.0
        }
        (Family::Eds, Data::RO) => {
            eds_ro_block(&blk(&get(GramianKind::WR, false)?), &blk(&get(GramianKind::WO, method.dual)?), r_max)?
        }
        (Family::Eds, Data::WX) => eds_cross_block(&blk(&get(GramianKind::WX, method.dual)?), r_max)?,
        (Family::Eds, Data::WZ) => eds_cross_block(&blk(&get(GramianKind::WZ, method.dual)?), r_max)?,
        (Family::Bpod, _) => {
            bpod_block(&blk(&get(GramianKind::WR, false)?), &blk(&get(GramianKind::WO, method.dual)?), r_max)?
        }
        (Family::Ebt | Family::Ebg, Data::RO) => {
            ebt_ro_block(&blk(&get(GramianKind::WR, false)?), &blk(&get(GramianKind::WO, method.dual)?), r_max)?
        }
        (Family::Ebt | Family::Ebg, Data::WX) => ebt_cross_block(&blk(&get(GramianKind::WX, method.dual)?), r_max)?,
        (Family::Ebt | Family::Ebg, Data::WZ) => ebt_cross_block(&blk(&get(GramianKind::WZ, method.dual)?), r_max)?,
        (f, d) => return Err(Error::Unsupported(format!("{f:?} with {d:?} data"))),
    };
    let b = if method.family == Family::Ebg { sort_balanced_gains(&b, c) } else { b };
    finish(b, method.galerkin())
}

/// Projector series of `method` from the trajectory bank, at most `r_max` columns per
/// block.
pub fn reduce<T: Scalar>(method: Method, bank: &TrajectoryBank<T>, r_max: usize) -> Result<ProjectorSeries<T>> {
    let model = &bank.anchors[0].model;
    if method.dual && model.disc != crate::gasmodel::Discretization::Endpoint {
        return Err(Error::Unsupported(format!("{method} requires the ode_end model")));
    }
    let p = build_block(method, bank, true, &model.cdp, r_max)?;
    let q = build_block(method, bank, false, &model.csq, r_max)?;
    Ok(ProjectorSeries {
        up: p.u,
        vp: p.v,
        uq: q.u,
        vq: q.v,
        wp: p.w,
        wq: q.w,
        galerkin: method.galerkin(),
        method: method.id(),
    })
}
